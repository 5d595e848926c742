// Copyright 2026 The hlmtc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hlmtc/autograd.hpp"
#include "hlmtc/encoder.hpp"
#include "hlmtc/hierarchy.hpp"

namespace hlmtc {

enum class SchemeKind { kFlat, kLastSix, kOneByOne, kInPairs, kHybrid, kCustom };

/// Named level-to-layer wiring, or an explicit CUSTOM assignment.
struct WiringScheme {
  SchemeKind kind = SchemeKind::kFlat;
  /// CUSTOM only: level (1-based) -> one or two layers (1-based).
  std::map<int, std::vector<int>> custom;

  /// CLI spelling: flat | last-six | one-by-one | in-pairs | hybrid.
  std::string name() const;

  /// Parses a CLI spelling; `custom=<file>` loads a wiring table.
  static WiringScheme parse(std::string_view text);
  static WiringScheme from_assignments(std::map<int, std::vector<int>> assignments);
};

inline constexpr std::string_view kSchemeNames =
    "flat, last-six, one-by-one, in-pairs, hybrid, custom=<file>";

/// Wiring table format: version line `# hlmtc-wiring v1`, column header
/// `level<TAB>layers`, then one `level<TAB>layer[,layer]` row per level.
std::map<int, std::vector<int>> parse_wiring_table(std::istream& in,
                                                   const std::string& source);
std::map<int, std::vector<int>> load_wiring_table(const std::filesystem::path& path);

struct Wiring {
  SchemeKind kind = SchemeKind::kFlat;
  /// Set for flat wirings: the single layer predicting all labels.
  int flat_layer = 0;
  /// Non-flat: level_layers[n-1] is the ascending layer tuple for level n.
  std::vector<std::vector<int>> level_layers;

  bool is_flat() const noexcept { return kind == SchemeKind::kFlat; }
  int depth() const noexcept { return static_cast<int>(level_layers.size()); }

  friend bool operator==(const Wiring&, const Wiring&) = default;
};

void to_json(nlohmann::json& j, const Wiring& w);
void from_json(const nlohmann::json& j, Wiring& w);

/// Named schemes other than FLAT require num_layers = 12 and depth = 6.
/// FLAT reads the top layer for any size. CUSTOM requires every level
/// 1..depth to map to one or two distinct existing layers, with layers
/// strictly increasing across levels.
Wiring build_wiring(const WiringScheme& scheme, int num_layers, int depth);

/// Sigmoid classifier f = sigmoid(W c + b) on one layer's CLS vector or the
/// concatenation (lower; higher) of a layer pair.
struct ExitHead {
  int level = 0;  // 0 for the flat head
  std::vector<int> layers;
  std::size_t outputs = 0;
  std::size_t input_width = 0;
  std::size_t weight_index = 0;  // [outputs, input_width]
  std::size_t bias_index = 0;    // [outputs]
};

/// Adds one head per level (or the single flat head) to `params`.
std::vector<ExitHead> create_heads(const Wiring& wiring, const Hierarchy& hierarchy,
                                   int hidden_size, std::uint64_t seed,
                                   ParameterSet& params);
std::vector<ExitHead> attach_heads(const Wiring& wiring, const Hierarchy& hierarchy,
                                   int hidden_size, const ParameterSet& params);

/// Tape version: per-level probability rows ([1, |L_n|]), or one flat row.
std::vector<Var> apply_heads(Binding& bind, std::span<const ExitHead> heads,
                             std::span<const Var> cls_per_layer);

/// Per-level score vectors (or one flat vector of length |L|).
std::vector<std::vector<double>> predict(const LayerActivation& activation,
                                         std::span<const ExitHead> heads,
                                         const ParameterSet& params,
                                         const Wiring& wiring);

/// Concatenates per-level scores into the hierarchy's global label order.
std::vector<double> assemble_flat_scores(std::span<const std::vector<double>> per_level,
                                         const Hierarchy& hierarchy);

}  // namespace hlmtc
