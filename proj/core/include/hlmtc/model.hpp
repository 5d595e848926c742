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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hlmtc/autograd.hpp"
#include "hlmtc/data.hpp"
#include "hlmtc/encoder.hpp"
#include "hlmtc/exits.hpp"
#include "hlmtc/hierarchy.hpp"

namespace hlmtc {

/// Encoder plus exit heads, owning its parameters.
class Model {
 public:
  struct Graph {
    EncoderGraph encoder;
    /// Per-level probability rows, or a single flat row.
    std::vector<Var> scores;
  };

  Model() = default;

  static Model create(const ModelConfig& config, const Wiring& wiring,
                      const Hierarchy& hierarchy);
  /// Wraps loaded parameters; shapes are checked against the config.
  static Model attach(const ModelConfig& config, const Wiring& wiring,
                      const Hierarchy& hierarchy, ParameterSet params);

  const ModelConfig& config() const noexcept { return config_; }
  const Wiring& wiring() const noexcept { return wiring_; }
  const Hierarchy& hierarchy() const noexcept { return hierarchy_; }
  const Encoder& encoder() const noexcept { return encoder_; }
  const std::vector<ExitHead>& heads() const noexcept { return heads_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  Graph forward(Binding& bind, std::span<const std::int32_t> tokens) const;

  /// Inference-mode encoder activations.
  LayerActivation activate(std::span<const std::int32_t> tokens) const;
  /// Per-level score vectors, or one flat vector for flat wirings.
  std::vector<std::vector<double>> predict(std::span<const std::int32_t> tokens) const;
  /// Scores over all |L| labels in global order, whatever the wiring.
  std::vector<double> flat_scores(std::span<const std::int32_t> tokens) const;

 private:
  ModelConfig config_;
  Wiring wiring_;
  Hierarchy hierarchy_;
  ParameterSet params_;
  Encoder encoder_;
  std::vector<ExitHead> heads_;
};

/// Everything needed to evaluate or analyze a trained model.
struct Checkpoint {
  Model model;
  Vocabulary vocabulary;
  StopwordSet stopwords;
  /// Free-form provenance (run config, seed, training summary).
  nlohmann::json meta = nlohmann::json::object();
};

/// Archive container; parameters in insertion order as float64 arrays.
/// The manifest also records the parameter count and its closed form.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hlmtc
