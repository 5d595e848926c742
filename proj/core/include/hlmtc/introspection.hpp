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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hlmtc/encoder.hpp"
#include "hlmtc/tensor.hpp"

namespace hlmtc {

/// Angle between unit vectors over pi: 0 identical, 0.5 orthogonal,
/// 1 antipodal. Computed as 2 atan2(|u - v|, |u + v|), which is arccos(u.v)
/// without the loss of precision near the ends.
double angular_distance(std::span<const double> u, std::span<const double> v);
/// Throws kInvalidArgument for a zero (or non-finite) norm.
std::vector<double> unit_normalize(std::span<const double> v);

/// Unit-normalized CLS vectors: vectors[doc][layer].
struct ClsSnapshot {
  std::vector<std::vector<std::vector<double>>> vectors;

  static ClsSnapshot from_activations(std::span<const LayerActivation> activations);
  std::size_t layers() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

/// Entry (i, j): mean over documents of the angular distance between the
/// layer i+1 and layer j+1 CLS vectors. Throws kInvalidArgument when empty.
Tensor cls_distance_matrix(const ClsSnapshot& snapshot);
/// Mean of the entries off the diagonal of a square matrix.
double mean_off_diagonal(const Tensor& matrix);

enum class Reduction { kAllQueries, kClsQuery };
std::string_view reduction_name(Reduction r);
/// "all-queries" | "cls-query"; throws kInvalidArgument.
Reduction parse_reduction(std::string_view text);

/// One head's attention over unmasked keys, averaged over the selected query
/// rows and renormalized. `layer` is 1-based.
std::vector<double> head_distribution(const LayerActivation& activation, int layer,
                                      std::size_t head, Reduction reduction);
/// Head average of head_distribution, renormalized.
std::vector<double> attention_distribution(const LayerActivation& activation, int layer,
                                           Reduction reduction);

/// Nats, with 0 ln 0 = 0. Throws kInvalidArgument for negative entries.
double entropy(std::span<const double> p);
inline constexpr double kKlSmoothing = 1e-10;
/// sum p ln(p / q') with q' = (q + eps) renormalized. Throws
/// kShapeMismatch when supports differ in size.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct AttentionProfile {
  /// layers[i]: head-averaged distribution of layer i+1.
  std::vector<std::vector<double>> layers;
  /// heads[i][h]: distribution of head h in layer i+1.
  std::vector<std::vector<std::vector<double>>> heads;
};

AttentionProfile attention_profile(const LayerActivation& activation, Reduction reduction);

/// Entry (i, j): mean over documents of KL(layer i+1 || layer j+1).
Tensor layer_kl_matrix(std::span<const AttentionProfile> profiles);
/// Mean KL over the h(h-1) ordered head pairs of one layer. Throws
/// kInvalidArgument with fewer than two heads.
double head_pair_kl(const AttentionProfile& profile, int layer);
double head_pair_kl(const LayerActivation& activation, int layer, Reduction reduction);

struct UtilizationReport {
  Reduction reduction = Reduction::kAllQueries;
  std::size_t documents = 0;
  Tensor angular;  // layers x layers
  Tensor kl;       // layers x layers
  /// Per layer, averaged over documents.
  std::vector<double> entropy;
  std::vector<double> head_pair_kl;
  double mean_off_diagonal_angular = 0.0;
};

/// Documents are reduced in the given order.
UtilizationReport analyze_utilization(std::span<const LayerActivation> activations,
                                      Reduction reduction);

/// Comma-separated square matrix with a `layer` header row and column;
/// values printed with 17 significant digits.
void write_matrix_csv(std::ostream& out, const Tensor& matrix);

/// Heatmap with one labeled square per cell and 1-based axis labels. The
/// colour scale runs linearly from white at the matrix minimum to dark blue
/// (#08306b) at the maximum; a constant matrix renders every cell white.
std::string heatmap_svg(const Tensor& matrix, std::string_view title);

/// Writes angular_distance.csv/.svg, kl_divergence.csv/.svg and
/// attention_table.tsv (layer, entropy, head-pair KL). Every file names the
/// query reduction. Throws kIo.
void emit_report(const UtilizationReport& report, const std::filesystem::path& out_dir);

/// Per-document activations saved in the archive container.
struct ActivationSnapshot {
  std::vector<std::string> doc_ids;
  std::vector<LayerActivation> activations;
};
void save_snapshot(const std::filesystem::path& path, const ActivationSnapshot& snapshot);
ActivationSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace hlmtc
