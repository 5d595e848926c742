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

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlmtc/hierarchy.hpp"

namespace hlmtc {

/// Label positions ordered by descending score. Equal scores are ordered by
/// ascending `tie_keys[i]` when given, else by ascending position.
std::vector<std::size_t> rank_labels(std::span<const double> scores,
                                     std::span<const std::size_t> tie_keys = {});

/// Precision@R with R = |gold|: the fraction of the R best-ranked positions
/// that are gold. Throws kInvalidArgument for empty, repeated or
/// out-of-range gold positions and kNonFinite for non-finite scores.
double r_precision(std::span<const double> scores, std::span<const std::size_t> gold,
                   std::span<const std::size_t> tie_keys = {});

/// Global-index -> rank of the label id in lexicographic order. Used as tie
/// keys so equal scores fall back to ascending label id in every label space.
std::vector<std::size_t> label_id_ranks(const Hierarchy& hierarchy);

struct PredictionRecord {
  std::string doc_id;
  /// One score per label in the hierarchy's global order.
  std::vector<double> scores;
};

struct EvalReport {
  /// levels[n-1]; empty when no document has gold labels at level n.
  std::vector<std::optional<double>> levels;
  std::vector<std::size_t> level_documents;
  /// Distinct gold labels seen at each level.
  std::vector<std::size_t> observed_labels;
  std::optional<double> micro;
  std::size_t micro_documents = 0;
  /// Mean of the present level values.
  std::optional<double> macro;
  std::size_t documents = 0;
};

/// `gold[i]` is the ancestor-closed label set of `predictions[i]`.
/// Level n averages R-Precision over documents with gold at that level;
/// micro averages full-label-space R-Precision (R = all gold labels).
EvalReport per_level_eval(std::span<const PredictionRecord> predictions,
                          std::span<const LabelSet> gold, const Hierarchy& hierarchy);

struct Stat {
  double mean = 0.0;
  /// Population standard deviation.
  double std = 0.0;
};

struct AggregateReport {
  std::vector<std::optional<Stat>> levels;
  std::optional<Stat> micro;
  std::optional<Stat> macro;
  std::size_t runs = 0;
};

/// Throws kIncongruent when reports differ in depth or in which cells are
/// present, kInvalidArgument for an empty list.
AggregateReport aggregate_runs(std::span<const EvalReport> reports);

/// `# hlmtc-predictions v1`, header `doc_id<TAB>label_id<TAB>score`, one
/// line per (document, label) in global label order; scores round-trip.
void write_predictions(std::ostream& out, std::span<const PredictionRecord> predictions,
                       const Hierarchy& hierarchy);

/// Tab-separated table: one column per level (L1..Ld), then Micro and
/// Macro. Rows give hierarchy label counts, observed label counts, document
/// counts and R-Precision ("-" for absent cells).
void write_report(std::ostream& out, const EvalReport& report, const Hierarchy& hierarchy);
/// Same layout with "mean" and "std" rows.
void write_aggregate_report(std::ostream& out, const AggregateReport& report);

}  // namespace hlmtc
