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

// Brute-force reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hlmtc/hierarchy.hpp"

namespace hlmtc::testing {

/// Ancestor closure by Floyd-Warshall over the parent relation.
class ClosureOracle {
 public:
  explicit ClosureOracle(const std::vector<LabelNode>& nodes) {
    for (const LabelNode& n : nodes) ids_.push_back(n.id);
    std::sort(ids_.begin(), ids_.end());
    const std::size_t n = ids_.size();
    reach_.assign(n, std::vector<char>(n, 0));
    for (const LabelNode& node : nodes) {
      for (const LabelId& p : node.parents) reach_[pos(node.id)][pos(p)] = 1;
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!reach_[i][k]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (reach_[k][j]) reach_[i][j] = 1;
        }
      }
    }
  }

  LabelSet augment(const LabelSet& labels) const {
    LabelSet out;
    for (const LabelId& id : labels) {
      out.insert(id);
      const std::size_t i = pos(id);
      for (std::size_t j = 0; j < ids_.size(); ++j) {
        if (reach_[i][j]) out.insert(ids_[j]);
      }
    }
    return out;
  }

 private:
  std::size_t pos(const LabelId& id) const {
    return static_cast<std::size_t>(std::lower_bound(ids_.begin(), ids_.end(), id) - ids_.begin());
  }

  std::vector<LabelId> ids_;
  std::vector<std::vector<char>> reach_;
};

/// R-Precision from pairwise comparisons: label i is in the top R when fewer
/// than R labels beat it (higher score, or equal score and smaller tie key).
inline double r_precision_oracle(const std::vector<double>& scores, const std::set<std::size_t>& gold,
                                 const std::vector<std::size_t>& tie_keys) {
  const std::size_t r = gold.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t beaten_by = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (j == i) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && tie_keys[j] < tie_keys[i])) ++beaten_by;
    }
    if (beaten_by < r && gold.count(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(r);
}

struct EvalOracle {
  std::vector<std::optional<double>> levels;
  std::optional<double> micro;
  std::optional<double> macro;
};

/// Per-level, micro and macro R-Precision with ties broken by label id.
inline EvalOracle eval_oracle(const std::vector<std::vector<double>>& scores,
                              const std::vector<LabelSet>& gold, const Hierarchy& h) {
  EvalOracle out;
  const auto lex_key = [&](const std::vector<LabelId>& ids) {
    std::vector<LabelId> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> keys;
    for (const LabelId& id : ids) {
      keys.push_back(static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin()));
    }
    return keys;
  };
  std::vector<LabelId> all;
  for (const LabelNode& n : h.nodes()) all.push_back(n.id);

  double macro_sum = 0.0;
  int macro_count = 0;
  for (int level = 1; level <= h.depth(); ++level) {
    const auto& ids = h.labels_at_level(level);
    const auto keys = lex_key(ids);
    double sum = 0.0;
    int docs = 0;
    for (std::size_t d = 0; d < scores.size(); ++d) {
      std::vector<double> s;
      std::set<std::size_t> g;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        s.push_back(scores[d][h.global_index(ids[i])]);
        if (gold[d].count(ids[i])) g.insert(i);
      }
      if (g.empty()) continue;
      sum += r_precision_oracle(s, g, keys);
      ++docs;
    }
    if (docs == 0) {
      out.levels.emplace_back();
      continue;
    }
    out.levels.emplace_back(sum / docs);
    macro_sum += sum / docs;
    ++macro_count;
  }
  if (macro_count > 0) out.macro = macro_sum / macro_count;

  const auto keys = lex_key(all);
  double sum = 0.0;
  int docs = 0;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    std::set<std::size_t> g;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (gold[d].count(all[i])) g.insert(i);
    }
    if (g.empty()) continue;
    sum += r_precision_oracle(scores[d], g, keys);
    ++docs;
  }
  if (docs > 0) out.micro = sum / docs;
  return out;
}

}  // namespace hlmtc::testing
