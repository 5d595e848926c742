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

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hlmtc/data.hpp"
#include "hlmtc/encoder.hpp"
#include "hlmtc/hierarchy.hpp"
#include "hlmtc/rng.hpp"

namespace hlmtc::testing {

// Per-level label counts of the two benchmark taxonomies.
inline constexpr std::array<std::size_t, 8> kEurovocCounts{21, 127, 568, 4545, 2335, 497, 79, 6};
inline constexpr std::array<std::size_t, 7> kIcd9Counts{4, 79, 589, 3982, 9640, 7234, 867};

inline std::filesystem::path fixture(std::string_view name) {
  return std::filesystem::path(HLMTC_FIXTURE_DIR) / name;
}

/// Fresh, empty directory below the build tree.
inline std::filesystem::path scratch_dir(std::string_view name) {
  const auto dir = std::filesystem::path(HLMTC_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Leveled tree with the given number of labels per level; label i of level
/// n hangs under label (i mod |L_{n-1}|) of level n-1.
inline Hierarchy counted_hierarchy(std::span<const std::size_t> counts) {
  std::vector<LabelNode> nodes;
  for (std::size_t n = 0; n < counts.size(); ++n) {
    for (std::size_t i = 0; i < counts[n]; ++i) {
      LabelNode node;
      node.id = "c" + std::to_string(n + 1) + "-" + std::to_string(i);
      node.name = node.id;
      node.level = static_cast<int>(n + 1);
      if (n > 0) node.parents = {"c" + std::to_string(n) + "-" + std::to_string(i % counts[n - 1])};
      nodes.push_back(std::move(node));
    }
  }
  return Hierarchy::from_nodes(std::move(nodes));
}

/// Random leveled DAG: every non-root picks one to three parents from
/// strictly lower levels.
inline std::vector<LabelNode> random_dag_nodes(Rng& rng, std::size_t max_nodes, int max_levels) {
  const std::size_t count = 1 + rng.below(max_nodes);
  const int levels = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_levels)));
  std::vector<LabelNode> nodes;
  std::vector<std::vector<std::string>> by_level(static_cast<std::size_t>(levels));
  for (std::size_t i = 0; i < count; ++i) {
    LabelNode node;
    node.id = "n" + std::to_string(i);
    node.name = node.id;
    // the first node of each level guarantees no level is empty
    node.level = i < static_cast<std::size_t>(levels)
                     ? static_cast<int>(i) + 1
                     : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
    if (node.level > 1) {
      const std::size_t k = 1 + rng.below(3);
      for (std::size_t p = 0; p < k; ++p) {
        const auto lvl = rng.below(static_cast<std::uint64_t>(node.level - 1));
        const auto& pool = by_level[lvl];
        if (!pool.empty()) node.parents.push_back(pool[rng.below(pool.size())]);
      }
      if (node.parents.empty()) node.parents.push_back(by_level[0].front());
      std::sort(node.parents.begin(), node.parents.end());
      node.parents.erase(std::unique(node.parents.begin(), node.parents.end()), node.parents.end());
    }
    by_level[static_cast<std::size_t>(node.level - 1)].push_back(node.id);
    nodes.push_back(std::move(node));
  }
  return nodes;
}

inline ModelConfig tiny_config(int layers, int vocabulary = 24) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.feed_forward_size = 16;
  c.max_sequence_length = 16;
  c.vocabulary_size = vocabulary;
  c.dropout_rate = 0.0;
  c.seed = 7;
  return c;
}

/// Examples of a synthetic corpus, tokenized with a vocabulary built from
/// its training split.
struct SyntheticExamples {
  SyntheticCorpus corpus;
  Vocabulary vocabulary;
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

inline SyntheticExamples synthetic_examples(const SyntheticSpec& spec,
                                            std::size_t max_len = 128) {
  SyntheticExamples out;
  out.corpus = generate_synthetic(spec);
  PreprocessOptions options;
  options.max_sequence_length = max_len;
  std::vector<std::vector<std::string>> tokens;
  for (const Document& d : out.corpus.train) tokens.push_back(normalize(d.text, options.stopwords));
  out.vocabulary = Vocabulary::build(tokens);
  const Hierarchy& h = out.corpus.hierarchy;
  out.train = prepare_examples(out.corpus.train, h, h, out.vocabulary, options);
  out.dev = prepare_examples(out.corpus.dev, h, h, out.vocabulary, options);
  out.test = prepare_examples(out.corpus.test, h, h, out.vocabulary, options);
  return out;
}

}  // namespace hlmtc::testing
