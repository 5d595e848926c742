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
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hlmtc {

using LabelId = std::string;
using LabelSet = std::set<LabelId>;

struct LabelNode {
  LabelId id;
  std::string name;
  std::vector<LabelId> parents;  // sorted, unique; empty for roots
  int level = 1;

  friend bool operator==(const LabelNode&, const LabelNode&) = default;
};

/// Per-level loss weights w_n = |L_n| / |L|. Counts are kept so callers can
/// compare the exact fraction.
struct LevelWeights {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  std::vector<double> weights;
};

/// Immutable leveled label DAG.
///
/// Labels have a global index: level-major, lexicographic by id within a
/// level. That order defines classifier output positions and the flat label
/// vector.
class Hierarchy {
 public:
  /// Validates and indexes the nodes. Levels are re-based so the smallest
  /// level becomes 1. Throws Error with kDuplicateId, kUnresolvedParent,
  /// kCycle, kLevelOrder, kParse (empty level) or kEmptyHierarchy.
  static Hierarchy from_nodes(std::vector<LabelNode> nodes);

  int depth() const noexcept { return static_cast<int>(levels_.size()); }
  std::size_t total_count() const noexcept { return nodes_.size(); }

  bool contains(const LabelId& id) const { return index_.contains(id); }
  const LabelNode& node(const LabelId& id) const;
  /// Nodes in global order.
  const std::vector<LabelNode>& nodes() const noexcept { return nodes_; }

  /// Labels of level n (1-based), lexicographic by id.
  const std::vector<LabelId>& labels_at_level(int n) const;
  std::size_t level_size(int n) const { return labels_at_level(n).size(); }
  /// Global index of the first label of level n.
  std::size_t level_offset(int n) const;

  std::size_t global_index(const LabelId& id) const;
  const LabelId& label_at(std::size_t global_index) const;
  /// Global index -> (level, index within level).
  std::pair<int, std::size_t> level_position(std::size_t global_index) const;

  /// Transitive closure over parent edges, excluding `id` itself.
  LabelSet ancestors(const LabelId& id) const;
  /// labels plus all their ancestors.
  LabelSet augment(const LabelSet& labels) const;

  LevelWeights level_weights() const;

  /// Removes the first `drop_top` and last `drop_bottom` levels. Parents on
  /// removed levels are dropped from parent lists; orphans become roots.
  Hierarchy truncate(int drop_top, int drop_bottom) const;

  friend bool operator==(const Hierarchy& a, const Hierarchy& b) {
    return a.nodes_ == b.nodes_;
  }

 private:
  std::vector<LabelNode> nodes_;
  std::unordered_map<LabelId, std::size_t> index_;
  std::vector<std::vector<LabelId>> levels_;
  std::vector<std::size_t> level_offsets_;
  std::vector<std::vector<std::size_t>> parent_index_;
};

/// Plain-text hierarchy format: a version line `# hlmtc-hierarchy v1`, a
/// column header `id<TAB>name<TAB>level<TAB>parents`, then one node per line
/// with comma-separated parent ids (empty for roots). Lines starting with
/// `#` after the version line are comments.
Hierarchy parse_hierarchy(std::istream& in, const std::string& source = "<stream>");
Hierarchy load_hierarchy(const std::filesystem::path& path);
void write_hierarchy(std::ostream& out, const Hierarchy& hierarchy);
void save_hierarchy(const std::filesystem::path& path, const Hierarchy& hierarchy);

}  // namespace hlmtc
