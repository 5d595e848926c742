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

#include "hlmtc/hierarchy.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>

#include "hlmtc/error.hpp"
#include "text_util.hpp"

namespace hlmtc {
namespace {

constexpr std::string_view kVersionLine = "# hlmtc-hierarchy v1";
constexpr std::string_view kColumns = "id\tname\tlevel\tparents";

void validate_id(const LabelId& id, const std::string& where) {
  if (id.empty()) fail(Errc::kParse, where + ": empty label id");
  if (id.find_first_of(" \t\n\r,") != std::string::npos) {
    fail(Errc::kParse, where + ": label id '" + id +
                           "' contains whitespace or a comma");
  }
}

}  // namespace

Hierarchy Hierarchy::from_nodes(std::vector<LabelNode> nodes) {
  if (nodes.empty()) fail(Errc::kEmptyHierarchy, "hierarchy has no labels");

  std::unordered_map<LabelId, std::size_t> position;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    validate_id(nodes[i].id, "label");
    if (!position.emplace(nodes[i].id, i).second) {
      fail(Errc::kDuplicateId, "duplicate label id '" + nodes[i].id + "'");
    }
  }
  for (LabelNode& n : nodes) {
    std::sort(n.parents.begin(), n.parents.end());
    n.parents.erase(std::unique(n.parents.begin(), n.parents.end()), n.parents.end());
    for (const LabelId& p : n.parents) {
      if (!position.contains(p)) {
        fail(Errc::kUnresolvedParent,
             "label '" + n.id + "' references unknown parent '" + p + "'");
      }
    }
  }

  // Kahn's algorithm over parent -> child edges.
  {
    std::vector<std::size_t> pending(nodes.size());
    std::vector<std::vector<std::size_t>> children(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      pending[i] = nodes[i].parents.size();
      for (const LabelId& p : nodes[i].parents) children[position.at(p)].push_back(i);
    }
    std::queue<std::size_t> ready;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (pending[i] == 0) ready.push(i);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
      const std::size_t i = ready.front();
      ready.pop();
      ++visited;
      for (std::size_t c : children[i]) {
        if (--pending[c] == 0) ready.push(c);
      }
    }
    if (visited != nodes.size()) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (pending[i] != 0) {
          fail(Errc::kCycle, "parent relation has a cycle through '" + nodes[i].id + "'");
        }
      }
    }
  }

  int min_level = nodes.front().level;
  for (const LabelNode& n : nodes) min_level = std::min(min_level, n.level);
  for (LabelNode& n : nodes) n.level = n.level - min_level + 1;

  for (const LabelNode& n : nodes) {
    if (n.parents.empty() && n.level != 1) {
      fail(Errc::kLevelOrder, "root label '" + n.id + "' is on level " +
                                  std::to_string(n.level) + ", expected 1");
    }
    for (const LabelId& p : n.parents) {
      const LabelNode& parent = nodes[position.at(p)];
      if (parent.level >= n.level) {
        fail(Errc::kLevelOrder, "parent '" + p + "' (level " +
                                    std::to_string(parent.level) +
                                    ") is not above child '" + n.id + "' (level " +
                                    std::to_string(n.level) + ")");
      }
    }
  }

  std::sort(nodes.begin(), nodes.end(), [](const LabelNode& a, const LabelNode& b) {
    return a.level != b.level ? a.level < b.level : a.id < b.id;
  });

  Hierarchy h;
  h.nodes_ = std::move(nodes);
  const int depth = h.nodes_.back().level;
  h.levels_.resize(static_cast<std::size_t>(depth));
  h.level_offsets_.assign(static_cast<std::size_t>(depth), 0);
  for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
    const auto lvl = static_cast<std::size_t>(h.nodes_[i].level - 1);
    if (h.levels_[lvl].empty()) h.level_offsets_[lvl] = i;
    h.levels_[lvl].push_back(h.nodes_[i].id);
    h.index_.emplace(h.nodes_[i].id, i);
  }
  for (int n = 1; n <= depth; ++n) {
    if (h.levels_[static_cast<std::size_t>(n - 1)].empty()) {
      fail(Errc::kParse, "hierarchy level " + std::to_string(n) + " has no labels");
    }
  }
  h.parent_index_.resize(h.nodes_.size());
  for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
    for (const LabelId& p : h.nodes_[i].parents) {
      h.parent_index_[i].push_back(h.index_.at(p));
    }
  }
  return h;
}

const LabelNode& Hierarchy::node(const LabelId& id) const {
  return nodes_[global_index(id)];
}

const std::vector<LabelId>& Hierarchy::labels_at_level(int n) const {
  if (n < 1 || n > depth()) {
    fail(Errc::kOutOfRange, "level " + std::to_string(n) + " outside 1.." +
                                std::to_string(depth()));
  }
  return levels_[static_cast<std::size_t>(n - 1)];
}

std::size_t Hierarchy::level_offset(int n) const {
  labels_at_level(n);
  return level_offsets_[static_cast<std::size_t>(n - 1)];
}

std::size_t Hierarchy::global_index(const LabelId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) fail(Errc::kUnknownLabel, "unknown label '" + id + "'");
  return it->second;
}

const LabelId& Hierarchy::label_at(std::size_t global_index) const {
  if (global_index >= nodes_.size()) {
    fail(Errc::kOutOfRange, "label index " + std::to_string(global_index));
  }
  return nodes_[global_index].id;
}

std::pair<int, std::size_t> Hierarchy::level_position(std::size_t global_index) const {
  const int level = node(label_at(global_index)).level;
  return {level, global_index - level_offsets_[static_cast<std::size_t>(level - 1)]};
}

LabelSet Hierarchy::ancestors(const LabelId& id) const {
  const std::size_t start = global_index(id);
  LabelSet out;
  std::vector<std::size_t> stack(parent_index_[start].begin(), parent_index_[start].end());
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (!out.insert(nodes_[i].id).second) continue;
    stack.insert(stack.end(), parent_index_[i].begin(), parent_index_[i].end());
  }
  return out;
}

LabelSet Hierarchy::augment(const LabelSet& labels) const {
  LabelSet out;
  for (const LabelId& l : labels) {
    if (out.contains(l)) continue;
    out.insert(l);
    out.merge(ancestors(l));
  }
  return out;
}

LevelWeights Hierarchy::level_weights() const {
  LevelWeights w;
  w.total = nodes_.size();
  for (const auto& level : levels_) {
    w.counts.push_back(level.size());
    w.weights.push_back(static_cast<double>(level.size()) / static_cast<double>(w.total));
  }
  return w;
}

Hierarchy Hierarchy::truncate(int drop_top, int drop_bottom) const {
  if (drop_top < 0 || drop_bottom < 0) {
    fail(Errc::kInvalidArgument, "truncate: level counts must be non-negative");
  }
  if (drop_top + drop_bottom >= depth()) {
    fail(Errc::kEmptyHierarchy, "truncate: dropping " +
                                    std::to_string(drop_top + drop_bottom) +
                                    " of " + std::to_string(depth()) +
                                    " levels leaves nothing");
  }
  const int first = drop_top + 1;
  const int last = depth() - drop_bottom;
  std::vector<LabelNode> kept;
  for (const LabelNode& n : nodes_) {
    if (n.level < first || n.level > last) continue;
    LabelNode copy = n;
    copy.level = n.level - drop_top;
    std::erase_if(copy.parents, [&](const LabelId& p) {
      const int pl = node(p).level;
      return pl < first || pl > last;
    });
    kept.push_back(std::move(copy));
  }
  return from_nodes(std::move(kept));
}

Hierarchy parse_hierarchy(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };

  if (!std::getline(in, line)) fail(Errc::kParse, source + ": empty hierarchy file");
  ++line_no;
  if (text::strip_cr(line) != kVersionLine) {
    fail(Errc::kParse, where() + ": expected '" + std::string(kVersionLine) + "'");
  }
  bool seen_columns = false;
  std::vector<LabelNode> nodes;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = text::strip_cr(line);
    if (row.empty() || row.front() == '#') continue;
    if (!seen_columns) {
      if (row != kColumns) {
        fail(Errc::kParse, where() + ": expected column header '" +
                               std::string(kColumns) + "'");
      }
      seen_columns = true;
      continue;
    }
    const auto fields = text::split(row, '\t');
    if (fields.size() != 4) {
      fail(Errc::kParse, where() + ": expected 4 tab-separated fields, got " +
                             std::to_string(fields.size()));
    }
    LabelNode n;
    n.id = std::string(fields[0]);
    validate_id(n.id, where());
    n.name = std::string(fields[1]);
    const auto level_text = fields[2];
    const auto [ptr, ec] =
        std::from_chars(level_text.data(), level_text.data() + level_text.size(), n.level);
    if (ec != std::errc() || ptr != level_text.data() + level_text.size()) {
      fail(Errc::kParse, where() + ": bad level '" + std::string(level_text) + "'");
    }
    if (!fields[3].empty()) {
      for (auto p : text::split(fields[3], ',')) {
        if (p.empty()) fail(Errc::kParse, where() + ": empty parent id");
        n.parents.emplace_back(p);
      }
    }
    nodes.push_back(std::move(n));
  }
  if (nodes.empty()) fail(Errc::kEmptyHierarchy, source + ": no labels");
  return Hierarchy::from_nodes(std::move(nodes));
}

Hierarchy load_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIo, "cannot open hierarchy file '" + path.string() + "'");
  return parse_hierarchy(in, path.string());
}

void write_hierarchy(std::ostream& out, const Hierarchy& hierarchy) {
  out << kVersionLine << '\n' << kColumns << '\n';
  for (const LabelNode& n : hierarchy.nodes()) {
    out << n.id << '\t' << n.name << '\t' << n.level << '\t';
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      if (i != 0) out << ',';
      out << n.parents[i];
    }
    out << '\n';
  }
}

void save_hierarchy(const std::filesystem::path& path, const Hierarchy& hierarchy) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::kIo, "cannot write hierarchy file '" + path.string() + "'");
  write_hierarchy(out, hierarchy);
}

}  // namespace hlmtc
