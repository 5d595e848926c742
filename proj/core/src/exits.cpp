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

#include "hlmtc/exits.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>

#include "hlmtc/error.hpp"
#include "text_util.hpp"

namespace hlmtc {
namespace {

constexpr std::string_view kWiringVersion = "# hlmtc-wiring v1";
constexpr std::string_view kWiringColumns = "level\tlayers";
constexpr int kNamedLayers = 12;
constexpr int kNamedDepth = 6;

int parse_int(std::string_view text, const std::string& where) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(Errc::kParse, where + ": bad integer '" + std::string(text) + "'");
  }
  return value;
}

std::string head_name(const ExitHead& h) {
  return h.level == 0 ? std::string("exit.flat") : "exit.level." + std::to_string(h.level);
}

}  // namespace

std::string WiringScheme::name() const {
  switch (kind) {
    case SchemeKind::kFlat: return "flat";
    case SchemeKind::kLastSix: return "last-six";
    case SchemeKind::kOneByOne: return "one-by-one";
    case SchemeKind::kInPairs: return "in-pairs";
    case SchemeKind::kHybrid: return "hybrid";
    case SchemeKind::kCustom: return "custom";
  }
  return "unknown";
}

WiringScheme WiringScheme::parse(std::string_view text) {
  if (text == "flat") return {SchemeKind::kFlat, {}};
  if (text == "last-six") return {SchemeKind::kLastSix, {}};
  if (text == "one-by-one") return {SchemeKind::kOneByOne, {}};
  if (text == "in-pairs") return {SchemeKind::kInPairs, {}};
  if (text == "hybrid") return {SchemeKind::kHybrid, {}};
  if (text.starts_with("custom=")) {
    return from_assignments(load_wiring_table(std::string(text.substr(7))));
  }
  fail(Errc::kUnsupportedScheme, "unknown scheme '" + std::string(text) +
                                     "'; valid schemes: " + std::string(kSchemeNames));
}

WiringScheme WiringScheme::from_assignments(std::map<int, std::vector<int>> assignments) {
  return {SchemeKind::kCustom, std::move(assignments)};
}

std::map<int, std::vector<int>> parse_wiring_table(std::istream& in,
                                                   const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source + ":" + std::to_string(line_no); };
  if (!std::getline(in, line) || text::strip_cr(line) != kWiringVersion) {
    fail(Errc::kParse, source + ": expected '" + std::string(kWiringVersion) + "'");
  }
  ++line_no;
  bool seen_columns = false;
  std::map<int, std::vector<int>> out;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = text::strip_cr(line);
    if (row.empty() || row.front() == '#') continue;
    if (!seen_columns) {
      if (row != kWiringColumns) fail(Errc::kParse, where() + ": expected column header");
      seen_columns = true;
      continue;
    }
    const auto fields = text::split(row, '\t');
    if (fields.size() != 2) fail(Errc::kParse, where() + ": expected 2 fields");
    const int level = parse_int(fields[0], where());
    std::vector<int> layers;
    for (auto f : text::split(fields[1], ',')) layers.push_back(parse_int(f, where()));
    if (!out.emplace(level, std::move(layers)).second) {
      fail(Errc::kParse, where() + ": level " + std::to_string(level) + " assigned twice");
    }
  }
  return out;
}

std::map<int, std::vector<int>> load_wiring_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kIo, "cannot open wiring table '" + path.string() + "'");
  return parse_wiring_table(in, path.string());
}

void to_json(nlohmann::json& j, const Wiring& w) {
  j = nlohmann::json{{"scheme", WiringScheme{w.kind, {}}.name()},
                     {"flat_layer", w.flat_layer},
                     {"level_layers", w.level_layers}};
}

void from_json(const nlohmann::json& j, Wiring& w) {
  const auto name = j.at("scheme").get<std::string>();
  w.kind = name == "custom" ? SchemeKind::kCustom : WiringScheme::parse(name).kind;
  j.at("flat_layer").get_to(w.flat_layer);
  j.at("level_layers").get_to(w.level_layers);
}

Wiring build_wiring(const WiringScheme& scheme, int num_layers, int depth) {
  Wiring w;
  w.kind = scheme.kind;
  if (scheme.kind == SchemeKind::kFlat) {
    if (num_layers < 1) fail(Errc::kUnsupportedScheme, "flat: no encoder layers");
    w.flat_layer = num_layers;
    return w;
  }

  if (scheme.kind != SchemeKind::kCustom &&
      (num_layers != kNamedLayers || depth != kNamedDepth)) {
    fail(Errc::kUnsupportedScheme,
         scheme.name() + " requires 12 encoder layers and a depth-6 hierarchy, got " +
             std::to_string(num_layers) + " layers and depth " + std::to_string(depth));
  }

  switch (scheme.kind) {
    case SchemeKind::kLastSix:
      for (int n = 1; n <= depth; ++n) w.level_layers.push_back({n + 6});
      break;
    case SchemeKind::kOneByOne:
      for (int n = 1; n <= depth; ++n) w.level_layers.push_back({2 * n});
      break;
    case SchemeKind::kInPairs:
      for (int n = 1; n <= depth; ++n) w.level_layers.push_back({2 * n - 1, 2 * n});
      break;
    case SchemeKind::kHybrid:
      w.level_layers = {{4}, {5}, {6, 7}, {8, 9}, {10, 11}, {12}};
      break;
    case SchemeKind::kCustom: {
      for (int n = 1; n <= depth; ++n) {
        const auto it = scheme.custom.find(n);
        if (it == scheme.custom.end()) {
          fail(Errc::kUnsupportedScheme, "custom wiring: level " + std::to_string(n) +
                                             " has no layer assignment");
        }
        std::vector<int> layers = it->second;
        std::sort(layers.begin(), layers.end());
        if (layers.empty() || layers.size() > 2 ||
            std::adjacent_find(layers.begin(), layers.end()) != layers.end()) {
          fail(Errc::kUnsupportedScheme, "custom wiring: level " + std::to_string(n) +
                                             " needs one or two distinct layers");
        }
        if (layers.front() < 1 || layers.back() > num_layers) {
          fail(Errc::kUnsupportedScheme, "custom wiring: level " + std::to_string(n) +
                                             " refers to a layer outside 1.." +
                                             std::to_string(num_layers));
        }
        if (!w.level_layers.empty() && w.level_layers.back().back() >= layers.front()) {
          fail(Errc::kUnsupportedScheme,
               "custom wiring: layers must strictly increase with level (level " +
                   std::to_string(n) + ")");
        }
        w.level_layers.push_back(std::move(layers));
      }
      if (scheme.custom.size() != static_cast<std::size_t>(depth)) {
        fail(Errc::kUnsupportedScheme, "custom wiring assigns levels beyond depth " +
                                           std::to_string(depth));
      }
      break;
    }
    case SchemeKind::kFlat:
      break;
  }
  return w;
}

std::vector<ExitHead> attach_heads(const Wiring& wiring, const Hierarchy& hierarchy,
                                   int hidden_size, const ParameterSet& params) {
  std::vector<ExitHead> heads;
  const auto h = static_cast<std::size_t>(hidden_size);
  if (wiring.is_flat()) {
    heads.push_back(ExitHead{0, {wiring.flat_layer}, hierarchy.total_count(), h, 0, 0});
  } else {
    if (wiring.depth() != hierarchy.depth()) {
      fail(Errc::kShapeMismatch, "wiring covers " + std::to_string(wiring.depth()) +
                                     " levels, hierarchy has " +
                                     std::to_string(hierarchy.depth()));
    }
    for (int n = 1; n <= wiring.depth(); ++n) {
      const auto& layers = wiring.level_layers[static_cast<std::size_t>(n - 1)];
      heads.push_back(ExitHead{n, layers, hierarchy.level_size(n), h * layers.size(), 0, 0});
    }
  }
  for (ExitHead& head : heads) {
    const std::string base = head_name(head);
    head.weight_index = params.index_of(base + ".weight");
    head.bias_index = params.index_of(base + ".bias");
    const Shape expect{head.outputs, head.input_width};
    if (params[head.weight_index].value.shape() != expect) {
      fail(Errc::kShapeMismatch, base + ".weight has shape " +
                                     shape_string(params[head.weight_index].value.shape()) +
                                     ", expected " + shape_string(expect));
    }
  }
  return heads;
}

std::vector<ExitHead> create_heads(const Wiring& wiring, const Hierarchy& hierarchy,
                                   int hidden_size, std::uint64_t seed,
                                   ParameterSet& params) {
  Rng rng(derive_seed(seed, "heads"));
  const auto h = static_cast<std::size_t>(hidden_size);
  auto add_head = [&](const std::string& base, std::size_t outputs, std::size_t width) {
    params.add(base + ".weight", truncated_normal_tensor({outputs, width}, 0.02, rng));
    params.add(base + ".bias", Tensor({outputs}, 0.0));
  };
  if (wiring.is_flat()) {
    add_head("exit.flat", hierarchy.total_count(), h);
  } else {
    for (int n = 1; n <= wiring.depth() && n <= hierarchy.depth(); ++n) {
      add_head("exit.level." + std::to_string(n), hierarchy.level_size(n),
               h * wiring.level_layers[static_cast<std::size_t>(n - 1)].size());
    }
  }
  return attach_heads(wiring, hierarchy, hidden_size, params);
}

std::vector<Var> apply_heads(Binding& bind, std::span<const ExitHead> heads,
                             std::span<const Var> cls_per_layer) {
  std::vector<Var> out;
  out.reserve(heads.size());
  for (const ExitHead& head : heads) {
    std::vector<Var> inputs;
    for (int layer : head.layers) {
      if (layer < 1 || static_cast<std::size_t>(layer) > cls_per_layer.size()) {
        fail(Errc::kShapeMismatch, "exit head reads layer " + std::to_string(layer) +
                                       " but the encoder has " +
                                       std::to_string(cls_per_layer.size()));
      }
      inputs.push_back(cls_per_layer[static_cast<std::size_t>(layer - 1)]);
    }
    const Var c = inputs.size() == 1 ? inputs.front() : concat_last_axis(inputs);
    if (c.value().size() != head.input_width) {
      fail(Errc::kShapeMismatch, "exit head expects width " +
                                     std::to_string(head.input_width) + ", got " +
                                     std::to_string(c.value().size()));
    }
    out.push_back(sigmoid(add_bias(matmul_nt(c, bind(head.weight_index)),
                                   bind(head.bias_index))));
  }
  return out;
}

std::vector<std::vector<double>> predict(const LayerActivation& activation,
                                         std::span<const ExitHead> heads,
                                         const ParameterSet& params,
                                         const Wiring& wiring) {
  const std::size_t expected_heads =
      wiring.is_flat() ? 1 : static_cast<std::size_t>(wiring.depth());
  if (heads.size() != expected_heads) {
    fail(Errc::kShapeMismatch, "predict: " + std::to_string(heads.size()) +
                                   " heads for a wiring needing " +
                                   std::to_string(expected_heads));
  }
  Tape tape(Mode::kInference);
  Binding bind = Binding::frozen(tape, params);
  std::vector<Var> cls;
  for (const auto& v : activation.cls_vectors) {
    cls.push_back(tape.constant(Tensor({1, v.size()}, v)));
  }
  std::vector<std::vector<double>> out;
  for (const Var& scores : apply_heads(bind, heads, cls)) {
    const auto d = scores.value().data();
    out.emplace_back(d.begin(), d.end());
  }
  return out;
}

std::vector<double> assemble_flat_scores(std::span<const std::vector<double>> per_level,
                                         const Hierarchy& hierarchy) {
  if (per_level.size() != static_cast<std::size_t>(hierarchy.depth())) {
    fail(Errc::kShapeMismatch, "assemble_flat_scores: " + std::to_string(per_level.size()) +
                                   " levels for a depth-" +
                                   std::to_string(hierarchy.depth()) + " hierarchy");
  }
  std::vector<double> flat;
  flat.reserve(hierarchy.total_count());
  for (int n = 1; n <= hierarchy.depth(); ++n) {
    const auto& scores = per_level[static_cast<std::size_t>(n - 1)];
    if (scores.size() != hierarchy.level_size(n)) {
      fail(Errc::kShapeMismatch, "assemble_flat_scores: level " + std::to_string(n) +
                                     " has " + std::to_string(scores.size()) +
                                     " scores for " +
                                     std::to_string(hierarchy.level_size(n)) + " labels");
    }
    flat.insert(flat.end(), scores.begin(), scores.end());
  }
  return flat;
}

}  // namespace hlmtc
