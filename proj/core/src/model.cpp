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

#include "hlmtc/model.hpp"

#include <sstream>

#include "hlmtc/archive.hpp"
#include "hlmtc/error.hpp"

namespace hlmtc {

Model Model::create(const ModelConfig& config, const Wiring& wiring,
                    const Hierarchy& hierarchy) {
  config.validate();
  Model m;
  m.config_ = config;
  m.wiring_ = wiring;
  m.hierarchy_ = hierarchy;
  m.encoder_ = Encoder::create(config, m.params_);
  m.heads_ = create_heads(wiring, hierarchy, config.hidden_size, config.seed, m.params_);
  return m;
}

Model Model::attach(const ModelConfig& config, const Wiring& wiring,
                    const Hierarchy& hierarchy, ParameterSet params) {
  const Model reference = create(config, wiring, hierarchy);
  if (reference.params_.size() != params.size()) {
    fail(Errc::kShapeMismatch, "expected " + std::to_string(reference.params_.size()) +
                                   " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& want = reference.params_[i];
    const Parameter& got = params[i];
    if (want.name != got.name || want.value.shape() != got.value.shape()) {
      fail(Errc::kShapeMismatch, "parameter " + std::to_string(i) + ": expected " +
                                     want.name + " " + shape_string(want.value.shape()) +
                                     ", got " + got.name + " " +
                                     shape_string(got.value.shape()));
    }
  }
  Model m;
  m.config_ = config;
  m.wiring_ = wiring;
  m.hierarchy_ = hierarchy;
  m.params_ = std::move(params);
  m.encoder_ = Encoder::attach(config, m.params_);
  m.heads_ = attach_heads(wiring, hierarchy, config.hidden_size, m.params_);
  return m;
}

Model::Graph Model::forward(Binding& bind, std::span<const std::int32_t> tokens) const {
  Graph g;
  g.encoder = encoder_.forward(bind, tokens);
  g.scores = apply_heads(bind, heads_, g.encoder.cls);
  return g;
}

LayerActivation Model::activate(std::span<const std::int32_t> tokens) const {
  return encoder_.encode(params_, tokens);
}

std::vector<std::vector<double>> Model::predict(std::span<const std::int32_t> tokens) const {
  Tape tape(Mode::kInference);
  Binding bind = Binding::frozen(tape, params_);
  std::vector<std::vector<double>> out;
  for (const Var& v : forward(bind, tokens).scores) {
    const auto d = v.value().data();
    out.emplace_back(d.begin(), d.end());
  }
  return out;
}

std::vector<double> Model::flat_scores(std::span<const std::int32_t> tokens) const {
  auto scores = predict(tokens);
  if (wiring_.is_flat()) return std::move(scores.front());
  return assemble_flat_scores(scores, hierarchy_);
}

namespace {

constexpr std::string_view kCheckpointKind = "hlmtc-checkpoint";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const Model& model = checkpoint.model;
  std::ostringstream hierarchy_text;
  write_hierarchy(hierarchy_text, model.hierarchy());

  nlohmann::json vocab = nlohmann::json::array();
  for (const auto& e : checkpoint.vocabulary.entries()) {
    vocab.push_back(nlohmann::json::array({e.token, e.frequency}));
  }

  Archive archive;
  archive.meta = {
      {"kind", kCheckpointKind},
      {"model_config", model.config()},
      {"wiring", model.wiring()},
      {"hierarchy", hierarchy_text.str()},
      {"vocabulary", vocab},
      {"stopwords", checkpoint.stopwords},
      {"parameter_count",
       {{"total", model.params().element_count()},
        {"encoder", encoder_parameter_count(model.config())},
        {"encoder_formula", kEncoderParameterFormula}}},
      {"run", checkpoint.meta},
  };
  for (const Parameter& p : model.params()) archive.arrays.emplace_back(p.name, p.value);
  write_archive(path, archive);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(Errc::kIo, "checkpoint '" + path.string() + "' does not exist");
  }
  Archive archive = read_archive(path);
  const auto& meta = archive.meta;
  if (meta.value("kind", "") != kCheckpointKind) {
    fail(Errc::kFormat, "'" + path.string() + "' is not a checkpoint");
  }
  try {
    const auto config = meta.at("model_config").get<ModelConfig>();
    const auto wiring = meta.at("wiring").get<Wiring>();
    std::istringstream hierarchy_text(meta.at("hierarchy").get<std::string>());
    const Hierarchy hierarchy = parse_hierarchy(hierarchy_text, path.string() + "#hierarchy");

    std::vector<Vocabulary::Entry> entries;
    for (const auto& e : meta.at("vocabulary")) {
      entries.push_back({e.at(0).get<std::string>(), e.at(1).get<std::size_t>()});
    }

    ParameterSet params;
    for (auto& [name, tensor] : archive.arrays) params.add(name, std::move(tensor));

    Checkpoint cp{Model::attach(config, wiring, hierarchy, std::move(params)),
                  Vocabulary::from_entries(std::move(entries)),
                  meta.at("stopwords").get<StopwordSet>(), meta.value("run", nlohmann::json::object())};
    return cp;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kFormat, "checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace hlmtc
