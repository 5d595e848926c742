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

#include "hlmtc/encoder.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "hlmtc/error.hpp"
#include "hlmtc/special_tokens.hpp"

namespace hlmtc {
namespace {

constexpr double kInitStddev = 0.02;
constexpr double kNormEpsilon = 1e-12;
constexpr double kMaskBias = -1e9;

std::string layer_prefix(int layer) { return "encoder.layer." + std::to_string(layer) + "."; }

}  // namespace

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(Errc::kConfig, "model config: " + what); };
  if (num_layers < 1) bad("num_layers must be >= 1");
  if (hidden_size < 1 || num_heads < 1) bad("hidden_size and num_heads must be >= 1");
  if (hidden_size % num_heads != 0) {
    bad("hidden_size " + std::to_string(hidden_size) + " is not divisible by num_heads " +
        std::to_string(num_heads));
  }
  if (feed_forward_size < 1) bad("feed_forward_size must be >= 1");
  if (max_sequence_length < 2) bad("max_sequence_length must be >= 2");
  if (vocabulary_size <= kNumSpecialTokens) {
    bad("vocabulary_size must exceed the " + std::to_string(kNumSpecialTokens) +
        " special tokens");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout_rate must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},
                     {"hidden_size", c.hidden_size},
                     {"num_heads", c.num_heads},
                     {"feed_forward_size", c.feed_forward_size},
                     {"max_sequence_length", c.max_sequence_length},
                     {"vocabulary_size", c.vocabulary_size},
                     {"dropout_rate", c.dropout_rate},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("num_layers").get_to(c.num_layers);
  j.at("hidden_size").get_to(c.hidden_size);
  j.at("num_heads").get_to(c.num_heads);
  j.at("feed_forward_size").get_to(c.feed_forward_size);
  j.at("max_sequence_length").get_to(c.max_sequence_length);
  j.at("vocabulary_size").get_to(c.vocabulary_size);
  j.at("dropout_rate").get_to(c.dropout_rate);
  j.at("seed").get_to(c.seed);
}

std::size_t encoder_parameter_count(const ModelConfig& c) {
  const std::size_t v = static_cast<std::size_t>(c.vocabulary_size);
  const std::size_t s = static_cast<std::size_t>(c.max_sequence_length);
  const std::size_t h = static_cast<std::size_t>(c.hidden_size);
  const std::size_t f = static_cast<std::size_t>(c.feed_forward_size);
  const std::size_t n = static_cast<std::size_t>(c.num_layers);
  return v * h + s * h + 2 * h + n * (4 * h * h + 2 * h * f + 9 * h + f);
}

Tensor truncated_normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.truncated_normal(stddev);
  return t;
}

LayerActivation EncoderGraph::activation() const {
  LayerActivation a;
  a.sequence_mask = sequence_mask;
  for (const Var& c : cls) {
    const auto d = c.value().data();
    a.cls_vectors.emplace_back(d.begin(), d.end());
  }
  for (const auto& layer : attentions) {
    std::vector<Tensor> heads;
    heads.reserve(layer.size());
    for (const Var& h : layer) heads.push_back(h.value());
    a.attentions.push_back(std::move(heads));
  }
  return a;
}

Encoder Encoder::create(const ModelConfig& config, ParameterSet& params) {
  config.validate();
  Rng rng(derive_seed(config.seed, "init"));
  const std::size_t v = static_cast<std::size_t>(config.vocabulary_size);
  const std::size_t s = static_cast<std::size_t>(config.max_sequence_length);
  const std::size_t h = static_cast<std::size_t>(config.hidden_size);
  const std::size_t f = static_cast<std::size_t>(config.feed_forward_size);

  auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    params.add(name, truncated_normal_tensor({rows, cols}, kInitStddev, rng));
  };
  auto zeros = [&](const std::string& name, std::size_t n) { params.add(name, Tensor({n}, 0.0)); };
  auto ones = [&](const std::string& name, std::size_t n) { params.add(name, Tensor({n}, 1.0)); };

  weight("encoder.embeddings.token", v, h);
  weight("encoder.embeddings.position", s, h);
  ones("encoder.embeddings.norm.gain", h);
  zeros("encoder.embeddings.norm.bias", h);
  for (int layer = 1; layer <= config.num_layers; ++layer) {
    const std::string p = layer_prefix(layer);
    for (const char* proj : {"query", "key", "value", "output"}) {
      weight(p + "attention." + proj + ".weight", h, h);
      zeros(p + "attention." + proj + ".bias", h);
    }
    ones(p + "attention.norm.gain", h);
    zeros(p + "attention.norm.bias", h);
    weight(p + "ffn.intermediate.weight", f, h);
    zeros(p + "ffn.intermediate.bias", f);
    weight(p + "ffn.output.weight", h, f);
    zeros(p + "ffn.output.bias", h);
    ones(p + "ffn.norm.gain", h);
    zeros(p + "ffn.norm.bias", h);
  }
  return attach(config, params);
}

Encoder Encoder::attach(const ModelConfig& config, const ParameterSet& params) {
  config.validate();
  Encoder e;
  e.config_ = config;
  e.bind_indices(params);
  return e;
}

void Encoder::bind_indices(const ParameterSet& params) {
  token_table_ = params.index_of("encoder.embeddings.token");
  position_table_ = params.index_of("encoder.embeddings.position");
  embed_norm_gain_ = params.index_of("encoder.embeddings.norm.gain");
  embed_norm_bias_ = params.index_of("encoder.embeddings.norm.bias");
  const Shape expect_tokens{static_cast<std::size_t>(config_.vocabulary_size),
                            static_cast<std::size_t>(config_.hidden_size)};
  if (params[token_table_].value.shape() != expect_tokens) {
    fail(Errc::kShapeMismatch, "token table shape " +
                                   shape_string(params[token_table_].value.shape()) +
                                   " does not match config");
  }
  layers_.clear();
  for (int layer = 1; layer <= config_.num_layers; ++layer) {
    const std::string p = layer_prefix(layer);
    LayerParams lp{};
    lp.query_w = params.index_of(p + "attention.query.weight");
    lp.query_b = params.index_of(p + "attention.query.bias");
    lp.key_w = params.index_of(p + "attention.key.weight");
    lp.key_b = params.index_of(p + "attention.key.bias");
    lp.value_w = params.index_of(p + "attention.value.weight");
    lp.value_b = params.index_of(p + "attention.value.bias");
    lp.output_w = params.index_of(p + "attention.output.weight");
    lp.output_b = params.index_of(p + "attention.output.bias");
    lp.attn_norm_gain = params.index_of(p + "attention.norm.gain");
    lp.attn_norm_bias = params.index_of(p + "attention.norm.bias");
    lp.ffn_in_w = params.index_of(p + "ffn.intermediate.weight");
    lp.ffn_in_b = params.index_of(p + "ffn.intermediate.bias");
    lp.ffn_out_w = params.index_of(p + "ffn.output.weight");
    lp.ffn_out_b = params.index_of(p + "ffn.output.bias");
    lp.ffn_norm_gain = params.index_of(p + "ffn.norm.gain");
    lp.ffn_norm_bias = params.index_of(p + "ffn.norm.bias");
    layers_.push_back(lp);
  }
}

void Encoder::validate_tokens(std::span<const std::int32_t> tokens) const {
  if (tokens.empty() || tokens.front() != kClsId) {
    fail(Errc::kInvalidArgument, "encode: sequence must start with the CLS id");
  }
  if (tokens.size() > static_cast<std::size_t>(config_.max_sequence_length)) {
    fail(Errc::kOutOfRange, "encode: sequence length " + std::to_string(tokens.size()) +
                                " exceeds max_sequence_length " +
                                std::to_string(config_.max_sequence_length));
  }
  for (std::int32_t id : tokens) {
    if (id < 0 || id >= config_.vocabulary_size) {
      fail(Errc::kOutOfRange, "encode: unknown token id " + std::to_string(id));
    }
  }
}

EncoderGraph Encoder::forward(Binding& bind, std::span<const std::int32_t> tokens) const {
  validate_tokens(tokens);
  Tape& tape = bind.tape();
  const std::size_t len = tokens.size();
  const std::size_t hidden = static_cast<std::size_t>(config_.hidden_size);
  const std::size_t heads = static_cast<std::size_t>(config_.num_heads);
  const std::size_t head_size = hidden / heads;
  const double rate = config_.dropout_rate;

  EncoderGraph g;
  g.sequence_mask.resize(len);
  bool any_padding = false;
  for (std::size_t i = 0; i < len; ++i) {
    g.sequence_mask[i] = tokens[i] == kPadId ? 0 : 1;
    any_padding = any_padding || tokens[i] == kPadId;
  }
  std::optional<Var> mask_bias;
  if (any_padding) {
    Tensor bias({len, len});
    for (std::size_t q = 0; q < len; ++q) {
      for (std::size_t k = 0; k < len; ++k) {
        if (g.sequence_mask[k] == 0) bias.at(q, k) = kMaskBias;
      }
    }
    mask_bias = tape.constant(std::move(bias));
  }

  std::vector<std::int32_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = static_cast<std::int32_t>(i);
  Var x = add(embedding_lookup(bind(token_table_), tokens),
              embedding_lookup(bind(position_table_), positions));
  x = layer_norm(x, bind(embed_norm_gain_), bind(embed_norm_bias_), kNormEpsilon);
  x = dropout(x, rate);

  const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_size));
  for (const LayerParams& lp : layers_) {
    const Var q = add_bias(matmul_nt(x, bind(lp.query_w)), bind(lp.query_b));
    const Var k = add_bias(matmul_nt(x, bind(lp.key_w)), bind(lp.key_b));
    const Var v = add_bias(matmul_nt(x, bind(lp.value_w)), bind(lp.value_b));

    std::vector<Var> contexts;
    std::vector<Var> probs;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t start = h * head_size;
      Var scores = scale(matmul_nt(slice_last_axis(q, start, head_size),
                                   slice_last_axis(k, start, head_size)),
                         score_scale);
      if (mask_bias) scores = add(scores, *mask_bias);
      const Var p = softmax_rows(scores);
      probs.push_back(p);
      contexts.push_back(matmul(dropout(p, rate), slice_last_axis(v, start, head_size)));
    }
    g.attentions.push_back(std::move(probs));

    Var attn = add_bias(matmul_nt(concat_last_axis(contexts), bind(lp.output_w)),
                        bind(lp.output_b));
    attn = dropout(attn, rate);
    x = layer_norm(add(x, attn), bind(lp.attn_norm_gain), bind(lp.attn_norm_bias),
                   kNormEpsilon);

    Var ff = gelu(add_bias(matmul_nt(x, bind(lp.ffn_in_w)), bind(lp.ffn_in_b)));
    ff = add_bias(matmul_nt(ff, bind(lp.ffn_out_w)), bind(lp.ffn_out_b));
    ff = dropout(ff, rate);
    x = layer_norm(add(x, ff), bind(lp.ffn_norm_gain), bind(lp.ffn_norm_bias),
                   kNormEpsilon);

    g.layer_outputs.push_back(x);
    g.cls.push_back(select_row(x, 0));
  }
  return g;
}

LayerActivation Encoder::encode(const ParameterSet& params,
                                std::span<const std::int32_t> tokens, bool training,
                                std::uint64_t dropout_seed) const {
  Tape tape(training ? Mode::kTraining : Mode::kInference, dropout_seed);
  Binding bind = Binding::frozen(tape, params);
  return forward(bind, tokens).activation();
}

}  // namespace hlmtc
