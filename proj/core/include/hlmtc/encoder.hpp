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
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hlmtc/autograd.hpp"

namespace hlmtc {

struct ModelConfig {
  int num_layers = 12;
  int hidden_size = 64;
  int num_heads = 4;
  int feed_forward_size = 256;
  int max_sequence_length = 128;
  int vocabulary_size = 0;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  /// Throws Error{kConfig}.
  void validate() const;
  int head_size() const { return hidden_size / num_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Closed-form encoder parameter count:
///   V*H + S*H + 2H + N * (4H^2 + 2HF + 9H + F)
/// (token and position tables, embedding norm, then per layer four attention
/// projections with biases, two norms, and the two feed-forward layers).
std::size_t encoder_parameter_count(const ModelConfig& config);
inline constexpr const char* kEncoderParameterFormula =
    "V*H + S*H + 2*H + N*(4*H^2 + 2*H*F + 9*H + F)";

/// Values captured from one forward pass.
struct LayerActivation {
  /// cls_vectors[i] is the position-0 output of layer i+1.
  std::vector<std::vector<double>> cls_vectors;
  /// attentions[layer][head] is a [len, len] query x key matrix.
  std::vector<std::vector<Tensor>> attentions;
  /// 1 for real tokens, 0 for padding.
  std::vector<std::uint8_t> sequence_mask;
};

/// Tape handles for one forward pass.
struct EncoderGraph {
  std::vector<Var> layer_outputs;  // [len, H] per layer
  std::vector<Var> cls;            // [1, H] per layer
  std::vector<std::vector<Var>> attentions;
  std::vector<std::uint8_t> sequence_mask;

  LayerActivation activation() const;
};

/// Post-layer-norm bidirectional transformer encoder with learned absolute
/// positions and GELU feed-forward blocks.
class Encoder {
 public:
  Encoder() = default;

  /// Adds the encoder's parameters to `params`, initialized from a truncated
  /// normal (stddev 0.02, cut at 2 stddev) with zero biases and unit norm
  /// gains. Deterministic given `config.seed`.
  static Encoder create(const ModelConfig& config, ParameterSet& params);
  /// Re-attaches to parameters already present in `params` (e.g. loaded).
  static Encoder attach(const ModelConfig& config, const ParameterSet& params);

  const ModelConfig& config() const noexcept { return config_; }

  /// tokens[0] must be kClsId; kPadId positions are masked out of attention.
  /// Dropout is active when the binding's tape is in training mode.
  EncoderGraph forward(Binding& bind, std::span<const std::int32_t> tokens) const;

  /// Convenience wrapper running a private tape.
  LayerActivation encode(const ParameterSet& params,
                         std::span<const std::int32_t> tokens, bool training = false,
                         std::uint64_t dropout_seed = 0) const;

 private:
  struct LayerParams {
    std::size_t query_w, query_b, key_w, key_b, value_w, value_b;
    std::size_t output_w, output_b, attn_norm_gain, attn_norm_bias;
    std::size_t ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
    std::size_t ffn_norm_gain, ffn_norm_bias;
  };

  void bind_indices(const ParameterSet& params);
  void validate_tokens(std::span<const std::int32_t> tokens) const;

  ModelConfig config_;
  std::size_t token_table_ = 0;
  std::size_t position_table_ = 0;
  std::size_t embed_norm_gain_ = 0;
  std::size_t embed_norm_bias_ = 0;
  std::vector<LayerParams> layers_;
};

/// Initializes a tensor from the truncated normal used by the encoder.
Tensor truncated_normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace hlmtc
