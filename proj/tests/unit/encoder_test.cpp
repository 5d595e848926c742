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

#include <gtest/gtest.h>

#include <cmath>

#include "hlmtc/encoder.hpp"
#include "hlmtc/error.hpp"
#include "hlmtc/special_tokens.hpp"
#include "test_support.hpp"

namespace hlmtc {
namespace {

using testing::tiny_config;

std::size_t count_by_hand(std::size_t v, std::size_t s, std::size_t h, std::size_t f,
                          std::size_t n) {
  const std::size_t embeddings = v * h + s * h + 2 * h;
  const std::size_t attention = 4 * (h * h + h) + 2 * h;
  const std::size_t feed_forward = h * f + f + f * h + h + 2 * h;
  return embeddings + n * (attention + feed_forward);
}

TEST(Encoder, ParameterCountMatchesFormula) {
  for (int layers : {1, 2, 12}) {
    ModelConfig c = tiny_config(layers, 30);
    ParameterSet params;
    Encoder::create(c, params);
    EXPECT_EQ(params.element_count(), encoder_parameter_count(c));
    EXPECT_EQ(encoder_parameter_count(c), count_by_hand(30, 16, 8, 16, layers));
  }
}

TEST(Encoder, DeskScaleParameterCount) {
  ModelConfig c;
  c.vocabulary_size = 1200;
  EXPECT_EQ(encoder_parameter_count(c), count_by_hand(1200, 128, 64, 256, 12));
}

TEST(Encoder, InitializationIsDeterministic) {
  const ModelConfig c = tiny_config(2);
  ParameterSet a, b;
  Encoder::create(c, a);
  Encoder::create(c, b);
  EXPECT_TRUE(a.same_values(b));
  ModelConfig other = c;
  other.seed = 8;
  ParameterSet d;
  Encoder::create(other, d);
  EXPECT_FALSE(a.same_values(d));
}

TEST(Encoder, InitialWeightsAreTruncated) {
  ParameterSet params;
  Encoder::create(tiny_config(2), params);
  for (const Parameter& p : params) {
    for (double x : p.value.data()) EXPECT_LE(std::abs(x), 1.0) << p.name;
  }
}

TEST(Encoder, OutputsHaveExpectedShapes) {
  const ModelConfig c = tiny_config(3);
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  const std::vector<std::int32_t> tokens{kClsId, 5, 6, 7};
  const LayerActivation act = enc.encode(params, tokens);
  ASSERT_EQ(act.cls_vectors.size(), 3u);
  for (const auto& v : act.cls_vectors) EXPECT_EQ(v.size(), 8u);
  ASSERT_EQ(act.attentions.size(), 3u);
  for (const auto& layer : act.attentions) {
    ASSERT_EQ(layer.size(), 2u);
    for (const Tensor& a : layer) EXPECT_EQ(a.shape(), (Shape{4, 4}));
  }
}

TEST(Encoder, AttentionRowsSumToOneAndIgnorePadding) {
  const ModelConfig c = tiny_config(2);
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  const std::vector<std::int32_t> tokens{kClsId, 9, 10, kPadId, kPadId};
  const LayerActivation act = enc.encode(params, tokens);
  EXPECT_EQ(act.sequence_mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 0}));
  for (const auto& layer : act.attentions) {
    for (const Tensor& a : layer) {
      for (std::size_t q = 0; q < a.rows(); ++q) {
        double s = 0.0;
        for (double x : a.row(q)) s += x;
        EXPECT_NEAR(s, 1.0, 1e-12);
        EXPECT_EQ(a.at(q, 3), 0.0);
        EXPECT_EQ(a.at(q, 4), 0.0);
      }
    }
  }
}

TEST(Encoder, PaddingDoesNotChangeClsVectors) {
  const ModelConfig c = tiny_config(2);
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  const LayerActivation plain = enc.encode(params, std::vector<std::int32_t>{kClsId, 11, 12});
  const LayerActivation padded =
      enc.encode(params, std::vector<std::int32_t>{kClsId, 11, 12, kPadId, kPadId, kPadId});
  for (std::size_t l = 0; l < plain.cls_vectors.size(); ++l) {
    for (std::size_t i = 0; i < plain.cls_vectors[l].size(); ++i) {
      EXPECT_NEAR(plain.cls_vectors[l][i], padded.cls_vectors[l][i], 1e-12);
    }
  }
}

TEST(Encoder, DropoutChangesOutputsOnlyWhenTraining) {
  ModelConfig c = tiny_config(2);
  c.dropout_rate = 0.3;
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  const std::vector<std::int32_t> tokens{kClsId, 4, 5, 6};
  const auto eval_a = enc.encode(params, tokens);
  const auto eval_b = enc.encode(params, tokens);
  EXPECT_EQ(eval_a.cls_vectors, eval_b.cls_vectors);
  const auto train_a = enc.encode(params, tokens, true, 1);
  const auto train_b = enc.encode(params, tokens, true, 1);
  const auto train_c = enc.encode(params, tokens, true, 2);
  EXPECT_EQ(train_a.cls_vectors, train_b.cls_vectors);
  EXPECT_NE(train_a.cls_vectors, train_c.cls_vectors);
  EXPECT_NE(train_a.cls_vectors, eval_a.cls_vectors);
}

TEST(Encoder, RejectsBadTokenSequences) {
  const ModelConfig c = tiny_config(1);
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  EXPECT_THROW(enc.encode(params, std::vector<std::int32_t>{5, 6}), Error);
  EXPECT_THROW(enc.encode(params, std::vector<std::int32_t>{kClsId, 24}), Error);
  EXPECT_THROW(enc.encode(params, std::vector<std::int32_t>{}), Error);
  EXPECT_THROW(enc.encode(params, std::vector<std::int32_t>(17, kClsId)), Error);
}

TEST(Encoder, ConfigValidation) {
  ModelConfig c = tiny_config(2);
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config(2);
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config(0);
  EXPECT_THROW(c.validate(), Error);
}

TEST(Encoder, AttachRequiresMatchingParameters) {
  const ModelConfig c = tiny_config(2);
  ParameterSet params;
  Encoder::create(c, params);
  EXPECT_NO_THROW(Encoder::attach(c, params));
  EXPECT_THROW(Encoder::attach(tiny_config(3), params), Error);
}

TEST(Encoder, ConfigJsonRoundTrip) {
  ModelConfig c = tiny_config(2, 99);
  c.dropout_rate = 0.1;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(Encoder, GradientCheckOneLayer) {
  ModelConfig c = tiny_config(1, 12);
  c.hidden_size = 4;
  c.feed_forward_size = 6;
  ParameterSet params;
  const Encoder enc = Encoder::create(c, params);
  // Larger weights make the check sensitive to attention and norm terms.
  Rng rng(3);
  for (Parameter& p : params) {
    for (double& x : p.value.data()) x += 0.3 * rng.normal();
  }
  const std::vector<std::int32_t> tokens{kClsId, 5, 7, 5, kPadId};
  Tensor target({1, 4});
  for (std::size_t i = 0; i < 4; ++i) target[i] = i % 2 ? 1.0 : 0.0;
  const GradCheckReport report = grad_check(params, [&](Binding& bind) {
    const EncoderGraph g = enc.forward(bind, tokens);
    return bce_loss(sigmoid(g.cls.back()), target);
  });
  for (const auto& e : report.entries) EXPECT_TRUE(e.pass) << e.name << " " << e.max_relative_error;
}

}  // namespace
}  // namespace hlmtc
