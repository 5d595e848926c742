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
#include <sstream>

#include <nlohmann/json.hpp>

#include "hlmtc/error.hpp"
#include "hlmtc/model.hpp"
#include "hlmtc/training.hpp"
#include "test_support.hpp"

namespace hlmtc {
namespace {

using testing::SyntheticExamples;
using testing::synthetic_examples;
using testing::tiny_config;

const SyntheticExamples& small_corpus() {
  static const SyntheticExamples data = [] {
    SyntheticSpec spec;
    spec.documents = 120;
    spec.vocabulary_size = 600;
    return synthetic_examples(spec, 24);
  }();
  return data;
}

Model small_model(const char* scheme, double dropout = 0.0) {
  const SyntheticExamples& data = small_corpus();
  ModelConfig c = tiny_config(12, static_cast<int>(data.vocabulary.size()));
  c.max_sequence_length = 24;
  c.dropout_rate = dropout;
  return Model::create(c, build_wiring(WiringScheme::parse(scheme), 12, 6),
                       data.corpus.hierarchy);
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.learning_rate = 3e-3;
  c.batch_size = 4;
  c.max_epochs = epochs;
  c.patience = epochs;
  c.seed = 21;
  return c;
}

TEST(WeightedLoss, HandSetThreeLevels) {
  const double losses[] = {0.2, 0.4, 0.6};
  const double weights[] = {0.5, 0.3, 0.2};
  EXPECT_NEAR(weighted_loss(losses, weights), 0.5 * 0.2 + 0.3 * 0.4 + 0.2 * 0.6, 1e-15);
  EXPECT_NEAR(weighted_loss(losses, weights), 0.34, 1e-12);
}

TEST(WeightedLoss, SingleUnitWeightIsPlainLoss) {
  const double loss[] = {0.731};
  const double weight[] = {1.0};
  EXPECT_EQ(weighted_loss(loss, weight), 0.731);
}

TEST(WeightedLoss, EqualLevelsGiveTheCommonValue) {
  const double losses[] = {0.42, 0.42};
  const double weights[] = {0.25, 0.75};
  EXPECT_NEAR(weighted_loss(losses, weights), 0.42, 1e-15);
}

TEST(WeightedLoss, MisalignedLevelsThrow) {
  const double losses[] = {0.1, 0.2};
  const double weights[] = {1.0};
  EXPECT_THROW(weighted_loss(losses, weights), Error);
}

TEST(WeightedLoss, TapeVersionMatchesPerLevelBce) {
  Tape tape;
  const Tensor p1 = Tensor::matrix(1, 2, {0.7, 0.1});
  const Tensor p2 = Tensor::matrix(1, 3, {0.2, 0.9, 0.4});
  const std::vector<Tensor> targets{Tensor::matrix(1, 2, {1, 0}), Tensor::matrix(1, 3, {0, 1, 1})};
  const std::vector<Var> probs{tape.constant(p1), tape.constant(p2)};
  const double weights[] = {0.4, 0.6};
  std::vector<double> levels;
  const double got = tape.value(weighted_loss(probs, targets, weights, &levels)).data()[0];
  const double b1 = bce_value(p1.data(), targets[0].data());
  const double b2 = bce_value(p2.data(), targets[1].data());
  ASSERT_EQ(levels.size(), 2u);
  EXPECT_NEAR(levels[0], b1, 1e-15);
  EXPECT_NEAR(levels[1], b2, 1e-15);
  EXPECT_NEAR(got, 0.4 * b1 + 0.6 * b2, 1e-15);
}

TEST(WeightedLoss, ModelWeightsAreLabelShares) {
  const Model structured = small_model("last-six");
  const auto w = loss_weights(structured);
  const LevelWeights expected = structured.hierarchy().level_weights();
  EXPECT_EQ(w, expected.weights);
  EXPECT_EQ(loss_weights(small_model("flat")), std::vector<double>{1.0});
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  ParameterSet params;
  params.add("x", Tensor::vector({1.5, -2.0}));
  Adam adam(params, 0.1);
  adam.step(params);
  EXPECT_EQ(params[0].value, Tensor::vector({1.5, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet params;
  params.add("x", Tensor::vector({1.0, 1.0}));
  params[0].grad = Tensor::vector({0.5, -3.0});
  Adam adam(params, 0.01);
  adam.step(params);
  // Bias-corrected moments after one step are g and g^2.
  EXPECT_NEAR(params[0].value[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(params[0].value[1], 1.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, SecondStepMatchesClosedForm) {
  ParameterSet params;
  params.add("x", Tensor::vector({0.0}));
  Adam adam(params, 0.1);
  const double g1 = 0.2, g2 = -0.6;
  params[0].grad = Tensor::vector({g1});
  adam.step(params);
  params[0].grad = Tensor::vector({g2});
  adam.step(params);
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double mh = m2 / (1 - 0.9 * 0.9), vh = v2 / (1 - 0.999 * 0.999);
  const double x1 = -0.1 * g1 / (std::abs(g1) + 1e-8);
  EXPECT_NEAR(params[0].value[0], x1 - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdating) {
  ParameterSet params;
  params.add("a", Tensor::vector({1.0}));
  params.add("b", Tensor::vector({2.0}));
  params[0].grad = Tensor::vector({0.5});
  params[1].grad = Tensor::vector({std::nan("")});
  Adam adam(params, 0.1);
  try {
    adam.step(params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonFinite);
  }
  EXPECT_EQ(params[0].value[0], 1.0);
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  c.patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), Error);
  GridConfig g;
  g.learning_rates.clear();
  EXPECT_THROW(g.validate(), Error);
}

TEST(Training, EmptySplitThrows) {
  const auto& data = small_corpus();
  try {
    train(small_model("last-six"), {}, data.dev, quick_config(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptySplit);
  }
}

TEST(Training, SameSeedGivesBitIdenticalParameters) {
  const auto& data = small_corpus();
  const auto train_set = std::span(data.train).first(24);
  const TrainResult a = train(small_model("last-six", 0.1), train_set, data.dev, quick_config(2));
  const TrainResult b = train(small_model("last-six", 0.1), train_set, data.dev, quick_config(2));
  EXPECT_TRUE(a.best.params().same_values(b.best.params()));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].weighted, b.log[i].weighted);
}

TEST(Training, ThreadCountDoesNotChangeResults) {
  const auto& data = small_corpus();
  const auto train_set = std::span(data.train).first(20);
  TrainConfig one = quick_config(1);
  TrainConfig three = one;
  three.threads = 3;
  const TrainResult a = train(small_model("one-by-one", 0.1), train_set, data.dev, one);
  const TrainResult b = train(small_model("one-by-one", 0.1), train_set, data.dev, three);
  EXPECT_TRUE(a.best.params().same_values(b.best.params()));
}

TEST(Training, LogRecordsAreConsistent) {
  const auto& data = small_corpus();
  const TrainResult r =
      train(small_model("last-six"), std::span(data.train).first(16), data.dev, quick_config(2));
  const auto w = loss_weights(r.best);
  ASSERT_EQ(r.log.size(), 4u);
  for (const LossReport& rep : r.log) {
    ASSERT_EQ(rep.level_losses.size(), 6u);
    double expected = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) expected += w[n] * rep.level_losses[n];
    EXPECT_NEAR(rep.weighted, expected, 1e-9);
  }
  EXPECT_EQ(r.log[0].split, "train");
  EXPECT_EQ(r.log[1].split, "validation");
  std::ostringstream out;
  write_loss_record(out, r.log[1]);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j.at("epoch"), 1);
  EXPECT_EQ(j.at("split"), "validation");
  EXPECT_EQ(j.at("weighted_loss").get<double>(), r.log[1].weighted);
  EXPECT_EQ(j.at("level_losses").size(), 6u);
}

TEST(Training, BestCheckpointHasLowestValidationLoss) {
  const auto& data = small_corpus();
  const TrainResult r =
      train(small_model("last-six"), std::span(data.train).first(16), data.dev, quick_config(3));
  double lowest = INFINITY;
  for (const LossReport& rep : r.log) {
    if (rep.split == "validation") lowest = std::min(lowest, rep.weighted);
  }
  EXPECT_EQ(r.best_validation_loss, lowest);
  EXPECT_NEAR(evaluate_loss(r.best, data.dev).weighted, lowest, 1e-12);
}

TEST(Training, PatienceOneStopsAfterEpochTwoWhenValidationWorsens) {
  const auto& data = small_corpus();
  // Training pushes every score down; validation wants every label on, so
  // its loss grows from the first epoch on.
  std::vector<Example> train_set(data.train.begin(), data.train.begin() + 16);
  std::vector<Example> val_set(data.train.begin() + 16, data.train.begin() + 24);
  for (Example& e : train_set) {
    for (Tensor& t : e.targets.levels) t.fill(0.0);
    e.targets.flat.fill(0.0);
  }
  for (Example& e : val_set) {
    for (Tensor& t : e.targets.levels) t.fill(1.0);
    e.targets.flat.fill(1.0);
  }
  TrainConfig c = quick_config(10);
  c.patience = 1;
  const TrainResult r = train(small_model("last-six"), train_set, val_set, c);
  EXPECT_EQ(r.epochs_run, 2);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.best_epoch, 1);
}

TEST(Training, SmallSubsetTrainingLossDecreases) {
  const auto& data = small_corpus();
  TrainConfig c = quick_config(5);
  const TrainResult r = train(small_model("last-six"), std::span(data.train).first(32), data.dev, c);
  std::vector<double> train_losses;
  for (const LossReport& rep : r.log) {
    if (rep.split == "train") train_losses.push_back(rep.weighted);
  }
  ASSERT_EQ(train_losses.size(), 5u);
  for (std::size_t i = 1; i < train_losses.size(); ++i) {
    EXPECT_LT(train_losses[i], train_losses[i - 1]) << "epoch " << i + 1;
  }
}

TEST(Training, FlatAndStructuredCheckpointsLoad) {
  const auto& data = small_corpus();
  const auto dir = testing::scratch_dir("training_checkpoints");
  for (const char* scheme : {"flat", "last-six"}) {
    const TrainResult r =
        train(small_model(scheme), std::span(data.train).first(8), data.dev, quick_config(1));
    Checkpoint ck{r.best, data.vocabulary, default_stopwords(), {}};
    const auto path = dir / (std::string(scheme) + ".hlmtc");
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_TRUE(back.model.params().same_values(r.best.params()));
    EXPECT_EQ(back.model.wiring(), r.best.wiring());
    const auto tokens = data.test.front().tokens;
    EXPECT_EQ(back.model.predict(tokens), r.best.predict(tokens));
  }
}

TEST(Training, StructuredLevelsEachReachTheTrunk) {
  const auto& data = small_corpus();
  Model m = small_model("last-six");
  const auto& ex = data.train.front();
  const auto targets = model_targets(m, ex.targets);
  const auto trunk = m.params().index_of("encoder.layer.1.attention.query.weight");
  for (std::size_t level = 0; level < 6; ++level) {
    m.params().zero_grad();
    Tape tape;
    Binding bind(tape, m.params());
    const Model::Graph g = m.forward(bind, ex.tokens);
    std::vector<double> weights(6, 0.0);
    weights[level] = 1.0;
    tape.backward(weighted_loss(g.scores, targets, weights));
    double norm = 0.0;
    for (double x : m.params()[trunk].grad.data()) norm += x * x;
    EXPECT_GT(norm, 0.0) << "level " << level + 1;
  }
}

TEST(GridSearch, ThreeByTwoRunsSixCells) {
  const auto& data = small_corpus();
  GridConfig grid;
  grid.learning_rates = {1e-3, 2e-3, 3e-3};
  grid.dropout_rates = {0.0, 0.1};
  const Model base = small_model("last-six");
  std::size_t records = 0;
  const GridResult r =
      grid_search(base.config(), base.wiring(), base.hierarchy(), std::span(data.train).first(8),
                  std::span(data.dev).first(8), quick_config(1), grid,
                  [&](std::size_t, const LossReport&) { ++records; });
  ASSERT_EQ(r.cells.size(), 6u);
  EXPECT_EQ(records, 12u);
  EXPECT_EQ(r.cells[1].learning_rate, 1e-3);
  EXPECT_EQ(r.cells[1].dropout_rate, 0.1);
  double lowest = INFINITY;
  for (const GridCell& c : r.cells) lowest = std::min(lowest, c.best_validation_loss);
  EXPECT_EQ(r.cells[r.selected].best_validation_loss, lowest);
  std::ostringstream table;
  write_grid_table(table, r);
  const std::string text = table.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "learning_rate\tdropout_rate\tbest_validation_loss\tbest_epoch\tepochs_run\tselected");
}

TEST(GridSearch, SingleCellEqualsPlainTraining) {
  const auto& data = small_corpus();
  GridConfig grid;
  grid.learning_rates = {2e-3};
  grid.dropout_rates = {0.1};
  TrainConfig c = quick_config(2);
  c.learning_rate = 2e-3;
  const Model base = small_model("last-six", 0.1);
  const auto train_set = std::span(data.train).first(12);
  const auto val_set = std::span(data.dev).first(8);
  const GridResult g =
      grid_search(base.config(), base.wiring(), base.hierarchy(), train_set, val_set, c, grid);
  const TrainResult t = train(small_model("last-six", 0.1), train_set, val_set, c);
  EXPECT_TRUE(g.best_run.best.params().same_values(t.best.params()));
  EXPECT_EQ(g.cells[0].best_validation_loss, t.best_validation_loss);
}

TEST(GridSearch, ParallelJobsMatchSequential) {
  const auto& data = small_corpus();
  GridConfig grid;
  grid.learning_rates = {1e-3, 4e-3};
  grid.dropout_rates = {0.0};
  const Model base = small_model("last-six");
  const auto train_set = std::span(data.train).first(8);
  const auto val_set = std::span(data.dev).first(8);
  const GridResult seq =
      grid_search(base.config(), base.wiring(), base.hierarchy(), train_set, val_set,
                  quick_config(1), grid);
  grid.jobs = 2;
  const GridResult par =
      grid_search(base.config(), base.wiring(), base.hierarchy(), train_set, val_set,
                  quick_config(1), grid);
  EXPECT_EQ(seq.selected, par.selected);
  for (std::size_t i = 0; i < seq.cells.size(); ++i) {
    EXPECT_EQ(seq.cells[i].best_validation_loss, par.cells[i].best_validation_loss);
  }
}

}  // namespace
}  // namespace hlmtc
