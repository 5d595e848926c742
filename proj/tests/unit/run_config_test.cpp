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

#include <fstream>

#include "hlmtc/error.hpp"
#include "hlmtc/run_config.hpp"
#include "test_support.hpp"

namespace hlmtc {
namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hlmtc::Error";
  return Errc::kInvalidArgument;
}

TEST(RunConfig, DefaultsAreDeskScale) {
  const RunConfig c;
  EXPECT_EQ(c.scheme, "last-six");
  EXPECT_EQ(c.model.num_layers, 12);
  EXPECT_EQ(c.model.hidden_size, 64);
  EXPECT_EQ(c.model.num_heads, 4);
  EXPECT_EQ(c.model.max_sequence_length, 128);
  EXPECT_EQ(c.grid.learning_rates, (std::vector<double>{2e-5, 3e-5, 5e-5}));
  EXPECT_EQ(c.grid.dropout_rates, (std::vector<double>{0.0, 0.1}));
  EXPECT_EQ(c.reduction, Reduction::kAllQueries);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, IniRoundTripIsExact) {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.scheme = "hybrid";
  c.model.dropout_rate = 0.1;
  c.train.learning_rate = 0.1 + 0.2;
  c.train.threads = 3;
  c.grid.learning_rates = {1e-3, 2.5e-4};
  c.drop_top = 1;
  c.max_vocabulary = 500;
  c.corpus = "data/syn";
  c.reduction = Reduction::kClsQuery;
  const std::string text = c.to_ini();
  const RunConfig back = RunConfig::from_ini(text);
  EXPECT_EQ(back.to_ini(), text);
  EXPECT_EQ(back.train.learning_rate, 0.1 + 0.2);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.reduction, Reduction::kClsQuery);
}

TEST(RunConfig, MergeFileOverridesOnlyGivenKeys) {
  const auto path = testing::scratch_dir("run_config") / "c.ini";
  std::ofstream(path) << "; comment\n[train]\nlearning_rate = 0.002\n\n[model]\nnum_layers = 4\n";
  RunConfig c;
  c.merge_file(path);
  EXPECT_EQ(c.train.learning_rate, 0.002);
  EXPECT_EQ(c.model.num_layers, 4);
  EXPECT_EQ(c.model.hidden_size, 64);
}

TEST(RunConfig, UnknownKeysAndSectionsAreErrors) {
  RunConfig c;
  EXPECT_EQ(code_of([&] { c.set("train", "momentum", "0.9"); }), Errc::kConfig);
  EXPECT_EQ(code_of([&] { c.set("optimizer", "lr", "0.9"); }), Errc::kConfig);
  EXPECT_EQ(code_of([&] { c.set("train", "batch_size", "eight"); }), Errc::kConfig);
  EXPECT_EQ(code_of([&] { RunConfig::from_ini("[train]\nlearning_rate = x\n"); }), Errc::kConfig);
}

TEST(RunConfig, MissingFileIsIoError) {
  RunConfig c;
  EXPECT_EQ(code_of([&] { c.merge_file("/nonexistent/hlmtc.ini"); }), Errc::kIo);
}

TEST(RunConfig, ValidateCatchesInconsistentValues) {
  RunConfig c;
  c.drop_top = -1;
  EXPECT_EQ(code_of([&] { c.validate(); }), Errc::kConfig);
  c = RunConfig{};
  c.train.patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.model.num_heads = 5;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace hlmtc
