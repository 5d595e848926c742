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
#include <optional>
#include <string>

#include "hlmtc/data.hpp"
#include "hlmtc/run_config.hpp"

namespace hlmtc::cli {

struct GenDataOptions {
  std::string out;
  bool force = false;
  SyntheticSpec spec;
};

/// Flags given on the command line; unset values leave the config alone.
struct TrainOptions {
  std::string config;
  std::string out;
  bool grid = false;
  std::optional<std::string> scheme, corpus, hierarchy, stopwords;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate, dropout;
  std::optional<int> epochs, patience, threads, jobs, drop_top, drop_bottom;
  std::optional<int> layers, hidden, heads, feed_forward, max_length;
  std::optional<std::size_t> batch_size, min_frequency, max_vocabulary;
};

struct EvaluateOptions {
  std::string checkpoint;
  std::string split;
  std::string out;
};

struct AnalyzeOptions {
  std::string checkpoint;
  std::string split;
  std::string out;
  std::optional<std::string> reduction;
  std::string compare;
  std::size_t max_documents = 0;
  bool snapshot = false;
};

struct AugmentOptions {
  std::string hierarchy;
  std::string labels_in;
  std::string out;
};

void run_gen_data(const GenDataOptions& options);
void run_train(const TrainOptions& options);
void run_evaluate(const EvaluateOptions& options);
void run_analyze(const AnalyzeOptions& options);
void run_augment(const AugmentOptions& options);

}  // namespace hlmtc::cli
