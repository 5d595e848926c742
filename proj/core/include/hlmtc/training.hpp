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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hlmtc/autograd.hpp"
#include "hlmtc/data.hpp"
#include "hlmtc/model.hpp"

namespace hlmtc {

/// Sum of w_n * loss_n. Throws kShapeMismatch when lengths differ.
double weighted_loss(std::span<const double> level_losses, std::span<const double> weights);

/// Tape version: per-level mean BCE of `probabilities[n]` against
/// `targets[n]`, combined with `weights`. Per-level values are written to
/// `level_losses` when non-null.
Var weighted_loss(std::span<const Var> probabilities, std::span<const Tensor> targets,
                  std::span<const double> weights, std::vector<double>* level_losses = nullptr);

/// Level weights |L_n| / |L| for structured wirings, {1} for flat ones.
std::vector<double> loss_weights(const Model& model);
/// Targets in the layout the model's heads produce.
std::span<const Tensor> model_targets(const Model& model, const Targets& targets);

/// Adam with bias correction. Moments start at zero.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam(const ParameterSet& params, double learning_rate);

  double learning_rate() const noexcept { return learning_rate_; }
  std::uint64_t steps() const noexcept { return steps_; }

  /// One update from `grads[i]` for parameter i. Throws kNonFinite before
  /// touching any parameter if a gradient element is not finite.
  void step(ParameterSet& params, std::span<const Tensor> grads);
  /// Same, reading each Parameter::grad.
  void step(ParameterSet& params);

 private:
  double learning_rate_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  int max_epochs = 30;
  /// Epochs without a strict validation-loss improvement before stopping.
  int patience = 3;
  std::uint64_t seed = 0;
  /// Worker threads for per-document gradients. Results do not depend on it.
  int threads = 1;

  /// Throws kConfig.
  void validate() const;
};

struct LossReport {
  int epoch = 0;
  std::string split;  // "train" or "validation"
  std::vector<double> level_losses;
  double weighted = 0.0;
  double wall_seconds = 0.0;
};

/// One JSON object per line.
void write_loss_record(std::ostream& out, const LossReport& report);

struct TrainResult {
  /// Parameters from the epoch with the lowest validation loss.
  Model best;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
  std::vector<LossReport> log;
};

using EpochCallback = std::function<void(const LossReport&)>;

/// Mean weighted loss over `examples` in inference mode.
LossReport evaluate_loss(const Model& model, std::span<const Example> examples);

/// Mini-batch Adam training with early stopping on the validation weighted
/// loss. The gradient of a batch is the mean of per-document gradients,
/// summed in document order, so results are independent of `threads`.
/// Throws kEmptySplit, kDivergence.
TrainResult train(Model model, std::span<const Example> train_set,
                  std::span<const Example> validation_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct GridConfig {
  std::vector<double> learning_rates{2e-5, 3e-5, 5e-5};
  std::vector<double> dropout_rates{0.0, 0.1};
  /// Cells trained concurrently.
  int jobs = 1;

  void validate() const;
};

struct GridCell {
  double learning_rate = 0.0;
  double dropout_rate = 0.0;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct GridResult {
  /// Learning-rate major, in grid order.
  std::vector<GridCell> cells;
  std::size_t selected = 0;
  TrainResult best_run;
};

using CellCallback = std::function<void(std::size_t cell, const LossReport&)>;

/// Trains one model per (learning rate, dropout) cell from the same seeds and
/// selects the lowest validation loss (first cell wins ties).
GridResult grid_search(const ModelConfig& model_config, const Wiring& wiring,
                       const Hierarchy& hierarchy, std::span<const Example> train_set,
                       std::span<const Example> validation_set, const TrainConfig& config,
                       const GridConfig& grid, const CellCallback& on_epoch = {});

/// Tab-separated table keyed by (learning_rate, dropout_rate).
void write_grid_table(std::ostream& out, const GridResult& result);

}  // namespace hlmtc
