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

#include "hlmtc/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hlmtc/error.hpp"
#include "hlmtc/rng.hpp"

namespace hlmtc {

double weighted_loss(std::span<const double> level_losses, std::span<const double> weights) {
  if (level_losses.size() != weights.size() || weights.empty()) {
    fail(Errc::kShapeMismatch, "weighted_loss: " + std::to_string(level_losses.size()) +
                                   " losses for " + std::to_string(weights.size()) +
                                   " weights");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < weights.size(); ++n) total += weights[n] * level_losses[n];
  return total;
}

Var weighted_loss(std::span<const Var> probabilities, std::span<const Tensor> targets,
                  std::span<const double> weights, std::vector<double>* level_losses) {
  if (probabilities.size() != targets.size() || probabilities.size() != weights.size() ||
      weights.empty()) {
    fail(Errc::kShapeMismatch, "weighted_loss: " + std::to_string(probabilities.size()) +
                                   " score rows, " + std::to_string(targets.size()) +
                                   " target rows, " + std::to_string(weights.size()) +
                                   " weights");
  }
  if (level_losses) level_losses->clear();
  Var total;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    const Var level = bce_loss(probabilities[n], targets[n]);
    if (level_losses) level_losses->push_back(level.value()[0]);
    const Var term = weights.size() == 1 && weights[0] == 1.0 ? level : scale(level, weights[n]);
    total = n == 0 ? term : add(total, term);
  }
  return total;
}

std::vector<double> loss_weights(const Model& model) {
  if (model.wiring().is_flat()) return {1.0};
  return model.hierarchy().level_weights().weights;
}

std::span<const Tensor> model_targets(const Model& model, const Targets& targets) {
  if (model.wiring().is_flat()) return {&targets.flat, 1};
  return targets.levels;
}

// Adam ------------------------------------------------------------------------

Adam::Adam(const ParameterSet& params, double learning_rate)
    : learning_rate_(learning_rate), m_(params.gradient_buffer()), v_(params.gradient_buffer()) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(Errc::kConfig, "learning rate must be positive and finite");
  }
}

void Adam::step(ParameterSet& params, std::span<const Tensor> grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    fail(Errc::kShapeMismatch, "adam: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      fail(Errc::kShapeMismatch, "adam: gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      fail(Errc::kNonFinite, "adam: non-finite gradient for " + params[i].name);
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto w = params[i].value.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + kEpsilon);
    }
  }
}

void Adam::step(ParameterSet& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const Parameter& p : params) grads.push_back(p.grad);
  step(params, grads);
}

// Training --------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(Errc::kConfig, "learning_rate must be positive");
  }
  if (batch_size == 0) fail(Errc::kConfig, "batch_size must be at least 1");
  if (max_epochs < 1) fail(Errc::kConfig, "max_epochs must be at least 1");
  if (patience < 1) fail(Errc::kConfig, "patience must be at least 1");
  if (threads < 1) fail(Errc::kConfig, "threads must be at least 1");
}

void write_loss_record(std::ostream& out, const LossReport& report) {
  out << nlohmann::json{{"epoch", report.epoch},
                        {"split", report.split},
                        {"level_losses", report.level_losses},
                        {"weighted_loss", report.weighted},
                        {"wall_seconds", report.wall_seconds}}
             .dump()
      << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers and rethrows the
// first exception by index.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct DocResult {
  double loss = 0.0;
  std::vector<double> level_losses;
};

DocResult doc_gradient(const Model& model, const Example& ex, std::span<const double> weights,
                       std::uint64_t dropout_seed, std::vector<Tensor>& sink) {
  for (Tensor& t : sink) t.fill(0.0);
  Tape tape(Mode::kTraining, dropout_seed);
  Binding bind(tape, model.params(), sink);
  const auto graph = model.forward(bind, ex.tokens);
  DocResult r;
  const Var loss = weighted_loss(graph.scores, model_targets(model, ex.targets), weights,
                                 &r.level_losses);
  r.loss = loss.value()[0];
  tape.backward(loss);
  return r;
}

void check_split(std::span<const Example> examples, const char* name) {
  if (examples.empty()) fail(Errc::kEmptySplit, std::string(name) + " split is empty");
}

}  // namespace

LossReport evaluate_loss(const Model& model, std::span<const Example> examples) {
  check_split(examples, "evaluation");
  const auto weights = loss_weights(model);
  LossReport report;
  report.level_losses.assign(weights.size(), 0.0);
  std::vector<double> levels;
  for (const Example& ex : examples) {
    Tape tape(Mode::kInference);
    Binding bind = Binding::frozen(tape, model.params());
    const auto graph = model.forward(bind, ex.tokens);
    const Var loss = weighted_loss(graph.scores, model_targets(model, ex.targets), weights, &levels);
    report.weighted += loss.value()[0];
    for (std::size_t n = 0; n < levels.size(); ++n) report.level_losses[n] += levels[n];
  }
  const double count = static_cast<double>(examples.size());
  report.weighted /= count;
  for (double& l : report.level_losses) l /= count;
  return report;
}

TrainResult train(Model model, std::span<const Example> train_set,
                  std::span<const Example> validation_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  check_split(train_set, "training");
  check_split(validation_set, "validation");

  const auto weights = loss_weights(model);
  Adam adam(model.params(), config.learning_rate);

  TrainResult result;
  result.best = model;
  result.best_validation_loss = std::numeric_limits<double>::infinity();
  int stale = 0;

  const std::size_t batch_cap = std::min(config.batch_size, train_set.size());
  std::vector<std::vector<Tensor>> doc_grads(
      config.threads > 1 ? batch_cap : 1, model.params().gradient_buffer());
  std::vector<Tensor> batch_grad = model.params().gradient_buffer();
  std::vector<DocResult> doc_results(batch_cap);

  std::vector<std::size_t> order(train_set.size());
  const auto start = Clock::now();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(config.seed, "data-order", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(order.begin(), order.end());
    const std::uint64_t dropout_root =
        derive_seed(config.seed, "dropout", static_cast<std::uint64_t>(epoch));

    LossReport train_report;
    train_report.epoch = epoch;
    train_report.split = "train";
    train_report.level_losses.assign(weights.size(), 0.0);

    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      for (Tensor& t : batch_grad) t.fill(0.0);
      auto run_doc = [&](std::size_t slot, std::vector<Tensor>& sink) {
        const std::size_t pos = first + slot;
        const Example& ex = train_set[order[pos]];
        try {
          doc_results[slot] = doc_gradient(model, ex, weights, splitmix64(dropout_root + pos), sink);
        } catch (const Error& e) {
          if (e.code() != Errc::kNonFinite) throw;
          fail(Errc::kDivergence, "epoch " + std::to_string(epoch) + ", document '" + ex.id +
                                      "': " + e.what());
        }
      };
      if (doc_grads.size() == 1) {
        for (std::size_t s = 0; s < count; ++s) {
          run_doc(s, doc_grads[0]);
          for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i].add_in_place(doc_grads[0][i]);
        }
      } else {
        parallel_for(count, config.threads, [&](std::size_t s) { run_doc(s, doc_grads[s]); });
        for (std::size_t s = 0; s < count; ++s) {
          for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i].add_in_place(doc_grads[s][i]);
        }
      }
      for (std::size_t s = 0; s < count; ++s) {
        train_report.weighted += doc_results[s].loss;
        for (std::size_t n = 0; n < weights.size(); ++n) {
          train_report.level_losses[n] += doc_results[s].level_losses[n];
        }
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (Tensor& t : batch_grad) {
        for (double& g : t.data()) g *= inv;
      }
      try {
        adam.step(model.params(), batch_grad);
      } catch (const Error& e) {
        if (e.code() != Errc::kNonFinite) throw;
        fail(Errc::kDivergence, "epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }

    const double n_train = static_cast<double>(train_set.size());
    train_report.weighted /= n_train;
    for (double& l : train_report.level_losses) l /= n_train;
    if (!std::isfinite(train_report.weighted)) {
      fail(Errc::kDivergence, "epoch " + std::to_string(epoch) + ": training loss is not finite");
    }
    train_report.wall_seconds = seconds_since(start);
    result.log.push_back(train_report);
    if (on_epoch) on_epoch(train_report);

    LossReport val_report = evaluate_loss(model, validation_set);
    val_report.epoch = epoch;
    val_report.split = "validation";
    val_report.wall_seconds = seconds_since(start);
    if (!std::isfinite(val_report.weighted)) {
      fail(Errc::kDivergence, "epoch " + std::to_string(epoch) + ": validation loss is not finite");
    }
    result.log.push_back(val_report);
    if (on_epoch) on_epoch(val_report);
    result.epochs_run = epoch;

    if (val_report.weighted < result.best_validation_loss) {
      result.best_validation_loss = val_report.weighted;
      result.best_epoch = epoch;
      result.best.params() = model.params();
      stale = 0;
    } else if (++stale >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

// Grid search -----------------------------------------------------------------

void GridConfig::validate() const {
  if (learning_rates.empty()) fail(Errc::kConfig, "learning-rate grid is empty");
  if (dropout_rates.empty()) fail(Errc::kConfig, "dropout grid is empty");
  if (jobs < 1) fail(Errc::kConfig, "jobs must be at least 1");
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) fail(Errc::kConfig, "learning rates must be positive");
  }
  for (double d : dropout_rates) {
    if (!(d >= 0.0 && d < 1.0)) fail(Errc::kConfig, "dropout rates must lie in [0, 1)");
  }
}

GridResult grid_search(const ModelConfig& model_config, const Wiring& wiring,
                       const Hierarchy& hierarchy, std::span<const Example> train_set,
                       std::span<const Example> validation_set, const TrainConfig& config,
                       const GridConfig& grid, const CellCallback& on_epoch) {
  grid.validate();
  config.validate();

  GridResult out;
  for (double lr : grid.learning_rates) {
    for (double d : grid.dropout_rates) out.cells.push_back({lr, d, 0.0, 0, 0});
  }
  std::vector<TrainResult> runs(out.cells.size());

  parallel_for(out.cells.size(), grid.jobs, [&](std::size_t c) {
    ModelConfig mc = model_config;
    mc.dropout_rate = out.cells[c].dropout_rate;
    TrainConfig tc = config;
    tc.learning_rate = out.cells[c].learning_rate;
    EpochCallback cb;
    if (on_epoch) cb = [&, c](const LossReport& r) { on_epoch(c, r); };
    runs[c] = train(Model::create(mc, wiring, hierarchy), train_set, validation_set, tc, cb);
    out.cells[c].best_validation_loss = runs[c].best_validation_loss;
    out.cells[c].best_epoch = runs[c].best_epoch;
    out.cells[c].epochs_run = runs[c].epochs_run;
  });

  for (std::size_t c = 1; c < out.cells.size(); ++c) {
    if (out.cells[c].best_validation_loss < out.cells[out.selected].best_validation_loss) {
      out.selected = c;
    }
  }
  out.best_run = std::move(runs[out.selected]);
  return out;
}

void write_grid_table(std::ostream& out, const GridResult& result) {
  out << "learning_rate\tdropout_rate\tbest_validation_loss\tbest_epoch\tepochs_run\tselected\n";
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const GridCell& cell = result.cells[c];
    out << nlohmann::json(cell.learning_rate).dump() << '\t'
        << nlohmann::json(cell.dropout_rate).dump() << '\t'
        << nlohmann::json(cell.best_validation_loss).dump() << '\t' << cell.best_epoch << '\t'
        << cell.epochs_run << '\t' << (c == result.selected ? "yes" : "no") << '\n';
  }
}

}  // namespace hlmtc
