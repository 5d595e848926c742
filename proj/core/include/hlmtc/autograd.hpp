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
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hlmtc/rng.hpp"
#include "hlmtc/tensor.hpp"

namespace hlmtc {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been cleared.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class Mode { kInference, kTraining };

/// Record of executed differentiable operations. Backward replays the
/// record in exact reverse order; gradients accumulate additively.
///
/// A tape is confined to one thread. Leaves created with `leaf()` reference
/// external tensors, which must outlive the tape.
class Tape {
 public:
  /// Propagates `grad`, the gradient of this node's `output`, to its inputs.
  using BackwardFn =
      std::function<void(Tape&, const Tensor& output, const Tensor& grad)>;

  explicit Tape(Mode mode = Mode::kInference, std::uint64_t dropout_seed = 0)
      : mode_(mode), rng_(dropout_seed) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Mode mode() const noexcept { return mode_; }
  bool training() const noexcept { return mode_ == Mode::kTraining; }
  Rng& rng() noexcept { return rng_; }

  /// Owned value that never receives a gradient.
  Var constant(Tensor value);
  /// Externally owned value. When `sink` is non-null the leaf is
  /// differentiable and backward adds its gradient into `*sink`.
  Var leaf(const Tensor& value, Tensor* sink);
  /// Records the output of a custom operation. `backward` may be empty when
  /// no input requires a gradient.
  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient buffer of `v`, allocated as zeros on first use. Returns null
  /// for values that do not require a gradient.
  Tensor* grad_for(Var v);
  /// Gradient accumulated on `v` by the last backward (empty if none).
  const Tensor& grad(Var v) const;

  /// Reverse sweep from a scalar loss. Clears node gradients first, then
  /// adds leaf gradients into their sinks.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  Mode mode_;
  Rng rng_;
  std::deque<Node> nodes_;  // references must stay valid on growth
};

// Forward primitives. Every operation checks shapes and output finiteness and
// throws Error{kShapeMismatch | kNonFinite}.
//
// Matrix view: `rows` is the product of leading extents, `cols` the last one.

/// a[m,k] * b[k,n] -> [m,n]
Var matmul(Var a, Var b);
/// a[m,k] * b[n,k]^T -> [m,n]. Linear layers store weights as [out, in].
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// x[r,c] + bias[c] broadcast over rows; the only broadcast supported.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
Var concat_last_axis(std::span<const Var> parts);
Var slice_last_axis(Var x, std::size_t start, std::size_t length);
/// Row `r` of x as a [1, cols] matrix.
Var select_row(Var x, std::size_t r);
/// table[V,H], ids -> [ids.size(), H]
Var embedding_lookup(Var table, std::span<const std::int32_t> ids);
/// Softmax along the last axis with max subtraction.
Var softmax_rows(Var x);
Var sigmoid(Var x);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Var gelu(Var x);
/// Normalizes each row over the last axis, then applies gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double epsilon = 1e-12);
/// Inverted dropout; the identity unless the tape is in training mode.
Var dropout(Var x, double rate);
Var mean(Var x);
Var sum(Var x);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy over all elements; probabilities are clamped to
/// [kBceEpsilon, 1 - kBceEpsilon] before the logarithm.
Var bce_loss(Var probabilities, const Tensor& targets);
/// Scalar reference used by tests and reporting.
double bce_value(std::span<const double> probabilities,
                 std::span<const double> targets);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

/// Named, ordered collection of trainable tensors. Order is insertion order
/// and defines checkpoint layout.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return items_.size(); }
  Parameter& operator[](std::size_t i) { return items_[i]; }
  const Parameter& operator[](std::size_t i) const { return items_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  /// Total number of scalar parameters.
  std::size_t element_count() const noexcept;
  void zero_grad();
  /// Zero tensors shaped like every parameter, for per-thread gradients.
  std::vector<Tensor> gradient_buffer() const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  /// Values equal bit-for-bit (names and shapes included).
  bool same_values(const ParameterSet& other) const;

 private:
  std::vector<Parameter> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Exposes parameters of a set as tape leaves, creating each leaf at most
/// once per tape. Gradients go to `Parameter::grad`, to an external buffer
/// (one tensor per parameter), or nowhere.
class Binding {
 public:
  /// Gradients accumulate into each Parameter::grad.
  Binding(Tape& tape, ParameterSet& params);
  /// Gradients accumulate into `sinks[i]` for parameter i.
  Binding(Tape& tape, const ParameterSet& params, std::vector<Tensor>& sinks);
  /// Leaves without gradients, for inference.
  static Binding frozen(Tape& tape, const ParameterSet& params);

  Var operator()(std::size_t index);
  Var operator()(std::string_view name) { return (*this)(params_->index_of(name)); }

  Tape& tape() noexcept { return *tape_; }
  const ParameterSet& params() const noexcept { return *params_; }

 private:
  Binding(Tape& tape, const ParameterSet* params, ParameterSet* grad_owner,
          std::vector<Tensor>* sinks);

  Tape* tape_;
  const ParameterSet* params_;
  ParameterSet* grad_owner_ = nullptr;
  std::vector<Tensor>* sinks_ = nullptr;
  std::vector<std::optional<Var>> cache_;
};

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  bool pass = true;
};

using LossBuilder = std::function<Var(Binding&)>;

/// Compares reverse-mode gradients with central finite differences
/// (f(x+h) - f(x-h)) / 2h for every element of every parameter. Relative
/// error is |a - n| / max(|a|, |n|, 1e-6). Tapes run in inference mode so
/// dropout is disabled. Parameter values are restored afterwards.
GradCheckReport grad_check(ParameterSet& params, const LossBuilder& builder,
                           double tolerance = 1e-4, double step = 1e-5);

}  // namespace hlmtc
