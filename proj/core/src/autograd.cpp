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

#include "hlmtc/autograd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "hlmtc/error.hpp"

namespace hlmtc {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

MatrixMap as_matrix(Tensor& t) {
  return MatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    fail(Errc::kInvalidArgument, "operands recorded on different tapes");
  }
  return a.tape();
}

void require(bool condition, const char* op, const std::string& detail) {
  if (!condition) fail(Errc::kShapeMismatch, std::string(op) + ": " + detail);
}

Var emit(Tape& tape, const char* op, Tensor value, bool requires_grad,
         Tape::BackwardFn backward) {
  if (!value.all_finite()) {
    fail(Errc::kNonFinite, std::string(op) + ": non-finite output");
  }
  return tape.record(std::move(value), requires_grad,
                     requires_grad ? std::move(backward) : Tape::BackwardFn{});
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const { return tape_->value(*this); }

Tape::Node& Tape::node(Var v) {
  if (&v.tape() != this || v.id() >= nodes_.size()) {
    fail(Errc::kInvalidArgument, "variable does not belong to this tape");
  }
  return nodes_[v.id()];
}

const Tape::Node& Tape::node(Var v) const {
  if (&v.tape() != this || v.id() >= nodes_.size()) {
    fail(Errc::kInvalidArgument, "variable does not belong to this tape");
  }
  return nodes_[v.id()];
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) fail(Errc::kNonFinite, "constant: non-finite input");
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(const Tensor& value, Tensor* sink) {
  if (!value.all_finite()) fail(Errc::kNonFinite, "leaf: non-finite input");
  if (sink != nullptr && sink->shape() != value.shape()) {
    fail(Errc::kShapeMismatch, "leaf: gradient sink shape " +
                                   shape_string(sink->shape()) +
                                   " does not match value " +
                                   shape_string(value.shape()));
  }
  Node& n = nodes_.emplace_back();
  n.external = &value;
  n.sink = sink;
  n.requires_grad = sink != nullptr;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(backward);
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const { return node(v).value(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor* Tape::grad_for(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value());
  return &n.grad;
}

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

void Tape::backward(Var loss) {
  Node& root = node(loss);
  if (root.value().size() != 1) {
    fail(Errc::kShapeMismatch, "backward: loss must be scalar, got " +
                                   shape_string(root.value().shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) return;
  root.grad = Tensor(root.value().shape(), 1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.value(), n.grad);
    if (n.sink != nullptr) n.sink->add_in_place(n.grad);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Primitives

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(bv.rank() == 2 && av.cols() == bv.rows(), "matmul",
          shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor out(matrix_shape(av.rows(), bv.cols()));
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return emit(tape, "matmul", std::move(out), rg,
              [a, b](Tape& t, const Tensor&, const Tensor& g) {
                if (Tensor* ga = t.grad_for(a)) {
                  as_matrix(*ga).noalias() +=
                      as_matrix(g) * as_matrix(b.value()).transpose();
                }
                if (Tensor* gb = t.grad_for(b)) {
                  as_matrix(*gb).noalias() +=
                      as_matrix(a.value()).transpose() * as_matrix(g);
                }
              });
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(bv.cols() == av.cols(), "matmul_nt",
          shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  Tensor out(matrix_shape(av.rows(), bv.rows()));
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return emit(tape, "matmul_nt", std::move(out), rg,
              [a, b](Tape& t, const Tensor&, const Tensor& g) {
                if (Tensor* ga = t.grad_for(a)) {
                  as_matrix(*ga).noalias() += as_matrix(g) * as_matrix(b.value());
                }
                if (Tensor* gb = t.grad_for(b)) {
                  as_matrix(*gb).noalias() +=
                      as_matrix(g).transpose() * as_matrix(a.value());
                }
              });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape() == bv.shape(), "add",
          shape_string(av.shape()) + " + " + shape_string(bv.shape()));
  Tensor out = av;
  out.add_in_place(bv);
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return emit(tape, "add", std::move(out), rg,
              [a, b](Tape& t, const Tensor&, const Tensor& g) {
                if (Tensor* ga = t.grad_for(a)) ga->add_in_place(g);
                if (Tensor* gb = t.grad_for(b)) gb->add_in_place(g);
              });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "add_bias",
          shape_string(xv.shape()) + " + bias " + shape_string(bv.shape()));
  Tensor out = xv;
  const std::size_t rows = xv.rows(), cols = xv.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(bias);
  return emit(tape, "add_bias", std::move(out), rg,
              [x, bias, rows, cols](Tape& t, const Tensor&, const Tensor& g) {
                if (Tensor* gx = t.grad_for(x)) gx->add_in_place(g);
                if (Tensor* gb = t.grad_for(bias)) {
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                      (*gb)[c] += g[r * cols + c];
                    }
                  }
                }
              });
}

Var scale(Var x, double factor) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return emit(tape, "scale", std::move(out), tape.requires_grad(x),
              [x, factor](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += factor * g[i];
              });
}

Var concat_last_axis(std::span<const Var> parts) {
  if (parts.empty()) fail(Errc::kInvalidArgument, "concat_last_axis: no inputs");
  Tape& tape = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  bool rg = false;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    require(p.value().rows() == rows, "concat_last_axis",
            "row count mismatch " + shape_string(p.value().shape()));
    cols += p.value().cols();
    rg = rg || tape.requires_grad(p);
  }
  Tensor out(matrix_shape(rows, cols));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row(r).begin(), pv.row(r).end(),
                out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += pv.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return emit(tape, "concat_last_axis", std::move(out), rg,
              [inputs, rows, cols](Tape& t, const Tensor&, const Tensor& g) {
                std::size_t offset = 0;
                for (const Var& p : inputs) {
                  const std::size_t pc = p.value().cols();
                  if (Tensor* gp = t.grad_for(p)) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < pc; ++c) {
                        (*gp)[r * pc + c] += g[r * cols + offset + c];
                      }
                    }
                  }
                  offset += pc;
                }
              });
}

Var slice_last_axis(Var x, std::size_t start, std::size_t length) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  require(length > 0 && start + length <= xv.cols(), "slice_last_axis",
          "range [" + std::to_string(start) + ", " +
              std::to_string(start + length) + ") of " +
              shape_string(xv.shape()));
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(matrix_shape(rows, length));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < length; ++c) {
      out[r * length + c] = xv[r * cols + start + c];
    }
  }
  return emit(tape, "slice_last_axis", std::move(out), tape.requires_grad(x),
              [x, rows, cols, start, length](Tape& t, const Tensor&,
                                             const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t r = 0; r < rows; ++r) {
                  for (std::size_t c = 0; c < length; ++c) {
                    (*gx)[r * cols + start + c] += g[r * length + c];
                  }
                }
              });
}

Var select_row(Var x, std::size_t r) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  require(r < xv.rows(), "select_row",
          "row " + std::to_string(r) + " of " + shape_string(xv.shape()));
  const std::size_t cols = xv.cols();
  Tensor out(matrix_shape(1, cols),
             std::vector<double>(xv.row(r).begin(), xv.row(r).end()));
  return emit(tape, "select_row", std::move(out), tape.requires_grad(x),
              [x, r, cols](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t c = 0; c < cols; ++c) (*gx)[r * cols + c] += g[c];
              });
}

Var embedding_lookup(Var table, std::span<const std::int32_t> ids) {
  Tape& tape = table.tape();
  const Tensor& tv = table.value();
  require(tv.rank() == 2 && !ids.empty(), "embedding_lookup",
          "table " + shape_string(tv.shape()) + " with " +
              std::to_string(ids.size()) + " ids");
  const std::size_t width = tv.cols();
  Tensor out(matrix_shape(ids.size(), width));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      fail(Errc::kOutOfRange, "embedding_lookup: id " + std::to_string(ids[i]) +
                                  " outside table of " +
                                  std::to_string(tv.rows()) + " rows");
    }
    const auto src = tv.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return emit(tape, "embedding_lookup", std::move(out), tape.requires_grad(table),
              [table, saved = std::move(saved), width](Tape& t, const Tensor&,
                                                       const Tensor& g) {
                Tensor* gt = t.grad_for(table);
                for (std::size_t i = 0; i < saved.size(); ++i) {
                  const std::size_t base =
                      static_cast<std::size_t>(saved[i]) * width;
                  for (std::size_t c = 0; c < width; ++c) {
                    (*gt)[base + c] += g[i * width + c];
                  }
                }
              });
}

Var softmax_rows(Var x) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = xv.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return emit(tape, "softmax_rows", std::move(out), tape.requires_grad(x),
              [x, rows, cols](Tape& t, const Tensor& y, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t r = 0; r < rows; ++r) {
                  const std::size_t base = r * cols;
                  double dot = 0.0;
                  for (std::size_t c = 0; c < cols; ++c) {
                    dot += g[base + c] * y[base + c];
                  }
                  for (std::size_t c = 0; c < cols; ++c) {
                    (*gx)[base + c] += y[base + c] * (g[base + c] - dot);
                  }
                }
              });
}

Var sigmoid(Var x) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) {
    // Split by sign so exp never overflows.
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return emit(tape, "sigmoid", std::move(out), tape.requires_grad(x),
              [x](Tape& t, const Tensor& y, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t i = 0; i < g.size(); ++i) {
                  (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
                }
              });
}

Var gelu(Var x) {
  Tape& tape = x.tape();
  Tensor out = x.value();
  for (double& v : out.data()) {
    const double u = kSqrt2OverPi * (v + kGeluCoeff * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(u));
  }
  return emit(tape, "gelu", std::move(out), tape.requires_grad(x),
              [x](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                const Tensor& xv = x.value();
                for (std::size_t i = 0; i < g.size(); ++i) {
                  const double v = xv[i];
                  const double u = kSqrt2OverPi * (v + kGeluCoeff * v * v * v);
                  const double th = std::tanh(u);
                  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * v * v);
                  (*gx)[i] += g[i] * (0.5 * (1.0 + th) +
                                      0.5 * v * (1.0 - th * th) * du);
                }
              });
}

Var layer_norm(Var x, Var gain, Var bias, double epsilon) {
  Tape& tape = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require(gain.value().size() == cols && bias.value().size() == cols,
          "layer_norm",
          "gain/bias " + shape_string(gain.value().shape()) + " for input " +
              shape_string(xv.shape()));
  Tensor normalized(xv.shape());
  std::vector<double> inv_std(rows);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = xv.row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * inv_std[r];
      normalized[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  const bool rg =
      tape.requires_grad(x) || tape.requires_grad(gain) || tape.requires_grad(bias);
  return emit(
      tape, "layer_norm", std::move(out), rg,
      [x, gain, bias, rows, cols, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& gv = gain.value();
        if (Tensor* gg = t.grad_for(gain)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              (*gg)[c] += g[r * cols + c] * normalized[r * cols + c];
            }
          }
        }
        if (Tensor* gb = t.grad_for(bias)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += g[r * cols + c];
          }
        }
        if (Tensor* gx = t.grad_for(x)) {
          const double n = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dh = g[r * cols + c] * gv[c];
              mean_dh += dh;
              mean_dh_h += dh * normalized[r * cols + c];
            }
            mean_dh /= n;
            mean_dh_h /= n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double dh = g[r * cols + c] * gv[c];
              (*gx)[r * cols + c] +=
                  inv_std[r] *
                  (dh - mean_dh - normalized[r * cols + c] * mean_dh_h);
            }
          }
        }
      });
}

Var dropout(Var x, double rate) {
  Tape& tape = x.tape();
  if (rate < 0.0 || rate >= 1.0) {
    fail(Errc::kInvalidArgument, "dropout: rate must lie in [0, 1)");
  }
  if (!tape.training() || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  const Tensor& xv = x.value();
  std::vector<double> mask(xv.size());
  for (double& m : mask) m = tape.rng().uniform() < keep ? 1.0 / keep : 0.0;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return emit(tape, "dropout", std::move(out), tape.requires_grad(x),
              [x, mask = std::move(mask)](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
              });
}

Var sum(Var x) {
  Tape& tape = x.tape();
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return emit(tape, "sum", Tensor({1}, std::vector<double>{total}),
              tape.requires_grad(x), [x](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (double& v : gx->data()) v += g[0];
              });
}

Var mean(Var x) {
  Tape& tape = x.tape();
  const double n = static_cast<double>(x.value().size());
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return emit(tape, "mean", Tensor({1}, std::vector<double>{total / n}),
              tape.requires_grad(x),
              [x, n](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gx = t.grad_for(x);
                for (double& v : gx->data()) v += g[0] / n;
              });
}

double bce_value(std::span<const double> probabilities,
                 std::span<const double> targets) {
  if (probabilities.size() != targets.size() || probabilities.empty()) {
    fail(Errc::kShapeMismatch, "bce: probabilities and targets differ in size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kBceEpsilon, 1.0 - kBceEpsilon);
    total -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probabilities.size());
}

Var bce_loss(Var probabilities, const Tensor& targets) {
  Tape& tape = probabilities.tape();
  const Tensor& pv = probabilities.value();
  require(pv.shape() == targets.shape(), "bce_loss",
          shape_string(pv.shape()) + " vs targets " +
              shape_string(targets.shape()));
  const double loss = bce_value(pv.data(), targets.data());
  return emit(tape, "bce_loss", Tensor({1}, std::vector<double>{loss}),
              tape.requires_grad(probabilities),
              [probabilities, targets](Tape& t, const Tensor&, const Tensor& g) {
                Tensor* gp = t.grad_for(probabilities);
                const Tensor& pv = probabilities.value();
                const double n = static_cast<double>(pv.size());
                for (std::size_t i = 0; i < pv.size(); ++i) {
                  const double p = pv[i];
                  // Clamped region has zero derivative.
                  if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;
                  const double y = targets[i];
                  (*gp)[i] += g[0] * (-y / p + (1.0 - y) / (1.0 - p)) / n;
                }
              });
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) {
    fail(Errc::kDuplicateId, "duplicate parameter name '" + name + "'");
  }
  const std::size_t index = items_.size();
  index_.emplace(name, index);
  Tensor grad = Tensor::zeros_like(value);
  items_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
  return index;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  fail(Errc::kInvalidArgument, "unknown parameter '" + std::string(name) + "'");
}

std::size_t ParameterSet::element_count() const noexcept {
  std::size_t total = 0;
  for (const Parameter& p : items_) total += p.value.size();
  return total;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : items_) p.zero_grad();
}

std::vector<Tensor> ParameterSet::gradient_buffer() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const Parameter& p : items_) out.push_back(Tensor::zeros_like(p.value));
  return out;
}

bool ParameterSet::same_values(const ParameterSet& other) const {
  if (other.items_.size() != items_.size()) return false;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Parameter& a = items_[i];
    const Parameter& b = other.items_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape()) return false;
    const auto av = a.value.data();
    const auto bv = b.value.data();
    if (!std::equal(av.begin(), av.end(), bv.begin(), [](double x, double y) {
          return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
        })) {
      return false;
    }
  }
  return true;
}

Binding::Binding(Tape& tape, const ParameterSet* params, ParameterSet* grad_owner,
                 std::vector<Tensor>* sinks)
    : tape_(&tape),
      params_(params),
      grad_owner_(grad_owner),
      sinks_(sinks),
      cache_(params->size()) {
  if (sinks_ != nullptr && sinks_->size() != params_->size()) {
    fail(Errc::kShapeMismatch, "gradient buffer does not match parameter set");
  }
}

Binding::Binding(Tape& tape, ParameterSet& params)
    : Binding(tape, &params, &params, nullptr) {}

Binding::Binding(Tape& tape, const ParameterSet& params, std::vector<Tensor>& sinks)
    : Binding(tape, &params, nullptr, &sinks) {}

Binding Binding::frozen(Tape& tape, const ParameterSet& params) {
  return Binding(tape, &params, nullptr, nullptr);
}

Var Binding::operator()(std::size_t index) {
  if (index >= params_->size()) {
    fail(Errc::kOutOfRange, "parameter index " + std::to_string(index));
  }
  if (!cache_[index]) {
    Tensor* sink = nullptr;
    if (grad_owner_ != nullptr) sink = &(*grad_owner_)[index].grad;
    if (sinks_ != nullptr) sink = &(*sinks_)[index];
    cache_[index] = tape_->leaf((*params_)[index].value, sink);
  }
  return *cache_[index];
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(ParameterSet& params, const LossBuilder& builder,
                           double tolerance, double step) {
  std::vector<Tensor> analytic = params.gradient_buffer();
  {
    Tape tape(Mode::kInference);
    Binding bind(tape, params, analytic);
    tape.backward(builder(bind));
  }

  auto evaluate = [&]() {
    Tape tape(Mode::kInference);
    Binding bind = Binding::frozen(tape, params);
    return builder(bind).value()[0];
  };

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = params[p].name;
    Tensor& value = params[p].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      const double up = evaluate();
      value[i] = saved - step;
      const double down = evaluate();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      if (i == 0 || rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.pass = entry.max_relative_error < tolerance;
    report.max_relative_error =
        std::max(report.max_relative_error, entry.max_relative_error);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hlmtc
