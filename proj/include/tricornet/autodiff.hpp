/*
 * Copyright 2026 The TricorNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tricornet/errors.hpp"
#include "tricornet/tensor.hpp"

// Reverse-mode differentiation on a define-by-run tape.
//
// Every differentiable op appends one node holding its value, its parents and a
// closure that pushes the node's gradient into the parents. Node ids are
// assigned in execution order, so walking ids downward is a reverse
// topological order, and gradient accumulation into shared parents happens in
// a fixed order (bit-reproducible).

namespace tricornet {

using NodeId = std::size_t;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape is alive and uncleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

using GradientMap = std::map<NodeId, Tensor>;

enum class Retain { kNo, kYes };

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, requires_grad, true, nullptr});
    auto& n = nodes_.back();
    if (requires_grad) n.grad = Tensor(n.value.shape());
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Leaf that reads `value` in place instead of copying it. The caller keeps
  /// `value` alive and unmodified until the tape is cleared or destroyed.
  Var leaf_ref(const Tensor& value, bool requires_grad = true) {
    nodes_.push_back(Node{Tensor(), {}, {}, nullptr, requires_grad, true, &value});
    auto& n = nodes_.back();
    if (requires_grad) n.grad = Tensor(value.shape());
    return Var(this, nodes_.size() - 1);
  }

  /// Appends an op result. The node needs a gradient iff any parent does.
  Var record(Tensor value, std::vector<NodeId> parents, BackwardFn backward) {
    bool rg = false;
    for (auto p : parents) rg = rg || nodes_.at(p).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, std::move(parents),
                          rg ? std::move(backward) : nullptr, rg, false, nullptr});
    auto& n = nodes_.back();
    if (rg) n.grad = Tensor(n.value.shape());
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(NodeId id) const {
    const auto& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Tensor& grad(NodeId id) const {
    const auto& n = nodes_.at(id);
    if (!n.requires_grad) throw ContractError("grad() of a node that does not require grad");
    return n.grad;
  }

  // Accumulation target for backward closures; only valid when requires_grad(id).
  Tensor& grad_ref(NodeId id) { return nodes_[id].grad; }

  void zero_grad() {
    for (auto& n : nodes_) {
      if (n.requires_grad) std::fill(n.grad.data().begin(), n.grad.data().end(), 0.0);
    }
  }

  void clear() { nodes_.clear(); }

  /// Propagates d(loss)/d(node) to every node and returns the gradients of the
  /// trainable leaves, keyed by node id. Leaves the loss does not depend on get
  /// zero gradients. The tape is cleared unless `retain` is kYes.
  GradientMap backward(Var loss, Retain retain = Retain::kNo) {
    if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    const NodeId root = loss.id();
    if (value(root).size() != 1) {
      throw ContractError("backward: loss must be a scalar, got shape " + shape_str(value(root).shape()));
    }
    zero_grad();
    GradientMap out;
    if (nodes_[root].requires_grad) {
      nodes_[root].grad[0] = 1.0;
      for (NodeId id = root + 1; id-- > 0;) {
        auto& n = nodes_[id];
        if (n.requires_grad && n.backward) n.backward(*this, id);
      }
    }
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      const auto& n = nodes_[id];
      if (n.is_leaf && n.requires_grad) out.emplace(id, n.grad);
    }
    if (retain == Retain::kNo) clear();
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodeId> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    const Tensor* external = nullptr;
  };

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline void accumulate(Tape& tape, NodeId target, const Tensor& g) {
  if (!tape.requires_grad(target)) return;
  auto dst = tape.grad_ref(target).data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

// Sums an MxN gradient down to the shape of a row bias (1xN or N).
inline Tensor reduce_to_bias(const Tensor& g, const Shape& bias_shape) {
  Tensor out(bias_shape);
  const std::size_t n = g.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out[c] += g[r * n + c];
  }
  return out;
}

template <typename F, typename DF>
Var unary(Var x, F&& f, DF&& df) {
  Tensor y = map(x.value(), f);
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, df](Tape& t, NodeId self) {
    if (!t.requires_grad(xi)) return;
    const auto& xv = t.value(xi).data();
    const auto& yv = t.value(self).data();
    const auto& g = t.grad(self).data();
    auto gx = t.grad_ref(xi).data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace detail

// ---- linear algebra ------------------------------------------------------

inline Var matmul(Var a, Var b, Transpose ta = Transpose::kNo, Transpose tb = Transpose::kNo) {
  detail::same_tape(a, b, "matmul");
  Tensor y = matmul(a.value(), b.value(), ta, tb);
  const NodeId ai = a.id(), bi = b.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi, ta, tb](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    constexpr auto N = Transpose::kNo, Y = Transpose::kYes;
    if (t.requires_grad(ai)) {
      // C = op(A) op(B): dA = G op(B)^T, or its transpose when A was transposed.
      Tensor ga = ta == N ? matmul(g, bv, N, tb == N ? Y : N) : matmul(bv, g, tb == N ? N : Y, Y);
      detail::accumulate(t, ai, ga);
    }
    if (t.requires_grad(bi)) {
      Tensor gb = tb == N ? matmul(av, g, ta == N ? Y : N, N) : matmul(g, av, Y, ta == N ? N : Y);
      detail::accumulate(t, bi, gb);
    }
  });
}

inline Var transpose(Var a) {
  const NodeId ai = a.id();
  return a.tape().record(transpose(a.value()), {ai}, [ai](Tape& t, NodeId self) {
    detail::accumulate(t, ai, transpose(t.grad(self)));
  });
}

// ---- pointwise -----------------------------------------------------------

/// a (op) b with identical shapes, or b a row bias against an MxN a.
inline Var elementwise(Var a, Var b, BinaryOp op) {
  detail::same_tape(a, b, "elementwise");
  Tensor y = elementwise(a.value(), b.value(), op);
  const NodeId ai = a.id(), bi = b.id();
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi, op](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    const bool broadcast = av.shape() != bv.shape();
    if (t.requires_grad(ai)) {
      detail::accumulate(t, ai, op == BinaryOp::kMul ? elementwise(g, bv, BinaryOp::kMul) : g);
    }
    if (t.requires_grad(bi)) {
      Tensor gb = op == BinaryOp::kMul ? mul(g, av) : (op == BinaryOp::kSub ? scale(g, -1.0) : g);
      detail::accumulate(t, bi, broadcast ? detail::reduce_to_bias(gb, bv.shape()) : gb);
    }
  });
}

inline Var add(Var a, Var b) { return elementwise(a, b, BinaryOp::kAdd); }
inline Var sub(Var a, Var b) { return elementwise(a, b, BinaryOp::kSub); }
inline Var mul(Var a, Var b) { return elementwise(a, b, BinaryOp::kMul); }

/// Multiplies by a fixed (non-differentiable) tensor of the same shape, e.g. a dropout mask.
inline Var mul_const(Var a, const Tensor& m) {
  Tensor y = mul(a.value(), m);
  const NodeId ai = a.id();
  return a.tape().record(std::move(y), {ai}, [ai, m](Tape& t, NodeId self) {
    detail::accumulate(t, ai, mul(t.grad(self), m));
  });
}

inline Var scale(Var a, double s) {
  const NodeId ai = a.id();
  return a.tape().record(scale(a.value(), s), {ai}, [ai, s](Tape& t, NodeId self) {
    detail::accumulate(t, ai, scale(t.grad(self), s));
  });
}

inline Var add_scalar(Var a, double s) {
  return detail::unary(a, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

/// x / s for a scalar (single-element) s.
inline Var div_scalar(Var x, Var s) {
  detail::same_tape(x, s, "div_scalar");
  if (s.value().size() != 1) throw ShapeError("div_scalar: divisor shape " + shape_str(s.shape()));
  const double d = s.value()[0];
  Tensor y = scale(x.value(), 1.0 / d);
  const NodeId xi = x.id(), si = s.id();
  return x.tape().record(std::move(y), {xi, si}, [xi, si](Tape& t, NodeId self) {
    const double d = t.value(si)[0];
    const Tensor& g = t.grad(self);
    if (t.requires_grad(xi)) detail::accumulate(t, xi, scale(g, 1.0 / d));
    if (t.requires_grad(si)) {
      // d(x/d)/dd = -x/d^2 = -y/d
      const Tensor& y = t.value(self);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * y[i];
      t.grad_ref(si)[0] -= acc / d;
    }
  });
}

namespace detail {

// d sigmoid / d input, written in terms of the output y.
inline double sigmoid_slope(double y) {
#ifdef TRICORNET_FAULT_INJECTION
  return 1.001 * y * (1.0 - y);
#else
  return y * (1.0 - y);
#endif
}

}  // namespace detail

inline Var sigmoid(Var x) {
  return detail::unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return detail::sigmoid_slope(y); });
}

inline Var tanh(Var x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

// Subgradient 0 at exactly 0.
inline Var relu(Var x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var log(Var x) {
  return detail::unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

// ---- reductions ----------------------------------------------------------

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const NodeId xi = x.id();
  return x.tape().record(Tensor::scalar(s), {xi}, [xi](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad_ref(xi).data()) v += g;
  });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

/// Maximum over every element; the gradient goes to the earliest maximal index.
inline Var max_all(Var x) {
  const auto& v = x.value().data();
  const std::size_t arg = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  const NodeId xi = x.id();
  return x.tape().record(Tensor::scalar(v[arg]), {xi}, [xi, arg](Tape& t, NodeId self) {
    t.grad_ref(xi)[arg] += t.grad(self)[0];
  });
}

/// Reduction along one axis. For max, ties route the gradient to the earliest index.
inline Var reduce(Var x, std::size_t axis, ReduceOp op) {
  Tensor y = reduce(x.value(), axis, op);
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, axis, op](Tape& t, NodeId self) {
    const Tensor& xv = t.value(xi);
    const Tensor& g = t.grad(self);
    const auto sp = detail::split_at(xv.shape(), axis);
    auto gx = t.grad_ref(xi).data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        const double go = g[o * sp.inner + in];
        if (op == ReduceOp::kMax) {
          std::size_t best = 0;
          for (std::size_t k = 1; k < sp.len; ++k) {
            if (xv[base + k * sp.inner] > xv[base + best * sp.inner]) best = k;
          }
          gx[base + best * sp.inner] += go;
        } else {
          const double w = op == ReduceOp::kMean ? go / static_cast<double>(sp.len) : go;
          for (std::size_t k = 0; k < sp.len; ++k) gx[base + k * sp.inner] += w;
        }
      }
    }
  });
}

// ---- structural ----------------------------------------------------------

inline Var concat(Var a, Var b, std::size_t axis) {
  detail::same_tape(a, b, "concat");
  Tensor y = concat(a.value(), b.value(), axis);
  const NodeId ai = a.id(), bi = b.id();
  const std::size_t split = a.value().dim(axis);
  return a.tape().record(std::move(y), {ai, bi}, [ai, bi, axis, split](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ai)) detail::accumulate(t, ai, slice(g, axis, 0, split));
    if (t.requires_grad(bi)) detail::accumulate(t, bi, slice(g, axis, split, g.dim(axis)));
  });
}

/// Elements [from, to) along `axis`. Backward only touches the sliced region.
inline Var slice(Var a, std::size_t axis, std::size_t from, std::size_t to) {
  Tensor y = slice(a.value(), axis, from, to);
  const NodeId ai = a.id();
  return a.tape().record(std::move(y), {ai}, [ai, axis, from, to](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const auto sp = detail::split_at(t.value(ai).shape(), axis);
    auto ga = t.grad_ref(ai).data();
    const std::size_t width = (to - from) * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const std::size_t dst = (o * sp.len + from) * sp.inner;
      for (std::size_t k = 0; k < width; ++k) ga[dst + k] += g[o * width + k];
    }
  });
}

/// Stacks 1xN rows (or rows of equal width) into a single matrix along time.
inline Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  Tape& tape = rows.front().tape();
  const std::size_t width = rows.front().value().size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  std::vector<NodeId> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) {
    if (&r.tape() != &tape || r.value().size() != width) {
      throw ShapeError("stack_rows: rows differ in width or tape");
    }
    data.insert(data.end(), r.value().data().begin(), r.value().data().end());
    ids.push_back(r.id());
  }
  Tensor y({rows.size(), width}, std::move(data));
  auto parents = ids;
  return tape.record(std::move(y), std::move(parents), [ids, width](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!t.requires_grad(ids[r])) continue;
      auto gr = t.grad_ref(ids[r]).data();
      for (std::size_t k = 0; k < width; ++k) gr[k] += g[r * width + k];
    }
  });
}

// ---- verification ----------------------------------------------------------

/// A scalar-valued function of one tensor, expressed on a tape.
using ScalarFunction = std::function<Var(Tape&, Var)>;

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

namespace detail {

inline Tensor analytic_gradient(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  Var xv = tape.leaf(x);
  Var y = f(tape, xv);
  if (y.value().size() != 1) {
    throw ContractError("finite_diff_check: function is not scalar-valued, shape " + shape_str(y.shape()));
  }
  return tape.backward(y).at(xv.id());
}

inline double fd_rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

}  // namespace detail

/// Multi-step variant. Each coordinate is tried at steps[0], steps[1], ... and
/// keeps its smallest error; later steps are skipped once the error is at or
/// below `good_enough`. A large step loses accuracy across ReLU/max kinks, a
/// small one to round-off when the gradient is tiny, so one fixed step can
/// misjudge a correct gradient.
inline FiniteDiffResult finite_diff_report(const ScalarFunction& f, const Tensor& x, std::span<const double> steps,
                                           double good_enough) {
  if (steps.empty()) throw ContractError("finite_diff_check: no step sizes");
  for (double eps : steps) {
    if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
  }
  const Tensor analytic = detail::analytic_gradient(f, x);
  const auto eval = [&f](const Tensor& at) {
    Tape tape;
    return f(tape, tape.constant(at)).value()[0];
  };
  FiniteDiffResult r;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = analytic[i];
    double best = 0.0, best_numeric = 0.0;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      probe[i] = x[i] + steps[s];
      const double up = eval(probe);
      probe[i] = x[i] - steps[s];
      const double down = eval(probe);
      probe[i] = x[i];
      const double numeric = (up - down) / (2.0 * steps[s]);
      const double err = detail::fd_rel_error(a, numeric);
      if (s == 0 || err < best) {
        best = err;
        best_numeric = numeric;
      }
      if (best <= good_enough) break;
    }
    if (i == 0 || best > r.max_rel_error) {
      r.max_rel_error = best;
      r.worst_index = i;
      r.analytic = a;
      r.numeric = best_numeric;
    }
  }
  return r;
}

/// Compares the tape gradient of `f` at `x` with central differences, coordinate
/// by coordinate. Relative error is |a - n| / max(|a|, |n|, 1e-8).
inline FiniteDiffResult finite_diff_report(const ScalarFunction& f, const Tensor& x, double eps) {
  const double steps[] = {eps};
  return finite_diff_report(f, x, steps, 0.0);
}

inline double finite_diff_check(const ScalarFunction& f, const Tensor& x, double eps) {
  return finite_diff_report(f, x, eps).max_rel_error;
}

}  // namespace tricornet
