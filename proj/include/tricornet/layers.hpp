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
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tricornet/autodiff.hpp"
#include "tricornet/errors.hpp"
#include "tricornet/tensor.hpp"

namespace tricornet {

using Rng = std::mt19937_64;

inline constexpr double kNormReluEpsilon = 1e-5;

// Parameter blocks are templated on the storage type: Tensor for the values a
// model owns, Var for the same values bound onto a tape for one forward pass.
// `visit` enumerates the fields with stable names.

/// Temporal convolution weights: kernels F x C_in x L, bias F.
template <typename T>
struct Conv1DParamsT {
  T kernels;
  T bias;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("kernels", self.kernels);
    f("bias", self.bias);
  }
};

/// One LSTM direction: input weights H x d_in, recurrent weights H x H, biases H.
template <typename T>
struct LSTMParamsT {
  T w_xi, w_xf, w_xo, w_xc;
  T w_hi, w_hf, w_ho, w_hc;
  T b_i, b_f, b_o, b_c;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_xi", self.w_xi);
    f("W_xf", self.w_xf);
    f("W_xo", self.w_xo);
    f("W_xc", self.w_xc);
    f("W_hi", self.w_hi);
    f("W_hf", self.w_hf);
    f("W_ho", self.w_ho);
    f("W_hc", self.w_hc);
    f("b_i", self.b_i);
    f("b_f", self.b_f);
    f("b_o", self.b_o);
    f("b_c", self.b_c);
  }
};

template <typename T>
struct BiLSTMParamsT {
  LSTMParamsT<T> fwd;
  LSTMParamsT<T> bwd;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    LSTMParamsT<T>::visit(self.fwd, [&](const std::string& n, auto& v) { f("fwd." + n, v); });
    LSTMParamsT<T>::visit(self.bwd, [&](const std::string& n, auto& v) { f("bwd." + n, v); });
  }
};

/// Output projection: weight c x d_in, bias c.
template <typename T>
struct DenseParamsT {
  T weight;
  T bias;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("W_d", self.weight);
    f("b_d", self.bias);
  }
};

using Conv1DParams = Conv1DParamsT<Tensor>;
using LSTMParams = LSTMParamsT<Tensor>;
using BiLSTMParams = BiLSTMParamsT<Tensor>;
using DenseParams = DenseParamsT<Tensor>;

using Conv1DVars = Conv1DParamsT<Var>;
using LSTMVars = LSTMParamsT<Var>;
using BiLSTMVars = BiLSTMParamsT<Var>;
using DenseVars = DenseParamsT<Var>;

/// Places every tensor of a parameter block on `tape` as a leaf that references
/// `params` in place; `params` must outlive the tape's use.
template <template <typename> class P>
P<Var> bind(Tape& tape, const P<Tensor>& params, bool requires_grad = false) {
  std::vector<Var> vars;
  P<Tensor>::visit(params, [&](const std::string&, const Tensor& t) {
    vars.push_back(tape.leaf_ref(t, requires_grad));
  });
  P<Var> out;
  std::size_t i = 0;
  P<Var>::visit(out, [&](const std::string&, Var& v) { v = vars[i++]; });
  return out;
}

namespace detail {

inline void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected T x C input, got " + shape_str(t.shape()));
}

inline Tensor as_row(const Tensor& v, std::size_t width, const char* what) {
  if (v.size() != width) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(width) + " values, got shape " +
                     shape_str(v.shape()));
  }
  return v.reshaped({1, width});
}

}  // namespace detail

// ---- temporal convolution -------------------------------------------------

/// Stride-1 1D convolution over time with zero "same" padding: floor(L/2) frames
/// on the left, L-1-floor(L/2) on the right, so the output keeps length T.
///   out[t][j] = b[j] + sum_{tau,ch} kernels[j][ch][tau] * x_pad[t+tau][ch]
inline Var conv1d_same(Var x, const Conv1DVars& p) {
  const Tensor& xv = x.value();
  const Tensor& kv = p.kernels.value();
  detail::require_matrix(xv, "conv1d_same");
  if (kv.rank() != 3 || p.bias.value().size() != kv.dim(0)) {
    throw ShapeError("conv1d_same: kernels " + shape_str(kv.shape()) + " / bias " +
                     shape_str(p.bias.value().shape()) + " malformed");
  }
  const std::size_t T = xv.rows(), C = xv.cols();
  const std::size_t F = kv.dim(0), L = kv.dim(2);
  if (kv.dim(1) != C) {
    throw ShapeError("conv1d_same: input has " + std::to_string(C) + " channels, kernels " +
                     shape_str(kv.shape()) + " expect " + std::to_string(kv.dim(1)));
  }
  const std::size_t left = L / 2;
  const std::size_t width = C * L;

  // patches[t][ch*L + tau] = x[t + tau - left][ch], zero outside [0, T)
  Tensor patches({T, width});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t tau = 0; tau < L; ++tau) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + tau) - static_cast<std::ptrdiff_t>(left);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t ch = 0; ch < C; ++ch) patches(t, ch * L + tau) = xv(static_cast<std::size_t>(src), ch);
    }
  }
  // out[t][j] = bias[j] + <patches row t, kernels row j>, kernels read in place as F x width
  Tensor y({T, F});
  const double* kp = kv.data().data();
  const auto b = p.bias.value().data();
  for (std::size_t t = 0; t < T; ++t) {
    const double* prow = patches.data().data() + t * width;
    std::size_t j = 0;
    for (; j + 4 <= F; j += 4) {
      double acc[4];
      detail::dot4(prow, kp + j * width, width, acc);
      for (std::size_t q = 0; q < 4; ++q) y(t, j + q) = b[j + q] + acc[q];
    }
    for (; j < F; ++j) y(t, j) = b[j] + detail::dot(prow, kp + j * width, width);
  }

  const NodeId xi = x.id(), ki = p.kernels.id(), bi = p.bias.id();
  return x.tape().record(
      std::move(y), {xi, ki, bi},
      [xi, ki, bi, patches = std::move(patches), T, C, L, left, F, width](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ki)) {
          detail::accumulate(t, ki, matmul(g, patches, Transpose::kYes, Transpose::kNo).reshaped({F, C, L}));
        }
        if (t.requires_grad(bi)) {
          auto gb = t.grad_ref(bi).data();
          for (std::size_t r = 0; r < T; ++r) {
            for (std::size_t j = 0; j < F; ++j) gb[j] += g(r, j);
          }
        }
        if (t.requires_grad(xi)) {
          Tensor dpatch({T, width});
          detail::gemm(g.data().data(), false, F, t.value(ki).data().data(), T, F, width, dpatch.data().data());
          Tensor& gx = t.grad_ref(xi);
          for (std::size_t r = 0; r < T; ++r) {
            for (std::size_t tau = 0; tau < L; ++tau) {
              const std::ptrdiff_t src =
                  static_cast<std::ptrdiff_t>(r + tau) - static_cast<std::ptrdiff_t>(left);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
              for (std::size_t ch = 0; ch < C; ++ch) {
                gx(static_cast<std::size_t>(src), ch) += dpatch(r, ch * L + tau);
              }
            }
          }
        }
      });
}

// ---- activations ------------------------------------------------------------

/// ReLU scaled by the layer's largest activation: relu(x) / (max(relu(x)) + 1e-5),
/// the max taken over every element of this sequence's T x C output.
inline Var norm_relu(Var x) {
  Var r = relu(x);
  return div_scalar(r, add_scalar(max_all(r), kNormReluEpsilon));
}

/// Row-wise softmax, computed with the row max subtracted.
inline Var softmax_rows(Var z) {
  const Tensor& zv = z.value();
  detail::require_matrix(zv, "softmax_rows");
  Tensor y = zv;
  const std::size_t n = zv.cols();
  for (std::size_t r = 0; r < zv.rows(); ++r) {
    double* row = y.data().data() + r * n;
    const double m = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += (row[k] = std::exp(row[k] - m));
    for (std::size_t k = 0; k < n; ++k) row[k] /= s;
  }
  const NodeId zi = z.id();
  return z.tape().record(std::move(y), {zi}, [zi, n](Tape& t, NodeId self) {
    const Tensor& yv = t.value(self);
    const Tensor& g = t.grad(self);
    auto gz = t.grad_ref(zi).data();
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += g(r, k) * yv(r, k);
      for (std::size_t k = 0; k < n; ++k) gz[r * n + k] += yv(r, k) * (g(r, k) - dot);
    }
  });
}

/// Per-time-step class probabilities: softmax(W_d D_t + b_d).
inline Var time_softmax_dense(Var d, const DenseVars& p) {
  const Tensor& w = p.weight.value();
  detail::require_matrix(d.value(), "time_softmax_dense");
  if (w.rank() != 2 || w.cols() != d.value().cols() || p.bias.value().size() != w.rows()) {
    throw ShapeError("time_softmax_dense: input " + shape_str(d.shape()) + " vs W_d " + shape_str(w.shape()) +
                     ", b_d " + shape_str(p.bias.shape()));
  }
  return softmax_rows(add(matmul(d, p.weight, Transpose::kNo, Transpose::kYes), p.bias));
}

// ---- time resampling ----------------------------------------------------------

/// Width-2 max pooling over time. T must be even; ties send the gradient to the earlier frame.
inline Var max_pool_time(Var x) {
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "max_pool_time");
  const std::size_t T = xv.rows(), C = xv.cols();
  if (T % 2 != 0) throw ContractError("max_pool_time: odd time length " + std::to_string(T));
  Tensor y({T / 2, C});
  std::vector<std::size_t> arg(T / 2 * C);
  for (std::size_t t = 0; t < T / 2; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const double a = xv(2 * t, c), b = xv(2 * t + 1, c);
      const bool second = b > a;
      y(t, c) = second ? b : a;
      arg[t * C + c] = (2 * t + (second ? 1 : 0)) * C + c;
    }
  }
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, arg = std::move(arg)](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    auto gx = t.grad_ref(xi).data();
    for (std::size_t k = 0; k < arg.size(); ++k) gx[arg[k]] += g[k];
  });
}

/// Repeats every frame twice: [a, b] -> [a, a, b, b].
inline Var upsample_repeat(Var x) {
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "upsample_repeat");
  const std::size_t T = xv.rows(), C = xv.cols();
  Tensor y({2 * T, C});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) y(2 * t, c) = y(2 * t + 1, c) = xv(t, c);
  }
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, T, C](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_ref(xi);
    for (std::size_t r = 0; r < T; ++r) {
      for (std::size_t c = 0; c < C; ++c) gx(r, c) += g(2 * r, c) + g(2 * r + 1, c);
    }
  });
}

inline Var reverse_time(Var x) {
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "reverse_time");
  const std::size_t T = xv.rows(), C = xv.cols();
  Tensor y({T, C});
  for (std::size_t t = 0; t < T; ++t) {
    std::copy_n(xv.data().begin() + (T - 1 - t) * C, C, y.data().begin() + t * C);
  }
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, T, C](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_ref(xi);
    for (std::size_t r = 0; r < T; ++r) {
      for (std::size_t c = 0; c < C; ++c) gx(T - 1 - r, c) += g(r, c);
    }
  });
}

/// Extends the time axis to `length` frames by repeating the last frame.
inline Var pad_time_repeat_last(Var x, std::size_t length) {
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "pad_time_repeat_last");
  const std::size_t T = xv.rows(), C = xv.cols();
  if (length < T) throw ContractError("pad_time_repeat_last: target shorter than input");
  if (length == T) return x;
  Tensor y({length, C});
  for (std::size_t t = 0; t < length; ++t) {
    std::copy_n(xv.data().begin() + std::min(t, T - 1) * C, C, y.data().begin() + t * C);
  }
  const NodeId xi = x.id();
  return x.tape().record(std::move(y), {xi}, [xi, T, C, length](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_ref(xi);
    for (std::size_t r = 0; r < length; ++r) {
      for (std::size_t c = 0; c < C; ++c) gx(std::min(r, T - 1), c) += g(r, c);
    }
  });
}

// ---- recurrent ----------------------------------------------------------------

namespace detail {

inline void check_lstm_shapes(const Tensor& xv, const LSTMVars& p) {
  require_matrix(xv, "lstm_forward");
  const std::size_t d_in = xv.cols();
  const std::size_t H = p.w_hi.value().rows();
  bool ok = true;
  LSTMVars::visit(p, [&](const std::string& name, const Var& v) {
    const Tensor& t = v.value();
    if (name[0] == 'b') {
      ok = ok && t.size() == H;
    } else {
      ok = ok && t.rank() == 2 && t.rows() == H && t.cols() == (name[1] == '_' && name[2] == 'x' ? d_in : H);
    }
  });
  if (!ok) {
    throw ShapeError("lstm_forward: parameter shapes disagree with input " + shape_str(xv.shape()) +
                     " and hidden size " + std::to_string(H));
  }
}

// Reference recurrence built from elementary tape ops. Slow (dozens of nodes per
// step) but obviously correct; tests compare the fused op against it.
inline Var lstm_forward_composed(Var x, const LSTMVars& p, const Tensor& h0, const Tensor& c0) {
  check_lstm_shapes(x.value(), p);
  const std::size_t T = x.value().rows();
  const std::size_t H = p.w_hi.value().rows();
  Tape& tape = x.tape();
  const auto project = [&](const Var& w, const Var& b) {
    return add(matmul(x, w, Transpose::kNo, Transpose::kYes), b);
  };
  const Var xi = project(p.w_xi, p.b_i);
  const Var xf = project(p.w_xf, p.b_f);
  const Var xo = project(p.w_xo, p.b_o);
  const Var xc = project(p.w_xc, p.b_c);

  Var h = tape.constant(as_row(h0, H, "lstm_forward h0"));
  Var c = tape.constant(as_row(c0, H, "lstm_forward c0"));
  const auto step = [&](const Var& proj, std::size_t t, const Var& w_h) {
    return add(slice(proj, 0, t, t + 1), matmul(h, w_h, Transpose::kNo, Transpose::kYes));
  };
  std::vector<Var> outputs;
  outputs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Var i = sigmoid(step(xi, t, p.w_hi));
    const Var f = sigmoid(step(xf, t, p.w_hf));
    const Var o = sigmoid(step(xo, t, p.w_ho));
    const Var g = tanh(step(xc, t, p.w_hc));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    outputs.push_back(h);
  }
  return stack_rows(outputs);
}


// Activations kept from the forward pass for backpropagation through time.
struct LstmCache {
  std::array<Tensor, 4> act;  // i, f, o, g per step (T x H)
  Tensor cell;                // c_t (T x H)
  Tensor h0, c0;              // initial state rows (1 x H)
};

}  // namespace detail

/// Runs one LSTM direction over x (T x d_in) and returns h_1..h_T as T x H:
///   i = sig(W_xi x + W_hi h + b_i)   f = sig(W_xf x + W_hf h + b_f)
///   o = sig(W_xo x + W_ho h + b_o)   g = tanh(W_xc x + W_hc h + b_c)
///   c' = f*c + i*g                   h' = o*tanh(c')
/// The whole recurrence is one tape node with a hand-written BPTT backward.
inline Var lstm_forward(Var x, const LSTMVars& p, const Tensor& h0, const Tensor& c0) {
  const Tensor& xv = x.value();
  detail::check_lstm_shapes(xv, p);
  const std::size_t T = xv.rows();
  const std::size_t H = p.w_hi.value().rows();
  const std::array<const Var*, 4> wx{&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc};
  const std::array<const Var*, 4> wh{&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc};
  const std::array<const Var*, 4> bs{&p.b_i, &p.b_f, &p.b_o, &p.b_c};

  auto cache = std::make_shared<detail::LstmCache>();
  cache->h0 = detail::as_row(h0, H, "lstm_forward h0");
  cache->c0 = detail::as_row(c0, H, "lstm_forward c0");
  for (std::size_t g = 0; g < 4; ++g) {
    cache->act[g] = matmul(xv, wx[g]->value(), Transpose::kNo, Transpose::kYes);
    const auto b = bs[g]->value().data();
    auto a = cache->act[g].data();
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < H; ++k) a[t * H + k] += b[k];
    }
  }
  cache->cell = Tensor({T, H});
  Tensor out({T, H});
  std::vector<double> h_prev(cache->h0.data().begin(), cache->h0.data().end());
  std::vector<double> c_prev(cache->c0.data().begin(), cache->c0.data().end());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t g = 0; g < 4; ++g) {
      const auto w = wh[g]->value().data();
      auto a = cache->act[g].data().subspan(t * H, H);
      for (std::size_t k = 0; k < H; ++k) {
        double z = a[k];
        for (std::size_t j = 0; j < H; ++j) z += w[k * H + j] * h_prev[j];
        a[k] = g == 3 ? std::tanh(z) : 1.0 / (1.0 + std::exp(-z));
      }
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double i = cache->act[0](t, k), f = cache->act[1](t, k);
      const double o = cache->act[2](t, k), g = cache->act[3](t, k);
      const double c = f * c_prev[k] + i * g;
      cache->cell(t, k) = c;
      c_prev[k] = c;
      h_prev[k] = out(t, k) = o * std::tanh(c);
    }
  }

  std::vector<NodeId> parents{x.id()};
  for (std::size_t g = 0; g < 4; ++g) parents.push_back(wx[g]->id());
  for (std::size_t g = 0; g < 4; ++g) parents.push_back(wh[g]->id());
  for (std::size_t g = 0; g < 4; ++g) parents.push_back(bs[g]->id());
  auto ids = parents;
  return x.tape().record(std::move(out), std::move(parents), [ids, cache, T, H](Tape& tp, NodeId self) {
    const Tensor& G = tp.grad(self);
    const Tensor& hs = tp.value(self);
    const auto& act = cache->act;
    std::array<Tensor, 4> da{Tensor({T, H}), Tensor({T, H}), Tensor({T, H}), Tensor({T, H})};
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t k = 0; k < H; ++k) {
        const double i = act[0](t, k), f = act[1](t, k), o = act[2](t, k), g = act[3](t, k);
        const double tc = std::tanh(cache->cell(t, k));
        const double c_prev = t > 0 ? cache->cell(t - 1, k) : cache->c0[k];
        const double dh = G(t, k) + dh_next[k];
        const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
        dc_next[k] = dc * f;
        da[0](t, k) = dc * g * detail::sigmoid_slope(i);
        da[1](t, k) = dc * c_prev * detail::sigmoid_slope(f);
        da[2](t, k) = dh * tc * detail::sigmoid_slope(o);
        da[3](t, k) = dc * i * (1.0 - g * g);
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t g = 0; g < 4; ++g) {
        const auto w = tp.value(ids[5 + g]).data();
        for (std::size_t k = 0; k < H; ++k) {
          const double a = da[g](t, k);
          for (std::size_t j = 0; j < H; ++j) dh_next[j] += a * w[k * H + j];
        }
      }
    }
    // Row t of h_prev is the state entering step t.
    Tensor h_prev({T, H});
    for (std::size_t k = 0; k < H; ++k) h_prev(0, k) = cache->h0[k];
    if (T > 1) std::copy_n(hs.data().begin(), (T - 1) * H, h_prev.data().begin() + H);
    const Tensor& xv = tp.value(ids[0]);
    const auto accumulate = [&tp](NodeId id, const Tensor& g) {
      if (!tp.requires_grad(id)) return;
      auto dst = tp.grad_ref(id).data();
      const auto src = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    for (std::size_t g = 0; g < 4; ++g) {
      accumulate(ids[1 + g], matmul(da[g], xv, Transpose::kYes, Transpose::kNo));
      accumulate(ids[5 + g], matmul(da[g], h_prev, Transpose::kYes, Transpose::kNo));
      if (tp.requires_grad(ids[9 + g])) {
        auto gb = tp.grad_ref(ids[9 + g]).data();
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t k = 0; k < H; ++k) gb[k] += da[g](t, k);
        }
      }
      if (tp.requires_grad(ids[0])) accumulate(ids[0], matmul(da[g], tp.value(ids[1 + g])));
    }
  });
}

inline Var lstm_forward(Var x, const LSTMVars& p) {
  const Tensor zero({p.w_hi.value().rows()});
  return lstm_forward(x, p, zero, zero);
}

/// Forward and backward LSTMs over time, outputs concatenated per step (T x 2H).
/// The backward direction reads the reversed sequence; its outputs are reversed
/// back so row t of both halves refers to frame t.
inline Var bilstm(Var x, const BiLSTMVars& p) {
  if (p.fwd.w_hi.value().rows() != p.bwd.w_hi.value().rows()) {
    throw ShapeError("bilstm: forward H " + std::to_string(p.fwd.w_hi.value().rows()) + " != backward H " +
                     std::to_string(p.bwd.w_hi.value().rows()));
  }
  Var forward = lstm_forward(x, p.fwd);
  Var backward = reverse_time(lstm_forward(reverse_time(x), p.bwd));
  return concat(forward, backward, 1);
}

// ---- dropout --------------------------------------------------------------------

namespace detail {

inline void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must be in [0, 1), got " + std::to_string(rate));
}

}  // namespace detail

/// Drops whole channels (one mask shared by every time step); survivors scaled by 1/(1-rate).
/// Identity when not training or rate == 0.
inline Var spatial_dropout(Var x, double rate, Rng& rng, bool training) {
  detail::check_rate(rate);
  if (!training || rate == 0.0) return x;
  const Tensor& xv = x.value();
  detail::require_matrix(xv, "spatial_dropout");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> keep(xv.cols());
  for (auto& k : keep) k = u(rng) < rate ? 0.0 : 1.0 / (1.0 - rate);
  Tensor mask(xv.shape());
  for (std::size_t t = 0; t < xv.rows(); ++t) {
    std::copy(keep.begin(), keep.end(), mask.data().begin() + t * xv.cols());
  }
  return mul_const(x, mask);
}

/// Drops independent elements; survivors scaled by 1/(1-rate). Identity when not training or rate == 0.
inline Var dropout(Var x, double rate, Rng& rng, bool training) {
  detail::check_rate(rate);
  if (!training || rate == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor mask(x.value().shape());
  for (auto& m : mask.data()) m = u(rng) < rate ? 0.0 : 1.0 / (1.0 - rate);
  return mul_const(x, mask);
}

// ---- tensor-level conveniences (no gradient) ------------------------------------

namespace detail {

template <typename F>
Tensor eval_on_scratch_tape(F&& f) {
  Tape tape;
  Tensor out = f(tape).value();
  return out;
}

}  // namespace detail

inline Tensor conv1d_same(const Tensor& x, const Conv1DParams& p) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return conv1d_same(t.constant(x), bind(t, p)); });
}
inline Tensor norm_relu(const Tensor& x) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return norm_relu(t.constant(x)); });
}
inline Tensor max_pool_time(const Tensor& x) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return max_pool_time(t.constant(x)); });
}
inline Tensor upsample_repeat(const Tensor& x) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return upsample_repeat(t.constant(x)); });
}
inline Tensor reverse_time(const Tensor& x) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return reverse_time(t.constant(x)); });
}
inline Tensor lstm_forward(const Tensor& x, const LSTMParams& p, const Tensor& h0, const Tensor& c0) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return lstm_forward(t.constant(x), bind(t, p), h0, c0); });
}
inline Tensor lstm_forward(const Tensor& x, const LSTMParams& p) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return lstm_forward(t.constant(x), bind(t, p)); });
}
inline Tensor bilstm(const Tensor& x, const BiLSTMParams& p) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return bilstm(t.constant(x), bind(t, p)); });
}
inline Tensor softmax_rows(const Tensor& z) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return softmax_rows(t.constant(z)); });
}
inline Tensor time_softmax_dense(const Tensor& d, const DenseParams& p) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return time_softmax_dense(t.constant(d), bind(t, p)); });
}
inline Tensor spatial_dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return spatial_dropout(t.constant(x), rate, rng, training); });
}
inline Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  return detail::eval_on_scratch_tape([&](Tape& t) { return dropout(t.constant(x), rate, rng, training); });
}

}  // namespace tricornet
