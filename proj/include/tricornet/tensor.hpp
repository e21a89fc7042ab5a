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
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tricornet/errors.hpp"

namespace tricornet {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of doubles. Sequence tensors are laid out T x channels.
///
/// A rank-0 tensor (empty shape) holds a single scalar. Every dimension is at
/// least one; there are no views, so copies are deep and tensors behave as values.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor vector(std::vector<double> values) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  // Matrix accessors; valid for rank-2 tensors.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_dims() const {
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

inline bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace detail

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Four dot products of `a` against consecutive rows of `b` (row stride n).
inline void dot4(const double* a, const double* b, std::size_t n, double out[4]) {
  const double* b0 = b;
  const double* b1 = b0 + n;
  const double* b2 = b1 + n;
  const double* b3 = b2 + n;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
  for (std::size_t i = 0; i < n; ++i) {
    s0 += a[i] * b0[i];
    s1 += a[i] * b1[i];
    s2 += a[i] * b2[i];
    s3 += a[i] * b3[i];
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
  out[3] = s3;
}

// C (m x n) += op(A) * B, with B row-major k x n and A either m x k (lda = k)
// or, when `at`, stored as k x m (lda = m).
inline void gemm(const double* A, bool at, std::size_t lda, const double* B, std::size_t m, std::size_t k,
                 std::size_t n, double* C) {
  const auto a_at = [&](std::size_t i, std::size_t p) { return at ? A[p * lda + i] : A[i * lda + p]; };
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    std::size_t p = 0;
    // four rows of b per pass over the output row
    for (; p + 4 <= k; p += 4) {
      const double a0 = a_at(i, p), a1 = a_at(i, p + 1), a2 = a_at(i, p + 2), a3 = a_at(i, p + 3);
      const double* b0 = B + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const double aip = a_at(i, p);
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace detail

enum class Transpose { kNo, kYes };

/// Matrix product op(a) * op(b), where op optionally transposes its argument.
inline Tensor matmul(const Tensor& a, const Tensor& b, Transpose ta = Transpose::kNo,
                     Transpose tb = Transpose::kNo) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const bool at = ta == Transpose::kYes;
  const bool bt = tb == Transpose::kYes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t k = at ? a.rows() : a.cols();
  const std::size_t kb = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) +
                     (at ? "^T" : "") + " and " + shape_str(b.shape()) + (bt ? "^T" : ""));
  }
  Tensor out({m, n});
  const double* A = a.data().data();
  double* C = out.data().data();
  const std::size_t lda = a.cols();
  // Row-times-row accumulation vectorizes; a transposed b is materialized first.
  std::vector<double> bt_copy;
  const double* B = b.data().data();
  if (bt) {
    bt_copy.resize(k * n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) bt_copy[p * n + j] = B[j * k + p];
    }
    B = bt_copy.data();
  }
  detail::gemm(A, at, lda, B, m, k, n, C);
  return out;
}

enum class BinaryOp { kAdd, kSub, kMul };

/// Pointwise a (op) b. `b` may also be a row bias (shape 1xN or N) against an MxN `a`.
inline Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op) {
  const auto apply = [op](double x, double y) {
    switch (op) {
      case BinaryOp::kAdd: return x + y;
      case BinaryOp::kSub: return x - y;
      case BinaryOp::kMul: return x * y;
    }
    return 0.0;
  };
  Tensor out = a;
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(a[i], b[i]);
    return out;
  }
  const bool row_bias = a.rank() == 2 && ((b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) ||
                                          (b.rank() == 1 && b.dim(0) == a.cols()));
  if (!row_bias) {
    throw ShapeError("elementwise: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = apply(a[r * n + c], b[c]);
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::kAdd); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::kSub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, BinaryOp::kMul); }

inline Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out = a;
  for (auto& v : out.data()) v = f(v);
  return out;
}

enum class ReduceOp { kMax, kSum, kMean };

/// Reduces along `axis`, removing it from the shape.
inline Tensor reduce(const Tensor& a, std::size_t axis, ReduceOp op) {
  if (axis >= a.rank()) {
    throw ContractError("reduce: axis " + std::to_string(axis) + " out of range for shape " +
                        shape_str(a.shape()));
  }
  const auto sp = detail::split_at(a.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != axis) out_shape.push_back(a.dim(i));
  }
  Tensor out(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      double acc = op == ReduceOp::kMax ? a[base] : 0.0;
      for (std::size_t k = 0; k < sp.len; ++k) {
        const double v = a[base + k * sp.inner];
        acc = op == ReduceOp::kMax ? std::max(acc, v) : acc + v;
      }
      if (op == ReduceOp::kMean) acc /= static_cast<double>(sp.len);
      out[o * sp.inner + in] = acc;
    }
  }
  return out;
}

inline Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  if (a.rank() != b.rank() || axis >= a.rank()) {
    throw ShapeError("concat: cannot join " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " on axis " + std::to_string(axis));
  }
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (i != axis && a.dim(i) != b.dim(i)) {
      throw ShapeError("concat: non-concat dims differ for " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    }
  }
  Shape s = a.shape();
  s[axis] += b.dim(axis);
  Tensor out(s);
  const auto sa = detail::split_at(a.shape(), axis);
  const auto sb = detail::split_at(b.shape(), axis);
  const std::size_t chunk_a = sa.len * sa.inner;
  const std::size_t chunk_b = sb.len * sb.inner;
  auto dst = out.data().begin();
  for (std::size_t o = 0; o < sa.outer; ++o) {
    dst = std::copy_n(a.data().begin() + o * chunk_a, chunk_a, dst);
    dst = std::copy_n(b.data().begin() + o * chunk_b, chunk_b, dst);
  }
  return out;
}

/// Elements [from, to) along `axis`.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t from, std::size_t to) {
  if (axis >= a.rank() || from >= to || to > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(from) + "," + std::to_string(to) +
                     ") on axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(a.shape()));
  }
  Shape s = a.shape();
  s[axis] = to - from;
  Tensor out(s);
  const auto sp = detail::split_at(a.shape(), axis);
  const std::size_t width = (to - from) * sp.inner;
  auto dst = out.data().begin();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    dst = std::copy_n(a.data().begin() + (o * sp.len + from) * sp.inner, width, dst);
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank2(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

}  // namespace tricornet
