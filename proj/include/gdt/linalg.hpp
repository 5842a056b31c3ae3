#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gdt/error.hpp"

namespace gdt {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeError("matrix entry count " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

// Four independent partial sums in a fixed order: vectorizable, still deterministic.
inline double dot_unchecked(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

inline double dot(ConstSpan a, ConstSpan b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return detail::dot_unchecked(a.data(), b.data(), a.size());
}

inline double norm(ConstSpan a) { return std::sqrt(dot(a, a)); }

inline double euclidean_distance(ConstSpan a, ConstSpan b) {
  if (a.size() != b.size()) throw ShapeError("distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// out = m * x
inline void matvec(const Matrix& m, ConstSpan x, std::span<double> out) {
  if (x.size() != m.cols() || out.size() != m.rows()) throw ShapeError("matvec: shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = detail::dot_unchecked(m.row(r).data(), x.data(), m.cols());
}

inline Vector matvec(const Matrix& m, ConstSpan x) {
  Vector out(m.rows());
  matvec(m, x, out);
  return out;
}

/// out = m^T * x
inline Vector matvec_transposed(const Matrix& m, ConstSpan x) {
  if (x.size() != m.rows()) throw ShapeError("matvec_transposed: shape mismatch");
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const ConstSpan row = m.row(r);
    const double xr = x[r];
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * xr;
  }
  return out;
}

/// m += scale * a b^T
inline void add_outer(Matrix& m, ConstSpan a, ConstSpan b, double scale = 1.0) {
  if (a.size() != m.rows() || b.size() != m.cols()) throw ShapeError("add_outer: shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    std::span<double> row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
  }
}

/// y += scale * x
inline void axpy(double scale, ConstSpan x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

inline bool all_finite(ConstSpan a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace gdt
