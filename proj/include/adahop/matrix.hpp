#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adahop/error.hpp"

namespace adahop {

/// Row-major matrix of 32-bit floats. Every entry is finite when built from data.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(checked_size(rows, cols)) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != checked_size(rows, cols)) {
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw InputError("non-finite entry at flat index " + std::to_string(i));
      }
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
  }

  static DenseMatrix filled(std::size_t rows, std::size_t cols, float value) {
    DenseMatrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), value);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  float operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<float> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// Bitwise equality of shape and payload.
  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) return false;
    return std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), [](float x, float y) {
      return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
    });
  }

 private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    if (cols > std::size_t(-1) / rows) throw ShapeError("matrix dimensions overflow");
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

inline std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline DenseMatrix scaled(const DenseMatrix& a, float c) {
  DenseMatrix out = a;
  for (float& v : out.data()) v *= c;
  return out;
}

/// Entrywise float sum; shapes must agree.
inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw ShapeError("add: " + shape_str(a) + " vs " + shape_str(b));
  DenseMatrix out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

/// C = A·B with every dot product accumulated in double (in order of the shared index)
/// and rounded once to float.
inline DenseMatrix matmul_exact(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + shape_str(a) + " x " + shape_str(b) + ")");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  DenseMatrix c(m, n);
  std::vector<double> bd(b.data().begin(), b.data().end());
  constexpr std::size_t kRows = 4;
  std::vector<double> acc(kRows * n);
  for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
    const std::size_t rows = std::min(kRows, m - i0);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = bd.data() + p * n;
      for (std::size_t r = 0; r < rows; ++r) {
        const double aip = a(i0 + r, p);
        if (aip == 0.0) continue;
        double* dst = acc.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += aip * brow[j];
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      auto crow = c.row(i0 + r);
      for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[r * n + j]);
    }
  }
  return c;
}

inline double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (float v : a.data()) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

inline double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (float v : a.data()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

/// Outlier factor γ(A) = m·n·max|a_ij|² / ‖A‖_F². Ranges over [1, m·n].
inline double outlier_factor(const DenseMatrix& a) {
  double energy = 0.0, peak = 0.0;
  for (float v : a.data()) {
    const double d = v;
    energy += d * d;
    peak = std::max(peak, d * d);
  }
  if (energy == 0.0) throw DegenerateInputError("outlier factor of an all-zero matrix");
  return static_cast<double>(a.size()) * peak / energy;
}

/// Excess kurtosis (fourth standardized moment minus 3) of the flattened entries.
inline double excess_kurtosis(const DenseMatrix& a) {
  if (a.size() < 4) throw DegenerateInputError("kurtosis needs at least 4 entries");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (float v : a.data()) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (float v : a.data()) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) throw DegenerateInputError("kurtosis of a zero-variance matrix");
  return m4 / (m2 * m2) - 3.0;
}

struct MatrixStats {
  double gamma = 1.0;
  double kurtosis = 0.0;
  double frob_norm = 0.0;
  double max_abs = 0.0;
};

inline MatrixStats matrix_stats(const DenseMatrix& a) {
  return {outlier_factor(a), excess_kurtosis(a), frobenius_norm(a), max_abs(a)};
}

}  // namespace adahop
