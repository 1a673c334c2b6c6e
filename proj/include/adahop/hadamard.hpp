#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"
#include "adahop/mxfp4.hpp"

namespace adahop {

struct HadamardConfig {
  std::size_t block_size = 32;

  void validate() const {
    if (block_size < 2 || (block_size & (block_size - 1)) != 0) {
      throw InputError("hadamard block size must be a power of two >= 2, got " + std::to_string(block_size));
    }
  }
};

/// In-place normalized Walsh-Hadamard transform (Sylvester ordering) of a power-of-two vector.
/// The butterfly order is fixed, so results are bitwise reproducible.
inline void fwht_normalized(std::span<double> v) {
  const std::size_t n = v.size();
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double x = v[j];
        const double y = v[j + h];
        v[j] = x + y;
        v[j + h] = x - y;
      }
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : v) x *= norm;
}

/// A·H: each run of `block_size` columns in every row is replaced by its transform.
inline DenseMatrix fwht_rows(const DenseMatrix& a, const HadamardConfig& cfg = {}) {
  cfg.validate();
  const std::size_t bs = cfg.block_size;
  if (a.cols() % bs != 0) {
    throw ShapeError("fwht_rows: " + std::to_string(a.cols()) + " columns not divisible by block " + std::to_string(bs));
  }
  DenseMatrix out(a.rows(), a.cols());
  std::vector<double> buf(bs);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += bs) {
      for (std::size_t t = 0; t < bs; ++t) buf[t] = a(i, j0 + t);
      fwht_normalized(buf);
      for (std::size_t t = 0; t < bs; ++t) out(i, j0 + t) = static_cast<float>(buf[t]);
    }
  }
  return out;
}

/// H·A: each run of `block_size` rows in every column is replaced by its transform.
inline DenseMatrix fwht_cols(const DenseMatrix& a, const HadamardConfig& cfg = {}) {
  cfg.validate();
  const std::size_t bs = cfg.block_size;
  if (a.rows() % bs != 0) {
    throw ShapeError("fwht_cols: " + std::to_string(a.rows()) + " rows not divisible by block " + std::to_string(bs));
  }
  DenseMatrix out(a.rows(), a.cols());
  std::vector<double> buf(bs);
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += bs) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      for (std::size_t t = 0; t < bs; ++t) buf[t] = a(i0 + t, j);
      fwht_normalized(buf);
      for (std::size_t t = 0; t < bs; ++t) out(i0 + t, j) = static_cast<float>(buf[t]);
    }
  }
  return out;
}

namespace detail {

inline void check_inner(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    throw ShapeError(std::string(what) + ": inner dimensions differ (" + shape_str(a) + " x " + shape_str(b) + ")");
  }
}

}  // namespace detail

/// Inner transform: Q(A·H_k) · Q(H_kᵀ·B).
inline DenseMatrix iht_matmul(const DenseMatrix& a, const DenseMatrix& b, const HadamardConfig& cfg = {},
                              Quantizer quantizer = Quantizer::mxfp4()) {
  cfg.validate();
  detail::check_inner(a, b, "iht_matmul");
  const std::size_t need =
      quantizer.kind == Quantizer::Kind::Mxfp4 ? std::lcm(kMxBlock, cfg.block_size) : cfg.block_size;
  if (a.cols() % need != 0) {
    throw ShapeError("iht_matmul: shared dimension " + std::to_string(a.cols()) + " not divisible by " +
                     std::to_string(need));
  }
  return matmul_quantized(fwht_rows(a, cfg), fwht_cols(b, cfg), quantizer);
}

/// Outer transform reference: H_mᵀ·(Q(H_m·A) · Q(B·H_n))·H_n, blockwise on both outer dims.
inline DenseMatrix oht_matmul(const DenseMatrix& a, const DenseMatrix& b, const HadamardConfig& cfg = {},
                              Quantizer quantizer = Quantizer::mxfp4()) {
  cfg.validate();
  detail::check_inner(a, b, "oht_matmul");
  if (a.rows() % cfg.block_size != 0 || b.cols() % cfg.block_size != 0) {
    throw ShapeError("oht_matmul: outer dimensions " + std::to_string(a.rows()) + "," + std::to_string(b.cols()) +
                     " not divisible by block " + std::to_string(cfg.block_size));
  }
  const DenseMatrix mixed = matmul_quantized(fwht_cols(a, cfg), fwht_rows(b, cfg), quantizer);
  // The normalized Sylvester matrix is symmetric and involutory, so the same transforms undo the mixing.
  return fwht_rows(fwht_cols(mixed, cfg), cfg);
}

}  // namespace adahop
