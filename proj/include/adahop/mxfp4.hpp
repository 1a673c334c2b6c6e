#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"

namespace adahop {

inline constexpr std::size_t kMxBlock = 32;

/// E2M1 magnitudes indexed by the low three bits of a code. Bit 3 is the sign.
inline constexpr std::array<float, 8> kE2M1Values{0.0f, 0.5f, 1.0f, 1.5f, 2.0f, 3.0f, 4.0f, 6.0f};

inline constexpr int kMinScaleExp = -127;
inline constexpr int kMaxScaleExp = 127;

/// Which dimension the 32-element blocks run along.
/// AlongCols: each block is 32 consecutive entries of one row (left operand of A·B).
/// AlongRows: each block is 32 consecutive entries of one column (right operand).
enum class BlockAxis { AlongRows, AlongCols };

inline float decode_e2m1(std::uint8_t code) noexcept {
  const float mag = kE2M1Values[code & 0x7u];
  return (code & 0x8u) ? -mag : mag;
}

/// Nearest E2M1 magnitude index for a non-negative scaled value, ties to the even index.
/// Values past 6 saturate to 6.
inline std::uint8_t nearest_e2m1_index(double scaled) noexcept {
  // Midpoints between consecutive codebook values; at a midpoint the even index wins.
  static constexpr std::array<double, 7> kMid{0.25, 0.75, 1.25, 1.75, 2.5, 3.5, 5.0};
  std::uint8_t idx = 0;
  while (idx < kMid.size() && scaled > kMid[idx]) ++idx;
  if (idx < kMid.size() && scaled == kMid[idx] && (idx % 2 == 1)) ++idx;
  return idx;
}

/// Shared block exponent: floor(log2(amax)) - 2 clamped to [-127, 127]; 0 for an all-zero block.
inline int block_scale_exponent(double amax) noexcept {
  if (amax == 0.0) return 0;
  int exp2 = 0;
  std::frexp(amax, &exp2);  // amax = f * 2^exp2, f in [0.5, 1)
  const int e = (exp2 - 1) - 2;
  return std::clamp(e, kMinScaleExp, kMaxScaleExp);
}

class MxfpTensor {
 public:
  MxfpTensor(std::size_t rows, std::size_t cols, BlockAxis axis)
      : rows_(rows), cols_(cols), axis_(axis), codes_((rows * cols + 1) / 2, 0), scales_(rows * cols / kMxBlock, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  BlockAxis block_axis() const noexcept { return axis_; }
  std::size_t block_count() const noexcept { return scales_.size(); }

  std::uint8_t code(std::size_t i, std::size_t j) const noexcept {
    const std::size_t flat = i * cols_ + j;
    const std::uint8_t byte = codes_[flat / 2];
    return (flat % 2 == 0) ? (byte & 0x0Fu) : (byte >> 4);
  }

  void set_code(std::size_t i, std::size_t j, std::uint8_t c) noexcept {
    const std::size_t flat = i * cols_ + j;
    std::uint8_t& byte = codes_[flat / 2];
    byte = (flat % 2 == 0) ? std::uint8_t((byte & 0xF0u) | (c & 0x0Fu)) : std::uint8_t((byte & 0x0Fu) | (c << 4));
  }

  std::size_t block_index(std::size_t i, std::size_t j) const noexcept {
    return axis_ == BlockAxis::AlongCols ? i * (cols_ / kMxBlock) + j / kMxBlock : (i / kMxBlock) * cols_ + j;
  }

  std::int8_t scale(std::size_t i, std::size_t j) const noexcept { return scales_[block_index(i, j)]; }
  void set_scale(std::size_t block, std::int8_t e) noexcept { scales_[block] = e; }

  const std::vector<std::uint8_t>& packed_codes() const noexcept { return codes_; }
  const std::vector<std::int8_t>& scales() const noexcept { return scales_; }

  float value(std::size_t i, std::size_t j) const noexcept {
    return std::ldexp(decode_e2m1(code(i, j)), scale(i, j));
  }

 private:
  std::size_t rows_, cols_;
  BlockAxis axis_;
  std::vector<std::uint8_t> codes_;
  std::vector<std::int8_t> scales_;
};

namespace detail {

template <class Get, class Put>
void quantize_block(Get get, Put put, std::size_t len, MxfpTensor& q, std::size_t block) {
  double amax = 0.0;
  for (std::size_t t = 0; t < len; ++t) amax = std::max(amax, std::fabs(static_cast<double>(get(t))));
  const int e = block_scale_exponent(amax);
  q.set_scale(block, static_cast<std::int8_t>(e));
  for (std::size_t t = 0; t < len; ++t) {
    const double x = get(t);
    const std::uint8_t mag = nearest_e2m1_index(std::ldexp(std::fabs(x), -e));
    // Negative zero keeps a clear sign bit so that zero blocks are all-zero codes.
    const std::uint8_t sign = (x < 0.0 && mag != 0) ? 0x8u : 0x0u;
    put(t, std::uint8_t(sign | mag));
  }
}

}  // namespace detail

inline MxfpTensor quantize(const DenseMatrix& a, BlockAxis axis) {
  const std::size_t len = axis == BlockAxis::AlongCols ? a.cols() : a.rows();
  if (len % kMxBlock != 0) {
    throw ShapeError("quantize: block axis length " + std::to_string(len) + " not divisible by 32");
  }
  for (float v : a.data()) {
    if (std::isnan(v)) throw InputError("quantize: NaN input");
  }
  MxfpTensor q(a.rows(), a.cols(), axis);
  if (axis == BlockAxis::AlongCols) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t jb = 0; jb < a.cols(); jb += kMxBlock) {
        detail::quantize_block([&](std::size_t t) { return a(i, jb + t); },
                               [&](std::size_t t, std::uint8_t c) { q.set_code(i, jb + t, c); }, kMxBlock, q,
                               q.block_index(i, jb));
      }
    }
  } else {
    for (std::size_t ib = 0; ib < a.rows(); ib += kMxBlock) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        detail::quantize_block([&](std::size_t t) { return a(ib + t, j); },
                               [&](std::size_t t, std::uint8_t c) { q.set_code(ib + t, j, c); }, kMxBlock, q,
                               q.block_index(ib, j));
      }
    }
  }
  return q;
}

inline DenseMatrix dequantize(const MxfpTensor& q) {
  DenseMatrix out(q.rows(), q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < q.cols(); ++j) out(i, j) = q.value(i, j);
  return out;
}

/// dequantize(quantize(a, axis)) without materializing codes. Bitwise identical to the
/// packed round trip.
inline DenseMatrix fake_quantize(const DenseMatrix& a, BlockAxis axis) {
  const std::size_t len = axis == BlockAxis::AlongCols ? a.cols() : a.rows();
  if (len % kMxBlock != 0) {
    throw ShapeError("quantize: block axis length " + std::to_string(len) + " not divisible by 32");
  }
  DenseMatrix out(a.rows(), a.cols());
  const std::size_t outer = axis == BlockAxis::AlongCols ? a.rows() : a.cols();
  const std::size_t stride = axis == BlockAxis::AlongCols ? 1 : a.cols();
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t b = 0; b < len; b += kMxBlock) {
      const std::size_t base = axis == BlockAxis::AlongCols ? o * a.cols() + b : b * a.cols() + o;
      double amax = 0.0;
      for (std::size_t t = 0; t < kMxBlock; ++t) {
        const float v = src[base + t * stride];
        if (std::isnan(v)) throw InputError("quantize: NaN input");
        amax = std::max(amax, std::fabs(static_cast<double>(v)));
      }
      const int e = block_scale_exponent(amax);
      const double down = std::ldexp(1.0, -e), up = std::ldexp(1.0, e);
      for (std::size_t t = 0; t < kMxBlock; ++t) {
        const float v = src[base + t * stride];
        const double mag = kE2M1Values[nearest_e2m1_index(std::fabs(static_cast<double>(v)) * down)] * up;
        dst[base + t * stride] = static_cast<float>(v < 0.0f && mag != 0.0 ? -mag : mag);
      }
    }
  }
  return out;
}

/// Operand quantizer used by every low-precision path. `Identity` passes operands
/// through unchanged so transform and decomposition exactness can be checked.
struct Quantizer {
  enum class Kind { Mxfp4, Identity };
  Kind kind = Kind::Mxfp4;

  static constexpr Quantizer mxfp4() { return {Kind::Mxfp4}; }
  static constexpr Quantizer identity() { return {Kind::Identity}; }

  DenseMatrix operator()(const DenseMatrix& a, BlockAxis axis) const {
    if (kind == Kind::Identity) return a;
    return fake_quantize(a, axis);
  }
};

/// Q(A)·Q(B) with both operands blocked along the shared dimension.
inline DenseMatrix matmul_quantized(const DenseMatrix& a, const DenseMatrix& b, Quantizer quantizer = Quantizer::mxfp4()) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul_quantized: inner dimensions differ (" + shape_str(a) + " x " + shape_str(b) + ")");
  }
  if (quantizer.kind == Quantizer::Kind::Mxfp4 && a.cols() % kMxBlock != 0) {
    throw ShapeError("matmul_quantized: shared dimension " + std::to_string(a.cols()) + " not divisible by 32");
  }
  return matmul_exact(quantizer(a, BlockAxis::AlongCols), quantizer(b, BlockAxis::AlongRows));
}

/// Largest per-block relative error max|x - dq(x)| / amax over a sample; the measured
/// stand-in for the format constant ε_quant.
inline double measured_quant_epsilon(const DenseMatrix& a, BlockAxis axis) {
  const MxfpTensor q = quantize(a, axis);
  std::vector<double> amax(q.block_count(), 0.0), err(q.block_count(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const std::size_t b = q.block_index(i, j);
      amax[b] = std::max(amax[b], std::fabs(static_cast<double>(a(i, j))));
      err[b] = std::max(err[b], std::fabs(static_cast<double>(a(i, j)) - q.value(i, j)));
    }
  }
  double eps = 0.0;
  for (std::size_t b = 0; b < amax.size(); ++b)
    if (amax[b] > 0.0) eps = std::max(eps, err[b] / amax[b]);
  return eps;
}

}  // namespace adahop
