#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"
#include "adahop/pattern.hpp"
#include "adahop/rng.hpp"
#include "adahop/strategy.hpp"

namespace adahop {

struct SynthSpec {
  std::size_t rows = 256;
  std::size_t cols = 256;
  OutlierPattern pattern = OutlierPattern::None;
  std::size_t outlier_count = 0;
  double outlier_scale = 1.0;
  std::uint64_t seed = 42;
  std::optional<double> target_kurtosis;
  /// Fixed outlier slice indices; drawn from the seed when empty.
  std::vector<std::size_t> planted;

  void validate() const {
    if (rows == 0 || cols == 0) throw InputError("synth dimensions must be positive");
    if (pattern == OutlierPattern::None && outlier_count != 0) {
      throw InputError("pattern None requires outlier_count = 0");
    }
    const std::size_t dim = pattern == OutlierPattern::Row ? rows : cols;
    if (pattern != OutlierPattern::None && outlier_count > dim) {
      throw InputError("outlier_count " + std::to_string(outlier_count) + " exceeds dimension " + std::to_string(dim));
    }
    if (!(outlier_scale >= 1.0)) throw InputError("outlier_scale must be >= 1");
    if (!planted.empty()) {
      if (planted.size() != outlier_count) throw InputError("planted index count differs from outlier_count");
      for (std::size_t p : planted)
        if (p >= dim) throw InputError("planted index out of range");
    }
  }
};

struct SynthTensor {
  DenseMatrix matrix;
  std::vector<std::size_t> planted;  // outlier rows (Row) or columns (Column), draw order
  double outlier_scale = 1.0;        // after kurtosis tuning, if any
};

namespace detail {

inline DenseMatrix plant(const std::vector<double>& base, const SynthSpec& spec, const std::vector<std::size_t>& idx,
                         double scale) {
  std::vector<float> data(base.size());
  for (std::size_t t = 0; t < base.size(); ++t) data[t] = static_cast<float>(base[t]);
  for (std::size_t s : idx) {
    if (spec.pattern == OutlierPattern::Row) {
      for (std::size_t j = 0; j < spec.cols; ++j) data[s * spec.cols + j] = static_cast<float>(base[s * spec.cols + j] * scale);
    } else {
      for (std::size_t i = 0; i < spec.rows; ++i) data[i * spec.cols + s] = static_cast<float>(base[i * spec.cols + s] * scale);
    }
  }
  return DenseMatrix(spec.rows, spec.cols, std::move(data));
}

}  // namespace detail

inline constexpr double kMinTunedScale = 1.0;
inline constexpr double kMaxTunedScale = 1e4;
inline constexpr int kTuningIterations = 64;

/// Base entries are iid standard normal (stream split 0 of the seed, row-major); planted
/// slices are chosen without replacement from split 1 and multiplied by the outlier scale.
/// With a kurtosis target the scale is bisected (geometrically) on [1, 1e4].
inline SynthTensor generate_tensor(const SynthSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Rng base_rng = root.split(0);
  std::vector<double> base(spec.rows * spec.cols);
  for (double& x : base) x = base_rng.normal();

  if (spec.pattern == OutlierPattern::None) {
    return {detail::plant(base, spec, {}, 1.0), {}, 1.0};
  }
  std::vector<std::size_t> idx = spec.planted;
  if (idx.empty()) {
    Rng place = root.split(1);
    idx = place.sample_without_replacement(spec.pattern == OutlierPattern::Row ? spec.rows : spec.cols,
                                           spec.outlier_count);
  }
  if (!spec.target_kurtosis) {
    return {detail::plant(base, spec, idx, spec.outlier_scale), idx, spec.outlier_scale};
  }

  const double target = *spec.target_kurtosis;
  double lo = kMinTunedScale, hi = kMaxTunedScale;
  double best_scale = lo, best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kTuningIterations; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double k = excess_kurtosis(detail::plant(base, spec, idx, mid));
    const double err = std::fabs(k - target);
    if (err < best_err) {
      best_err = err;
      best_scale = mid;
    }
    if (err <= 1e-3 * std::fabs(target)) break;
    (k < target ? lo : hi) = mid;
  }
  if (!(best_err <= 0.1 * std::fabs(target))) {
    throw TuningError("kurtosis target " + std::to_string(target) + " not reachable with " +
                      std::to_string(spec.outlier_count) + " planted slices");
  }
  return {detail::plant(base, spec, idx, best_scale), idx, best_scale};
}

inline DenseMatrix generate(const SynthSpec& spec) { return generate_tensor(spec).matrix; }

struct MatmulDims {
  std::size_t m = 256;  // rows of A
  std::size_t k = 256;  // shared
  std::size_t n = 256;  // cols of B
};

struct PairSynthOptions {
  std::size_t outlier_count = 3;
  double outlier_scale = 100.0;
  std::optional<double> target_kurtosis;
};

/// A (m×k) carries pair.left, B (k×n) carries pair.right in its own orientation.
/// Operands draw from independent seed splits, except that when both outlier sets lie on
/// the shared dimension (Column-left, Row-right) one index set is drawn and reused.
inline std::pair<SynthTensor, SynthTensor> generate_pair_tensors(const PatternPair& pair, const MatmulDims& dims,
                                                                 std::uint64_t seed,
                                                                 const PairSynthOptions& opt = {}) {
  const Rng root(seed);
  auto make = [&](OutlierPattern p, std::size_t rows, std::size_t cols, std::uint64_t s) {
    SynthSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.pattern = p;
    spec.seed = s;
    if (p != OutlierPattern::None) {
      spec.outlier_count = opt.outlier_count;
      spec.outlier_scale = opt.outlier_scale;
      spec.target_kurtosis = opt.target_kurtosis;
    }
    return spec;
  };
  SynthSpec sa = make(pair.left, dims.m, dims.k, root.split(0).key());
  SynthSpec sb = make(pair.right, dims.k, dims.n, root.split(1).key());
  if (pair.left == OutlierPattern::Column && pair.right == OutlierPattern::Row) {
    Rng shared = root.split(2);
    sa.planted = shared.sample_without_replacement(dims.k, opt.outlier_count);
    sb.planted = sa.planted;
  }
  return {generate_tensor(sa), generate_tensor(sb)};
}

inline std::pair<DenseMatrix, DenseMatrix> generate_pair(const PatternPair& pair, const MatmulDims& dims,
                                                         std::uint64_t seed, const PairSynthOptions& opt = {}) {
  auto [a, b] = generate_pair_tensors(pair, dims, seed, opt);
  return {std::move(a.matrix), std::move(b.matrix)};
}

}  // namespace adahop
