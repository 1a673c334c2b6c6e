#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/hadamard.hpp"
#include "adahop/matrix.hpp"
#include "adahop/mxfp4.hpp"
#include "adahop/pattern.hpp"

namespace adahop {

/// Which of a linear layer's three products an operand pair feeds.
enum class MatmulPath { Fwd, GradW, GradX };

inline std::string_view path_name(MatmulPath p) noexcept {
  switch (p) {
    case MatmulPath::Fwd: return "fwd";
    case MatmulPath::GradW: return "gw";
    case MatmulPath::GradX: return "gx";
  }
  return "?";
}

inline MatmulPath parse_path(std::string_view s) {
  if (s == "fwd") return MatmulPath::Fwd;
  if (s == "gw") return MatmulPath::GradW;
  if (s == "gx") return MatmulPath::GradX;
  throw InputError("unknown matmul path '" + std::string(s) + "'");
}

struct PatternPair {
  OutlierPattern left = OutlierPattern::None;
  OutlierPattern right = OutlierPattern::None;
  MatmulPath path = MatmulPath::Fwd;

  std::string code() const { return {pattern_char(left), pattern_char(right)}; }

  friend bool operator==(const PatternPair&, const PatternPair&) = default;
};

/// The nine pairs in the order RR, RN, RC, NR, NN, NC, CR, CN, CC.
inline std::vector<PatternPair> all_pattern_pairs() {
  static constexpr std::array<OutlierPattern, 3> order{OutlierPattern::Row, OutlierPattern::None,
                                                       OutlierPattern::Column};
  std::vector<PatternPair> out;
  for (auto l : order)
    for (auto r : order) out.push_back({l, r, MatmulPath::Fwd});
  return out;
}

inline PatternPair parse_pair(std::string_view code, MatmulPath path = MatmulPath::Fwd) {
  if (code.size() != 2) throw InputError("pattern pair must be two letters, got '" + std::string(code) + "'");
  return {parse_pattern(code.substr(0, 1)), parse_pattern(code.substr(1, 1)), path};
}

enum class StrategyKind { IHT, OELeftIHT, OERightIHT, FullPrecision, OHTReference };

inline std::string_view strategy_name(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::IHT: return "IHT";
    case StrategyKind::OELeftIHT: return "OE_LEFT_IHT";
    case StrategyKind::OERightIHT: return "OE_RIGHT_IHT";
    case StrategyKind::FullPrecision: return "FULL_PRECISION";
    case StrategyKind::OHTReference: return "OHT_REFERENCE";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view s) {
  for (auto k : {StrategyKind::IHT, StrategyKind::OELeftIHT, StrategyKind::OERightIHT, StrategyKind::FullPrecision,
                 StrategyKind::OHTReference})
    if (strategy_name(k) == s) return k;
  throw InputError("unknown strategy '" + std::string(s) + "'");
}

inline constexpr std::size_t kDefaultExtract = 64;
inline constexpr std::size_t kDefaultProbe = 64;

struct Strategy {
  StrategyKind kind = StrategyKind::IHT;
  std::size_t k_extract = kDefaultExtract;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

enum class Level { Lv1, Lv2 };

inline std::string_view level_name(Level l) noexcept { return l == Level::Lv1 ? "Lv1" : "Lv2"; }

inline Level parse_level(std::string_view s) {
  if (s == "Lv1" || s == "lv1") return Level::Lv1;
  if (s == "Lv2" || s == "lv2") return Level::Lv2;
  throw InputError("unknown level '" + std::string(s) + "'");
}

/// Strategy table. OHTReference is never produced here.
inline Strategy strategy_for_pair(const PatternPair& pair, Level level, std::size_t k_extract = kDefaultExtract) {
  using P = OutlierPattern;
  StrategyKind kind = StrategyKind::IHT;
  if (pair.left == P::Row && (pair.right == P::None || pair.right == P::Row)) {
    kind = StrategyKind::OELeftIHT;
  } else if (pair.right == P::Column) {
    if (pair.left == P::Column && level == Level::Lv2) {
      kind = StrategyKind::FullPrecision;
    } else {
      kind = StrategyKind::OERightIHT;
    }
  }
  return {kind, k_extract};
}

struct PlanAssignment {
  std::string layer;
  PatternPair pair;
  Strategy strategy;
};

struct StrategyPlan {
  Level level = Level::Lv1;
  std::vector<PlanAssignment> assignments;

  /// Null when no assignment matches.
  const PlanAssignment* find(std::string_view layer, MatmulPath path) const {
    for (const auto& a : assignments)
      if (a.layer == layer && a.pair.path == path) return &a;
    return nullptr;
  }
};

enum class ExtractAxis { Rows, Cols };

/// Parameters shared by every strategy execution.
struct EngineConfig {
  HadamardConfig hadamard{};
  std::size_t k_extract = kDefaultExtract;
  std::size_t probe = kDefaultProbe;
  Quantizer quantizer = Quantizer::mxfp4();
};

/// Top-k rows (or columns) ranked by the population variance of their first `probe`
/// entries; ties go to the lower index. k and probe are clamped to the matrix.
/// Returned in rank order, highest variance first.
inline std::vector<std::size_t> foid_indices(const DenseMatrix& a, ExtractAxis axis, std::size_t k,
                                             std::size_t probe = kDefaultProbe) {
  const std::size_t count = axis == ExtractAxis::Rows ? a.rows() : a.cols();
  const std::size_t length = axis == ExtractAxis::Rows ? a.cols() : a.rows();
  const std::size_t len = std::min(std::max<std::size_t>(probe, 1), length);
  std::vector<double> var(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto at = [&](std::size_t t) -> double { return axis == ExtractAxis::Rows ? a(s, t) : a(t, s); };
    double mean = 0.0;
    for (std::size_t t = 0; t < len; ++t) mean += at(t);
    mean /= static_cast<double>(len);
    double v = 0.0;
    for (std::size_t t = 0; t < len; ++t) v += (at(t) - mean) * (at(t) - mean);
    var[s] = v / static_cast<double>(len);
  }
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, count);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t x, std::size_t y) { return var[x] > var[y] || (var[x] == var[y] && x < y); });
  idx.resize(k);
  return idx;
}

struct OEDecomposition {
  ExtractAxis axis = ExtractAxis::Rows;
  DenseMatrix residual;
  DenseMatrix outlier_part;
  std::vector<std::size_t> indices;  // strictly increasing
};

inline OEDecomposition oe_decompose(const DenseMatrix& a, ExtractAxis axis, std::size_t k,
                                    std::size_t probe = kDefaultProbe) {
  if (k == 0) throw InputError("extraction count must be at least 1");
  std::vector<std::size_t> idx = foid_indices(a, axis, k, probe);
  std::sort(idx.begin(), idx.end());
  OEDecomposition d{axis, a, DenseMatrix(a.rows(), a.cols()), std::move(idx)};
  for (std::size_t s : d.indices) {
    if (axis == ExtractAxis::Rows) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        d.outlier_part(s, j) = a(s, j);
        d.residual(s, j) = 0.0f;
      }
    } else {
      for (std::size_t i = 0; i < a.rows(); ++i) {
        d.outlier_part(i, s) = a(i, s);
        d.residual(i, s) = 0.0f;
      }
    }
  }
  return d;
}

namespace detail {

inline void check_mx_inner(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    throw ShapeError(std::string(what) + ": inner dimensions differ (" + shape_str(a) + " x " + shape_str(b) + ")");
  }
}

}  // namespace detail

/// Q(A_res·H)·Q(Hᵀ·B) + A_out·B, with the high-precision product computed on the
/// compact k×K slice and scatter-added into the extracted rows.
inline DenseMatrix oe_left_matmul(const DenseMatrix& a, const DenseMatrix& b, const EngineConfig& cfg = {}) {
  detail::check_mx_inner(a, b, "oe_left_matmul");
  const OEDecomposition d = oe_decompose(a, ExtractAxis::Rows, cfg.k_extract, cfg.probe);
  DenseMatrix out = iht_matmul(d.residual, b, cfg.hadamard, cfg.quantizer);

  DenseMatrix compact(d.indices.size(), a.cols());
  for (std::size_t r = 0; r < d.indices.size(); ++r) {
    auto src = a.row(d.indices[r]);
    std::copy(src.begin(), src.end(), compact.row(r).begin());
  }
  const DenseMatrix high = matmul_exact(compact, b);
  for (std::size_t r = 0; r < d.indices.size(); ++r) {
    auto dst = out.row(d.indices[r]);
    auto src = high.row(r);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return out;
}

/// Q(A·H)·Q(Hᵀ·B_res) + A·B_out, scattered into the extracted columns.
inline DenseMatrix oe_right_matmul(const DenseMatrix& a, const DenseMatrix& b, const EngineConfig& cfg = {}) {
  detail::check_mx_inner(a, b, "oe_right_matmul");
  const OEDecomposition d = oe_decompose(b, ExtractAxis::Cols, cfg.k_extract, cfg.probe);
  DenseMatrix out = iht_matmul(a, d.residual, cfg.hadamard, cfg.quantizer);

  DenseMatrix compact(b.rows(), d.indices.size());
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t c = 0; c < d.indices.size(); ++c) compact(i, c) = b(i, d.indices[c]);
  const DenseMatrix high = matmul_exact(a, compact);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t c = 0; c < d.indices.size(); ++c) out(i, d.indices[c]) += high(i, c);
  return out;
}

inline DenseMatrix execute(const DenseMatrix& a, const DenseMatrix& b, const Strategy& strategy,
                           const EngineConfig& cfg = {}) {
  EngineConfig local = cfg;
  local.k_extract = strategy.k_extract;
  switch (strategy.kind) {
    case StrategyKind::FullPrecision: return matmul_exact(a, b);
    case StrategyKind::IHT: return iht_matmul(a, b, cfg.hadamard, cfg.quantizer);
    case StrategyKind::OELeftIHT: return oe_left_matmul(a, b, local);
    case StrategyKind::OERightIHT: return oe_right_matmul(a, b, local);
    case StrategyKind::OHTReference: return oht_matmul(a, b, cfg.hadamard, cfg.quantizer);
  }
  throw InputError("unknown strategy");
}

}  // namespace adahop
