#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/hadamard.hpp"
#include "adahop/matrix.hpp"
#include "adahop/mxfp4.hpp"
#include "adahop/pattern.hpp"
#include "adahop/rng.hpp"
#include "adahop/strategy.hpp"
#include "adahop/synth.hpp"

namespace adahop {

/// Mean squared entrywise difference, accumulated in double.
inline double mse(const DenseMatrix& approx, const DenseMatrix& exact) {
  if (!approx.same_shape(exact)) throw ShapeError("mse: " + shape_str(approx) + " vs " + shape_str(exact));
  double s = 0.0;
  auto x = approx.data();
  auto y = exact.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

/// (base - other) * 100 / base.
inline double improvement_pct(double base, double other) noexcept {
  return base == 0.0 ? 0.0 : (base - other) * 100.0 / base;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Pattern-pair sweep

inline constexpr double kReferenceKurtosis = 225.95;

struct SweepConfig {
  MatmulDims dims{};
  std::vector<std::uint64_t> seeds{42, 43, 44};
  PairSynthOptions synth{2, 100.0, kReferenceKurtosis};
  EngineConfig engine{};
  Level level = Level::Lv1;
};

struct SeedMse {
  std::uint64_t seed = 0;
  double base = 0.0, iht = 0.0, oht = 0.0, oe = 0.0;
};

struct PairSweepResult {
  PatternPair pair;
  Strategy table_strategy;
  double mse_base = 0.0, mse_iht = 0.0, mse_oht = 0.0, mse_oe = 0.0;
  double std_base = 0.0, std_iht = 0.0, std_oht = 0.0, std_oe = 0.0;
  double improvement_iht = 0.0;
  double improvement_best = 0.0;  // best of IHT, OHT and the table strategy
  std::size_t seeds_used = 0;
  std::vector<SeedMse> per_seed;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace detail

/// One (pair, seed) cell: plain quantized, IHT, OHT reference, and the table strategy.
inline SeedMse sweep_cell(const PatternPair& pair, std::uint64_t cell_seed, const SweepConfig& cfg) {
  const auto [a, b] = generate_pair(pair, cfg.dims, cell_seed, cfg.synth);
  const DenseMatrix exact = matmul_exact(a, b);
  const Strategy s = strategy_for_pair(pair, cfg.level, cfg.engine.k_extract);
  SeedMse out;
  out.seed = cell_seed;
  out.base = mse(matmul_quantized(a, b, cfg.engine.quantizer), exact);
  out.iht = mse(iht_matmul(a, b, cfg.engine.hadamard, cfg.engine.quantizer), exact);
  out.oht = mse(oht_matmul(a, b, cfg.engine.hadamard, cfg.engine.quantizer), exact);
  out.oe = s.kind == StrategyKind::IHT ? out.iht : mse(execute(a, b, s, cfg.engine), exact);
  return out;
}

/// Seed used for pair `pair_index` under user seed `seed`.
inline std::uint64_t sweep_cell_seed(std::uint64_t seed, std::size_t pair_index) {
  return Rng(seed).split(pair_index).key();
}

inline std::vector<PairSweepResult> sweep_pairs(const SweepConfig& cfg) {
  if (cfg.seeds.size() < 3) throw InputError("sweep needs at least 3 seeds");
  if (cfg.dims.m % kMxBlock || cfg.dims.k % kMxBlock || cfg.dims.n % kMxBlock) {
    throw ShapeError("sweep dimensions must be multiples of 32");
  }
  std::vector<PairSweepResult> results;
  const auto pairs = all_pattern_pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    PairSweepResult r;
    r.pair = pairs[p];
    r.table_strategy = strategy_for_pair(r.pair, cfg.level, cfg.engine.k_extract);
    std::vector<double> base, iht, oht, oe;
    for (std::uint64_t seed : cfg.seeds) {
      SeedMse c = sweep_cell(r.pair, sweep_cell_seed(seed, p), cfg);
      c.seed = seed;
      base.push_back(c.base);
      iht.push_back(c.iht);
      oht.push_back(c.oht);
      oe.push_back(c.oe);
      r.per_seed.push_back(c);
    }
    std::tie(r.mse_base, r.std_base) = detail::mean_std(base);
    std::tie(r.mse_iht, r.std_iht) = detail::mean_std(iht);
    std::tie(r.mse_oht, r.std_oht) = detail::mean_std(oht);
    std::tie(r.mse_oe, r.std_oe) = detail::mean_std(oe);
    r.improvement_iht = improvement_pct(r.mse_base, r.mse_iht);
    r.improvement_best = improvement_pct(r.mse_base, std::min({r.mse_iht, r.mse_oht, r.mse_oe}));
    r.seeds_used = cfg.seeds.size();
    results.push_back(std::move(r));
  }
  return results;
}

/// pair,strategy,mse_mean,mse_std,improvement_pct; four rows per pair.
inline std::string sweep_csv(const std::vector<PairSweepResult>& results) {
  std::string out = "pair,strategy,mse_mean,mse_std,improvement_pct\n";
  for (const auto& r : results) {
    const std::string pair = r.pair.code();
    auto row = [&](const char* name, double mean, double sd) {
      out += pair + "," + name + "," + format_number(mean) + "," + format_number(sd) + "," +
             format_number(improvement_pct(r.mse_base, mean)) + "\n";
    };
    row("base", r.mse_base, r.std_base);
    row("iht", r.mse_iht, r.std_iht);
    row("oht", r.mse_oht, r.std_oht);
    row("adahop", r.mse_oe, r.std_oe);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outlier-factor reduction under full-size transforms

struct GammaReport {
  OutlierPattern pattern = OutlierPattern::Row;
  std::size_t m = 0;
  double gamma = 0.0;
  double gamma_left = 0.0;   // γ(H·A)
  double gamma_right = 0.0;  // γ(A·H)
  double left_ratio = 0.0;
  double right_ratio = 0.0;
  bool passed = false;
};

/// Builds an m×m tensor with one planted outlier slice (or none) and applies an m-point
/// transform from each side. Row: left ratio <= 4/m and right ratio >= 1/4. Column: the
/// mirror. None: both ratios in [1/4, 4].
inline GammaReport verify_gamma_reduction(std::size_t m, std::uint64_t seed,
                                          OutlierPattern pattern = OutlierPattern::Row,
                                          double outlier_scale = 1000.0) {
  if (m < 64 || (m & (m - 1)) != 0) throw InputError("verify_gamma_reduction needs a power of two >= 64");
  SynthSpec spec;
  spec.rows = m;
  spec.cols = m;
  spec.pattern = pattern;
  spec.outlier_count = pattern == OutlierPattern::None ? 0 : 1;
  spec.outlier_scale = pattern == OutlierPattern::None ? 1.0 : outlier_scale;
  spec.seed = seed;
  const DenseMatrix a = generate(spec);
  const HadamardConfig full{m};

  GammaReport r;
  r.pattern = pattern;
  r.m = m;
  r.gamma = outlier_factor(a);
  r.gamma_left = outlier_factor(fwht_cols(a, full));
  r.gamma_right = outlier_factor(fwht_rows(a, full));
  r.left_ratio = r.gamma_left / r.gamma;
  r.right_ratio = r.gamma_right / r.gamma;
  const double reduced = 4.0 / static_cast<double>(m);
  switch (pattern) {
    case OutlierPattern::Row: r.passed = r.left_ratio <= reduced && r.right_ratio >= 0.25; break;
    case OutlierPattern::Column: r.passed = r.right_ratio <= reduced && r.left_ratio >= 0.25; break;
    case OutlierPattern::None:
      r.passed = r.left_ratio >= 0.25 && r.left_ratio <= 4.0 && r.right_ratio >= 0.25 && r.right_ratio <= 4.0;
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Extraction bound

struct OeBoundConfig {
  MatmulDims dims{};
  std::size_t planted_rows = 8;
  double outlier_scale = 200.0;
  EngineConfig engine{};
  double gamma_residual_limit = 10.0;
};

struct OeBoundReport {
  double gamma = 0.0;
  double gamma_residual = 0.0;
  double mse_oe = 0.0;
  double mse_iht = 0.0;
  double mse_base = 0.0;
  bool planted_extracted = false;
  bool gamma_ok = false;
  bool ordering_ok = false;
};

/// Row-outlier A against a None B: extraction + IHT vs IHT vs plain quantization.
inline OeBoundReport verify_oe_bound(const OeBoundConfig& cfg, std::uint64_t seed) {
  const Rng root(seed);
  SynthSpec sa;
  sa.rows = cfg.dims.m;
  sa.cols = cfg.dims.k;
  sa.pattern = cfg.planted_rows == 0 ? OutlierPattern::None : OutlierPattern::Row;
  sa.outlier_count = cfg.planted_rows;
  sa.outlier_scale = cfg.planted_rows == 0 ? 1.0 : cfg.outlier_scale;
  sa.seed = root.split(0).key();
  SynthSpec sb;
  sb.rows = cfg.dims.k;
  sb.cols = cfg.dims.n;
  sb.seed = root.split(1).key();

  const SynthTensor ta = generate_tensor(sa);
  const DenseMatrix b = generate(sb);
  const DenseMatrix& a = ta.matrix;
  const DenseMatrix exact = matmul_exact(a, b);
  const OEDecomposition d = oe_decompose(a, ExtractAxis::Rows, cfg.engine.k_extract, cfg.engine.probe);

  OeBoundReport r;
  r.gamma = outlier_factor(a);
  r.gamma_residual = max_abs(d.residual) == 0.0 ? 0.0 : outlier_factor(d.residual);
  r.mse_oe = mse(oe_left_matmul(a, b, cfg.engine), exact);
  r.mse_iht = mse(iht_matmul(a, b, cfg.engine.hadamard, cfg.engine.quantizer), exact);
  r.mse_base = mse(matmul_quantized(a, b, cfg.engine.quantizer), exact);
  r.planted_extracted = std::all_of(ta.planted.begin(), ta.planted.end(), [&](std::size_t p) {
    return std::binary_search(d.indices.begin(), d.indices.end(), p);
  });
  r.gamma_ok = r.gamma_residual <= cfg.gamma_residual_limit;
  r.ordering_ok = r.mse_oe < r.mse_iht && r.mse_iht < r.mse_base;
  return r;
}

// ---------------------------------------------------------------------------
// Pattern stability over a recorded stream

struct StabilityRow {
  std::string tensor_id;
  std::vector<OutlierPattern> patterns;  // after warmup
  OutlierPattern modal = OutlierPattern::None;
  double stability = 0.0;                // fraction of steps equal to the modal pattern
};

inline StabilityRow stability_of(std::string tensor_id, std::vector<OutlierPattern> patterns) {
  if (patterns.empty()) throw InputError("stability of an empty stream: " + tensor_id);
  StabilityRow row{std::move(tensor_id), std::move(patterns), OutlierPattern::None, 0.0};
  row.modal = majority_vote(row.patterns);
  const auto hits = std::count(row.patterns.begin(), row.patterns.end(), row.modal);
  row.stability = static_cast<double>(hits) / static_cast<double>(row.patterns.size());
  return row;
}

/// Per-tensor detected patterns from step `warmup` onward. Rows come out in tensor-id order.
inline std::vector<StabilityRow> track_stability(const std::map<std::string, std::vector<DenseMatrix>>& streams,
                                                 const DetectionConfig& cfg = {}, std::size_t warmup = 0) {
  if (streams.empty()) throw InputError("no streams to track");
  std::vector<StabilityRow> out;
  for (const auto& [id, stream] : streams) {
    if (stream.size() <= warmup) throw InputError("stream '" + id + "' has no steps after warmup");
    std::vector<OutlierPattern> pats;
    for (std::size_t s = warmup; s < stream.size(); ++s) pats.push_back(detect_pattern(stream[s], cfg));
    out.push_back(stability_of(id, std::move(pats)));
  }
  return out;
}

/// tensor,step,pattern rows. Steps are absolute, warmup offset included.
inline std::string stability_csv(const std::vector<StabilityRow>& rows, std::size_t warmup = 0) {
  std::string out = "tensor,step,pattern\n";
  for (const auto& r : rows)
    for (std::size_t s = 0; s < r.patterns.size(); ++s)
      out += r.tensor_id + "," + std::to_string(s + warmup) + "," + pattern_char(r.patterns[s]) + "\n";
  return out;
}

}  // namespace adahop
