#include <gtest/gtest.h>

#include <sstream>

#include "adahop/analysis.hpp"
#include "oracles.hpp"

using namespace adahop;
using P = OutlierPattern;

TEST(Mse, Basics) {
  const DenseMatrix a = oracle::gaussian(16, 16, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(add(a, DenseMatrix::filled(16, 16, 0.5f)), a), 0.25, 1e-6);
  EXPECT_DOUBLE_EQ(mse(DenseMatrix::filled(4, 4, 1.5f), DenseMatrix(4, 4)), 2.25);
  const DenseMatrix b = oracle::gaussian(16, 16, 2);
  EXPECT_NEAR(mse(a, b), oracle::mse(a, b), 1e-12);
  EXPECT_THROW(mse(a, DenseMatrix(4, 4)), ShapeError);
}

TEST(Improvement, Formula) {
  EXPECT_DOUBLE_EQ(improvement_pct(4.0, 1.0), 75.0);
  EXPECT_DOUBLE_EQ(improvement_pct(4.0, 5.0), -25.0);
  EXPECT_EQ(improvement_pct(0.0, 1.0), 0.0);
}

TEST(Sweep, ShapeOfResultsAndCsv) {
  SweepConfig cfg;
  cfg.dims = {64, 64, 64};
  cfg.synth = {2, 50.0, {}};
  cfg.engine.k_extract = 8;
  cfg.engine.probe = 32;
  const auto results = sweep_pairs(cfg);
  ASSERT_EQ(results.size(), 9u);
  for (const auto& r : results) {
    EXPECT_EQ(r.per_seed.size(), 3u);
    EXPECT_NEAR(r.improvement_iht, improvement_pct(r.mse_base, r.mse_iht), 1e-9);
    EXPECT_GE(r.improvement_best, r.improvement_iht);
    if (r.table_strategy.kind == StrategyKind::IHT) {
      EXPECT_EQ(r.mse_oe, r.mse_iht);
    }
  }
  const std::string csv = sweep_csv(results);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "pair,strategy,mse_mean,mse_std,improvement_pct");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 36);
  EXPECT_EQ(sweep_csv(sweep_pairs(cfg)), csv);
}

TEST(Sweep, NeedsThreeSeeds) {
  SweepConfig cfg;
  cfg.seeds = {1, 2};
  EXPECT_THROW(sweep_pairs(cfg), InputError);
  cfg.seeds = {1, 2, 3};
  cfg.dims = {48, 64, 64};
  EXPECT_THROW(sweep_pairs(cfg), ShapeError);
}

TEST(Gamma, RowOutlierReducedFromTheLeft) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const GammaReport r = verify_gamma_reduction(256, s, P::Row);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.left_ratio, 4.0 / 256);
    EXPECT_GE(r.right_ratio, 0.25);
  }
}

TEST(Gamma, ColumnAndNone) {
  EXPECT_TRUE(verify_gamma_reduction(128, 2, P::Column).passed);
  const GammaReport n = verify_gamma_reduction(128, 2, P::None);
  EXPECT_TRUE(n.passed);
  EXPECT_GT(n.left_ratio, 0.25);
  EXPECT_THROW(verify_gamma_reduction(96, 1), InputError);
}

TEST(OeBound, PlantedRowsExtracted) {
  OeBoundConfig cfg;
  cfg.dims = {128, 128, 128};
  const OeBoundReport r = verify_oe_bound(cfg, 1);
  EXPECT_TRUE(r.planted_extracted);
  EXPECT_GT(r.gamma, 50.0);
  EXPECT_LT(r.gamma_residual, r.gamma);
  EXPECT_LT(r.mse_oe, r.mse_iht);
}

TEST(OeBound, ExtractingEverythingLeavesNoError) {
  OeBoundConfig cfg;
  cfg.dims = {64, 64, 64};
  cfg.engine.k_extract = 64;
  const OeBoundReport r = verify_oe_bound(cfg, 2);
  EXPECT_EQ(r.gamma_residual, 0.0);
  EXPECT_LT(r.mse_oe, 1e-10);
}

TEST(OeBound, NoPlantedRowsScalesIhtErrorByKeptFraction) {
  // Without outliers, extracting k of m rows removes roughly k/m of the quantization error.
  OeBoundConfig cfg;
  cfg.planted_rows = 0;
  double ratio = 0;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const OeBoundReport r = verify_oe_bound(cfg, s);
    ratio += r.mse_oe / r.mse_iht / 3;
  }
  EXPECT_NEAR(ratio, (256.0 - 64.0) / 256.0, 0.05);
}

TEST(Stability, Fractions) {
  EXPECT_DOUBLE_EQ(stability_of("t", std::vector<P>(30, P::Row)).stability, 1.0);
  std::vector<P> v(29, P::Column);
  v.push_back(P::None);
  const StabilityRow r = stability_of("t", v);
  EXPECT_EQ(r.modal, P::Column);
  EXPECT_NEAR(r.stability, 29.0 / 30.0, 1e-15);
  EXPECT_THROW(stability_of("t", {}), InputError);
}

TEST(Stability, TrackAndCsv) {
  std::map<std::string, std::vector<DenseMatrix>> streams;
  for (std::uint64_t s = 0; s < 4; ++s) streams["b"].push_back(oracle::gaussian(32, 32, s));
  streams["a"] = streams["b"];
  const auto rows = track_stability(streams, {}, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].tensor_id, "a");
  EXPECT_EQ(rows[0].patterns.size(), 3u);
  EXPECT_EQ(rows[0].modal, P::None);
  const std::string csv = stability_csv(rows, 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n', 20) + 1), "tensor,step,pattern\na,1,N\n");
  EXPECT_THROW(track_stability(streams, {}, 4), InputError);
  EXPECT_THROW(track_stability({}), InputError);
}

TEST(Format, Numbers) {
  EXPECT_EQ(format_number(0.25), "0.25");
  EXPECT_EQ(format_number(1e-20), "1e-20");
}
