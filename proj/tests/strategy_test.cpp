#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "adahop/strategy.hpp"
#include "adahop/synth.hpp"
#include "oracles.hpp"

using namespace adahop;
using P = OutlierPattern;
using K = StrategyKind;

namespace {

void expect_values_equal(const DenseMatrix& a, const DenseMatrix& b) {
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << i;
}

// Full-length variance ranking, long double.
std::vector<std::size_t> oracle_top_rows(const DenseMatrix& a, std::size_t k, std::size_t probe) {
  std::vector<std::pair<long double, std::size_t>> v;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    long double m = 0, s = 0;
    for (std::size_t j = 0; j < probe; ++j) m += a(i, j);
    m /= probe;
    for (std::size_t j = 0; j < probe; ++j) s += (a(i, j) - m) * (a(i, j) - m);
    v.push_back({-s, i});
  }
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < k; ++t) out.push_back(v[t].second);
  return out;
}

double pair_mse(const char* code, K kind, std::uint64_t seed, std::size_t k = 64) {
  auto [a, b] = generate_pair(parse_pair(code), {256, 256, 256}, seed, {2, 100.0, {}});
  return oracle::mse(execute(a, b, {kind, k}), matmul_exact(a, b));
}

}  // namespace

TEST(StrategyTable, AllEighteenEntries) {
  const std::pair<const char*, K> lv1[] = {{"RR", K::OELeftIHT}, {"RN", K::OELeftIHT},  {"RC", K::OERightIHT},
                                           {"NR", K::IHT},       {"NN", K::IHT},        {"NC", K::OERightIHT},
                                           {"CR", K::IHT},       {"CN", K::IHT},        {"CC", K::OERightIHT}};
  for (auto [code, kind] : lv1) {
    EXPECT_EQ(strategy_for_pair(parse_pair(code), Level::Lv1).kind, kind) << code;
    const K lv2 = std::string(code) == "CC" ? K::FullPrecision : kind;
    EXPECT_EQ(strategy_for_pair(parse_pair(code), Level::Lv2).kind, lv2) << code;
  }
  EXPECT_EQ(strategy_for_pair(parse_pair("RN"), Level::Lv1, 16).k_extract, 16u);
}

TEST(StrategyTable, Names) {
  for (K k : {K::IHT, K::OELeftIHT, K::OERightIHT, K::FullPrecision, K::OHTReference})
    EXPECT_EQ(parse_strategy(strategy_name(k)), k);
  EXPECT_THROW(parse_strategy("nope"), InputError);
  EXPECT_THROW(parse_pair("R"), InputError);
  EXPECT_EQ(all_pattern_pairs().size(), 9u);
  EXPECT_EQ(all_pattern_pairs().front().code(), "RR");
  EXPECT_EQ(all_pattern_pairs().back().code(), "CC");
}

TEST(Plan, Find) {
  StrategyPlan plan;
  plan.assignments.push_back({"layer0", parse_pair("RN", MatmulPath::GradW), {K::OELeftIHT, 64}});
  EXPECT_NE(plan.find("layer0", MatmulPath::GradW), nullptr);
  EXPECT_EQ(plan.find("layer0", MatmulPath::Fwd), nullptr);
  EXPECT_EQ(plan.find("layer1", MatmulPath::GradW), nullptr);
}

TEST(Foid, MatchesVarianceOracle) {
  const DenseMatrix a = oracle::gaussian(128, 96, 3, 1.0);
  DenseMatrix b = a;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    b(5, j) *= 9;
    b(77, j) *= 4;
  }
  const auto got = foid_indices(b, ExtractAxis::Rows, 10, 64);
  EXPECT_EQ(got, oracle_top_rows(b, 10, 64));
  EXPECT_EQ(got[0], 5u);
  EXPECT_EQ(got[1], 77u);
  EXPECT_EQ(foid_indices(transpose(b), ExtractAxis::Cols, 10, 64), got);
}

TEST(Foid, ClampsAndBreaksTiesLow) {
  const DenseMatrix z(8, 8);
  EXPECT_EQ(foid_indices(z, ExtractAxis::Rows, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(foid_indices(z, ExtractAxis::Cols, 100).size(), 8u);
  EXPECT_EQ(foid_indices(oracle::gaussian(8, 4, 1), ExtractAxis::Rows, 2, 1000).size(), 2u);
}

TEST(OeDecompose, PartitionsBitwise) {
  const DenseMatrix a = oracle::gaussian(64, 64, 4);
  for (auto axis : {ExtractAxis::Rows, ExtractAxis::Cols}) {
    const OEDecomposition d = oe_decompose(a, axis, 7);
    EXPECT_EQ(d.indices.size(), 7u);
    EXPECT_TRUE(std::is_sorted(d.indices.begin(), d.indices.end()));
    const std::set<std::size_t> picked(d.indices.begin(), d.indices.end());
    for (std::size_t i = 0; i < 64; ++i)
      for (std::size_t j = 0; j < 64; ++j) {
        const bool in = picked.count(axis == ExtractAxis::Rows ? i : j) > 0;
        EXPECT_EQ(d.outlier_part(i, j), in ? a(i, j) : 0.0f);
        EXPECT_EQ(d.residual(i, j), in ? 0.0f : a(i, j));
      }
    expect_values_equal(add(d.residual, d.outlier_part), a);
  }
  EXPECT_THROW(oe_decompose(a, ExtractAxis::Rows, 0), InputError);
}

TEST(OeMatmul, CompactPathEqualsZeroPaddedFormulation) {
  auto [a, b] = generate_pair(parse_pair("RC"), {64, 64, 64}, 5, {2, 50.0, {}});
  EngineConfig cfg;
  cfg.k_extract = 8;
  {
    const OEDecomposition d = oe_decompose(a, ExtractAxis::Rows, 8);
    expect_values_equal(oe_left_matmul(a, b, cfg), add(iht_matmul(d.residual, b), matmul_exact(d.outlier_part, b)));
  }
  {
    const OEDecomposition d = oe_decompose(b, ExtractAxis::Cols, 8);
    expect_values_equal(oe_right_matmul(a, b, cfg), add(iht_matmul(a, d.residual), matmul_exact(a, d.outlier_part)));
  }
}

TEST(OeMatmul, ExtractingEverythingIsExact) {
  const DenseMatrix a = oracle::gaussian(32, 64, 6), b = oracle::gaussian(64, 32, 7);
  EngineConfig cfg;
  cfg.k_extract = 1000;
  const auto ref = oracle::matmul(a, b);
  EXPECT_LT(oracle::rel_frob(oe_left_matmul(a, b, cfg), ref), 1e-6);
  EXPECT_LT(oracle::rel_frob(oe_right_matmul(a, b, cfg), ref), 1e-6);
}

TEST(OeMatmul, IdentityQuantizerIsExact) {
  const DenseMatrix a = oracle::gaussian(64, 64, 8), b = oracle::gaussian(64, 64, 9);
  EngineConfig cfg;
  cfg.quantizer = Quantizer::identity();
  cfg.k_extract = 5;
  const auto ref = oracle::matmul(a, b);
  for (K k : {K::IHT, K::OELeftIHT, K::OERightIHT, K::FullPrecision, K::OHTReference})
    EXPECT_LT(oracle::rel_frob(execute(a, b, {k, 5}, cfg), ref), 1e-6) << strategy_name(k);
}

TEST(OeMatmul, ShapeErrors) {
  EXPECT_THROW(oe_left_matmul(DenseMatrix(32, 64), DenseMatrix(32, 32)), ShapeError);
  EXPECT_THROW(oe_right_matmul(DenseMatrix(32, 64), DenseMatrix(32, 32)), ShapeError);
}

TEST(Execute, Dispatch) {
  const DenseMatrix a = oracle::gaussian(64, 64, 10), b = oracle::gaussian(64, 64, 11);
  EngineConfig cfg;
  cfg.k_extract = 3;  // execute takes k from the strategy
  EngineConfig k9 = cfg;
  k9.k_extract = 9;
  expect_values_equal(execute(a, b, {K::FullPrecision, 9}, cfg), matmul_exact(a, b));
  expect_values_equal(execute(a, b, {K::IHT, 9}, cfg), iht_matmul(a, b));
  expect_values_equal(execute(a, b, {K::OHTReference, 9}, cfg), oht_matmul(a, b));
  expect_values_equal(execute(a, b, {K::OELeftIHT, 9}, cfg), oe_left_matmul(a, b, k9));
  expect_values_equal(execute(a, b, {K::OERightIHT, 9}, cfg), oe_right_matmul(a, b, k9));
}

TEST(OeMatmul, ExtractionHelpsOutlierPairs) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    EXPECT_LT(pair_mse("RN", K::OELeftIHT, s), pair_mse("RN", K::IHT, s)) << s;
    EXPECT_LT(pair_mse("NC", K::OERightIHT, s), pair_mse("NC", K::IHT, s)) << s;
    EXPECT_LT(pair_mse("RC", K::OERightIHT, s), pair_mse("RC", K::IHT, s)) << s;
  }
}
