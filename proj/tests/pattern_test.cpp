#include <gtest/gtest.h>

#include <cmath>

#include "adahop/pattern.hpp"
#include "adahop/synth.hpp"
#include "oracles.hpp"

using namespace adahop;
using P = OutlierPattern;

namespace {

// Independent coefficient-of-variation computation in long double.
double oracle_cv(const std::vector<long double>& v) {
  long double mean = 0, mabs = 0;
  for (auto x : v) {
    mean += x;
    mabs += std::fabs(x);
  }
  mean /= v.size();
  mabs /= v.size();
  long double var = 0;
  for (auto x : v) var += (x - mean) * (x - mean);
  return static_cast<double>(std::sqrt(var / v.size()) / (mabs + 1e-8L));
}

CvPair oracle_cvs(const DenseMatrix& a) {
  CvPair out;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::vector<long double> r;
    for (std::size_t j = 0; j < a.cols(); ++j) r.push_back(a(i, j));
    out.row_hat += oracle_cv(r);
  }
  for (std::size_t j = 0; j < a.cols(); ++j) {
    std::vector<long double> c;
    for (std::size_t i = 0; i < a.rows(); ++i) c.push_back(a(i, j));
    out.col_hat += oracle_cv(c);
  }
  out.row_hat /= a.rows();
  out.col_hat /= a.cols();
  return out;
}

DenseMatrix with_scaled_cols(DenseMatrix a, std::vector<std::size_t> cols, float s) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j : cols) a(i, j) *= s;
  return a;
}

}  // namespace

TEST(PatternNames, RoundTrip) {
  for (P p : kAllPatterns) EXPECT_EQ(parse_pattern(std::string(1, pattern_char(p))), p);
  EXPECT_EQ(parse_pattern("row"), P::Row);
  EXPECT_EQ(parse_pattern("Column"), P::Column);
  EXPECT_THROW(parse_pattern("X"), InputError);
}

TEST(Cv, MatchesOracle) {
  const DenseMatrix a = with_scaled_cols(oracle::gaussian(48, 80, 2), {3, 40}, 30.0f);
  const CvPair got = normalized_cvs(a), ref = oracle_cvs(a);
  EXPECT_NEAR(got.row_hat, ref.row_hat, 1e-9 * ref.row_hat);
  EXPECT_NEAR(got.col_hat, ref.col_hat, 1e-9 * ref.col_hat);
}

TEST(Cv, ConstantMatrixIsNone) {
  const DenseMatrix a = DenseMatrix::filled(32, 32, 3.0f);
  const CvPair cv = normalized_cvs(a);
  EXPECT_EQ(cv.row_hat, 0.0);
  EXPECT_EQ(cv.col_hat, 0.0);
  EXPECT_EQ(detect_pattern(a), P::None);
  EXPECT_EQ(detect_pattern(DenseMatrix(32, 32)), P::None);
}

TEST(Cv, GaussianStaysBelowThreshold) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const CvPair cv = normalized_cvs(oracle::gaussian(128, 128, s));
    EXPECT_LT(cv.row_hat, 2.0);
    EXPECT_LT(cv.col_hat, 2.0);
    EXPECT_EQ(detect_pattern(oracle::gaussian(128, 128, s)), P::None);
  }
}

TEST(Cv, ScaledColumnsRaiseRowCv) {
  const DenseMatrix a = with_scaled_cols(oracle::gaussian(256, 256, 3), {1, 50, 100, 200}, 100.0f);
  const CvPair cv = normalized_cvs(a);
  EXPECT_GT(cv.row_hat, 2.0);
  EXPECT_LT(cv.col_hat, 2.0);
  EXPECT_EQ(detect_pattern(a), P::Column);
  EXPECT_EQ(detect_pattern(transpose(a)), P::Row);
}

TEST(Cv, SyntheticPatternsDetected) {
  for (P p : kAllPatterns) {
    SynthSpec s;
    s.pattern = p;
    s.outlier_count = p == P::None ? 0 : 3;
    s.outlier_scale = 100;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      s.seed = seed;
      EXPECT_EQ(detect_pattern(generate(s)), p) << pattern_char(p) << seed;
    }
  }
}

TEST(Cv, ScaleInvariant) {
  const DenseMatrix a = with_scaled_cols(oracle::gaussian(64, 64, 4), {7}, 50.0f);
  const CvPair c1 = normalized_cvs(a), c2 = normalized_cvs(scaled(a, 1024.0f));
  EXPECT_NEAR(c1.row_hat, c2.row_hat, 1e-6);
  EXPECT_NEAR(c1.col_hat, c2.col_hat, 1e-6);
}

TEST(Cv, TransposeSwaps) {
  const DenseMatrix a = with_scaled_cols(oracle::gaussian(64, 96, 5), {2, 9}, 20.0f);
  const CvPair c = normalized_cvs(a), t = normalized_cvs(transpose(a));
  EXPECT_NEAR(c.row_hat, t.col_hat, 1e-12);
  EXPECT_NEAR(c.col_hat, t.row_hat, 1e-12);
}

TEST(Cv, SqrtDimNormalizationIsBoundedByOne) {
  DetectionConfig cfg;
  cfg.normalization = CvNormalization::SqrtDim;
  // Worst case: one nonzero per row.
  DenseMatrix a(64, 64);
  for (std::size_t i = 0; i < 64; ++i) a(i, 0) = 1000.0f;
  const CvPair cv = normalized_cvs(a, cfg);
  EXPECT_LE(cv.row_hat, 1.0);
  EXPECT_LE(cv.col_hat, 1.0);
  EXPECT_GT(cv.row_hat, 0.95);
  EXPECT_EQ(detect_pattern(a, cfg), P::None);
  cfg.tau = 0.5;
  EXPECT_EQ(detect_pattern(a, cfg), P::Column);
}

TEST(Cv, Errors) {
  EXPECT_THROW(normalized_cvs(DenseMatrix(1, 32)), ShapeError);
  DetectionConfig cfg;
  cfg.tau = 0;
  EXPECT_THROW(normalized_cvs(DenseMatrix(4, 4), cfg), InputError);
}

TEST(Classify, Rules) {
  EXPECT_EQ(classify_cvs({1.0, 3.0}, 2.0), P::Row);
  EXPECT_EQ(classify_cvs({3.0, 1.0}, 2.0), P::Column);
  EXPECT_EQ(classify_cvs({3.0, 3.0}, 2.0), P::Row);
  EXPECT_EQ(classify_cvs({2.0, 2.0}, 2.0), P::None);
  EXPECT_EQ(classify_cvs({4.0, 3.0}, 2.0), P::Column);
}

TEST(MajorityVote, Counts) {
  std::vector<P> v(16, P::Row);
  v.insert(v.end(), 14, P::None);
  EXPECT_EQ(majority_vote(v), P::Row);
  std::vector<P> tie(15, P::None);
  tie.insert(tie.end(), 15, P::Column);
  EXPECT_EQ(majority_vote(tie), P::Column);
  EXPECT_EQ(majority_vote({P::Column, P::Row}), P::Row);
  EXPECT_EQ(majority_vote({P::None, P::None, P::Column}), P::None);
  EXPECT_THROW(majority_vote({}), InputError);
}

TEST(Calibrate, RecordsEveryStep) {
  std::vector<DenseMatrix> stream;
  for (std::uint64_t s = 0; s < 5; ++s) stream.push_back(oracle::gaussian(32, 32, s));
  stream.push_back(with_scaled_cols(oracle::gaussian(32, 32, 9), {0}, 100.0f));
  const CalibrationRecord r = calibrate(stream, {}, "t");
  EXPECT_EQ(r.tensor_id, "t");
  ASSERT_EQ(r.per_step_patterns.size(), 6u);
  EXPECT_EQ(r.per_step_patterns.back(), P::Column);
  EXPECT_EQ(r.final_pattern, P::None);
  EXPECT_THROW(calibrate({}), InputError);
}
