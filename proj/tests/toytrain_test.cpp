#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "adahop/toytrain.hpp"
#include "oracles.hpp"

using namespace adahop;

namespace {

ToyModelConfig small_config() {
  ToyModelConfig c;
  c.layer_dims = {32, 64, 32};
  c.batch = 64;
  c.steps_calib = 5;
  c.steps_train = 40;
  c.teacher_hidden = 32;
  c.lr = 0.02;
  c.seed = 3;
  return c;
}

MatmulFn exact_mm() {
  return [](const DenseMatrix& a, const DenseMatrix& b, std::size_t, MatmulPath) { return matmul_exact(a, b); };
}

}  // namespace

TEST(ToyConfig, Validation) {
  ToyModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.layer_dims = {32, 40};
  EXPECT_THROW(c.validate(), InputError);
  c = small_config();
  c.batch = 48;
  EXPECT_THROW(c.validate(), InputError);
  c = small_config();
  c.lr = 0;
  EXPECT_THROW(c.validate(), InputError);
  EXPECT_EQ(parse_backend(backend_name(Backend::AdaHOPLv2)), Backend::AdaHOPLv2);
  EXPECT_EQ(parse_activation("gelu"), Activation::GELU);
}

TEST(ToyLayout, IdsAndPairs) {
  EXPECT_EQ(tensor_id(1, TensorRole::GY), "layer1.GY");
  using P = OutlierPattern;
  const auto p = layer_pairs(P::Column, P::Row, P::None);
  // fwd: X · Wᵀ, gw: G_Yᵀ · X, gx: G_Y · W
  EXPECT_EQ(p[0].code(), "CC");
  EXPECT_EQ(p[0].path, MatmulPath::Fwd);
  EXPECT_EQ(p[1].code(), "NC");
  EXPECT_EQ(p[2].code(), "NR");
}

TEST(ForwardBackward, SingleLinearLayerMatchesClosedForm) {
  const DenseMatrix x = oracle::gaussian(8, 4, 1), w = oracle::gaussian(3, 4, 2), t = oracle::gaussian(8, 3, 3);
  const PassTensors p = forward_backward({w}, x, t, Activation::ReLU, exact_mm());
  // G_W = (2/N) (X Wᵀ - T)ᵀ X
  const auto y = oracle::matmul(x, transpose(w));
  long double loss = 0;
  std::vector<long double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    r[i] = y[i] - t.data()[i];
    loss += r[i] * r[i];
  }
  EXPECT_NEAR(p.loss, static_cast<double>(loss / 24), 1e-6);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t c = 0; c < 4; ++c) {
      long double g = 0;
      for (std::size_t i = 0; i < 8; ++i) g += r[i * 3 + o] * x(i, c);
      EXPECT_NEAR(p.gw[0](o, c), static_cast<double>(2 * g / 24), 1e-6);
    }
}

TEST(ForwardBackward, ScalarCase) {
  // One weight, one input: d/dw (wx - t)² = 2(wx - t)x.
  const DenseMatrix x = DenseMatrix::filled(1, 1, 3.0f), w = DenseMatrix::filled(1, 1, 0.5f),
                    t = DenseMatrix::filled(1, 1, 1.0f);
  const PassTensors p = forward_backward({w}, x, t, Activation::GELU, exact_mm());
  EXPECT_FLOAT_EQ(p.gw[0](0, 0), 2.0f * (1.5f - 1.0f) * 3.0f);
  EXPECT_FLOAT_EQ(p.gx[0](0, 0), 2.0f * 0.5f * 0.5f);
  EXPECT_DOUBLE_EQ(p.loss, 0.25);
}

TEST(ForwardBackward, ZeroInputGivesZeroFirstLayerGradient) {
  const ToyModelConfig c = small_config();
  const TeacherTask task(c);
  const DenseMatrix x(c.batch, 32);
  const PassTensors p = forward_backward(task.initial_weights(), x, oracle::gaussian(c.batch, 32, 1), c.activation,
                                         exact_mm());
  EXPECT_EQ(max_abs(p.gw[0]), 0.0);
}

TEST(GradientCheck, Passes) {
  for (Activation a : {Activation::ReLU, Activation::GELU}) {
    ToyModelConfig c = small_config();
    c.activation = a;
    const GradientCheckReport r = gradient_check(c, 60);
    EXPECT_TRUE(r.passed) << activation_name(a) << " worst " << r.worst << " " << r.max_rel_error;
    EXPECT_EQ(r.checked, 60u);
    EXPECT_FALSE(r.worst.empty());
  }
}

TEST(Training, FullPrecisionLossDecreases) {
  ToyModelConfig c = small_config();
  c.steps_train = 120;
  const BackendRun r = run_backend(c, Backend::FullPrecision);
  ASSERT_FALSE(r.failed) << r.failure;
  ASSERT_EQ(r.losses.size(), 120u);
  double prev = INFINITY;
  for (std::size_t w = 0; w < 120; w += 30) {
    double m = 0;
    for (std::size_t i = w; i < w + 30; ++i) m += r.losses[i] / 30;
    EXPECT_LT(m, prev) << w;
    prev = m;
  }
  ASSERT_TRUE(r.final_loss);
}

TEST(Training, Deterministic) {
  const ToyModelConfig c = small_config();
  const TrainReport a = train(c, {Backend::NaiveMXFP4, Backend::AdaHOPLv1});
  const TrainReport b = train(c, {Backend::NaiveMXFP4, Backend::AdaHOPLv1});
  ASSERT_EQ(a.runs.size(), 3u);
  for (std::size_t i = 0; i < a.runs.size(); ++i) EXPECT_EQ(a.runs[i].losses, b.runs[i].losses);
  EXPECT_EQ(a.runs[0].backend, Backend::FullPrecision);
}

TEST(Training, IdentityQuantizerMatchesFullPrecision) {
  ToyModelConfig c = small_config();
  c.engine.quantizer = Quantizer::identity();
  const TrainReport rep = train(c);
  const auto& fp = rep.find(Backend::FullPrecision)->losses;
  for (const auto& r : rep.runs) {
    ASSERT_FALSE(r.failed) << r.failure;
    ASSERT_EQ(r.losses.size(), fp.size());
    for (std::size_t i = 0; i < fp.size(); ++i) EXPECT_NEAR(r.losses[i], fp[i], 1e-4 * fp[i]) << backend_name(r.backend);
    EXPECT_NEAR(*rep.gap(r.backend), 0.0, 1e-4 * *rep.find(Backend::FullPrecision)->final_loss);
  }
}

TEST(Training, AdaHopCalibratesEveryTensor) {
  const BackendRun r = run_backend(small_config(), Backend::AdaHOPLv1);
  ASSERT_FALSE(r.failed) << r.failure;
  ASSERT_EQ(r.calibration.size(), 6u);
  for (const auto& rec : r.calibration) EXPECT_EQ(rec.per_step_patterns.size(), 5u);
  ASSERT_TRUE(r.plan);
  EXPECT_EQ(r.plan->assignments.size(), 6u);
  EXPECT_EQ(r.plan->level, Level::Lv1);
  for (const auto& rec : r.calibration) {
    if (rec.tensor_id.ends_with(".W")) {
      EXPECT_EQ(rec.final_pattern, OutlierPattern::None) << rec.tensor_id;
    }
  }
}

TEST(Training, DivergenceIsReported) {
  ToyModelConfig c = small_config();
  c.lr = 1e6;
  const BackendRun r = run_backend(c, Backend::FullPrecision);
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_FALSE(r.final_loss);
  const TrainReport rep = train(c, {Backend::NaiveMXFP4});
  EXPECT_FALSE(rep.gap(Backend::NaiveMXFP4));
}

TEST(Streams, RecordAndLoad) {
  const ToyModelConfig c = small_config();
  const auto dir = std::filesystem::temp_directory_path() / "adahop_streams_test";
  std::filesystem::remove_all(dir);
  const auto files = record_streams(c, 10, dir);
  EXPECT_EQ(files.size(), 60u);
  EXPECT_TRUE(std::filesystem::exists(dir / "layer1.GY.step0009.aht"));
  const auto loaded = load_streams(dir);
  const auto direct = collect_streams(c, 10);
  ASSERT_EQ(loaded.size(), 6u);
  for (const auto& [id, stream] : direct) {
    ASSERT_EQ(loaded.at(id).size(), 10u);
    for (std::size_t s = 0; s < 10; ++s) EXPECT_TRUE(loaded.at(id)[s] == stream[s]);
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_streams(dir), IoError);
}
