#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/hadamard.hpp"
#include "adahop/matrix.hpp"
#include "adahop/matrix_io.hpp"
#include "adahop/mxfp4.hpp"
#include "adahop/pattern.hpp"
#include "adahop/rng.hpp"
#include "adahop/strategy.hpp"

namespace adahop {

enum class Activation { ReLU, GELU };

inline std::string_view activation_name(Activation a) noexcept { return a == Activation::ReLU ? "relu" : "gelu"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "gelu" || s == "GELU") return Activation::GELU;
  throw InputError("unknown activation '" + std::string(s) + "'");
}

enum class Backend { FullPrecision, NaiveMXFP4, UniformIHT, AdaHOPLv1, AdaHOPLv2 };

inline constexpr std::array<Backend, 5> kAllBackends{Backend::FullPrecision, Backend::NaiveMXFP4, Backend::UniformIHT,
                                                     Backend::AdaHOPLv1, Backend::AdaHOPLv2};

inline std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::FullPrecision: return "FullPrecision";
    case Backend::NaiveMXFP4: return "NaiveMXFP4";
    case Backend::UniformIHT: return "UniformIHT";
    case Backend::AdaHOPLv1: return "AdaHOPLv1";
    case Backend::AdaHOPLv2: return "AdaHOPLv2";
  }
  return "?";
}

inline Backend parse_backend(std::string_view s) {
  for (Backend b : kAllBackends)
    if (backend_name(b) == s) return b;
  throw InputError("unknown backend '" + std::string(s) + "'");
}

inline bool is_adahop(Backend b) noexcept { return b == Backend::AdaHOPLv1 || b == Backend::AdaHOPLv2; }

/// Student MLP trained to match a fixed random teacher on Gaussian inputs. A few input
/// channels have a larger standard deviation (`input_outlier_scale`); the teacher reads
/// those channels with weights shrunk by the same factor.
struct ToyModelConfig {
  std::vector<std::size_t> layer_dims{64, 256, 64};
  Activation activation = Activation::ReLU;
  std::size_t batch = 256;
  std::size_t steps_calib = 30;
  std::size_t steps_train = 300;
  double lr = 0.02;
  std::uint64_t seed = 42;

  std::size_t teacher_hidden = 64;
  std::size_t input_outlier_channels = 4;
  double input_outlier_scale = 20.0;
  std::size_t loss_window = 20;  // final loss = mean of the last this-many steps

  DetectionConfig detection{};
  EngineConfig engine{};

  std::size_t layers() const noexcept { return layer_dims.size() - 1; }

  void validate() const {
    if (layer_dims.size() < 2) throw InputError("toy model needs at least two widths");
    for (std::size_t w : layer_dims)
      if (w == 0 || w % kMxBlock != 0) throw InputError("layer width " + std::to_string(w) + " not a multiple of 32");
    if (batch == 0 || batch % kMxBlock != 0) throw InputError("batch must be a positive multiple of 32");
    if (steps_calib == 0) throw InputError("steps_calib must be at least 1");
    if (steps_train == 0) throw InputError("steps_train must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InputError("learning rate must be positive");
    if (teacher_hidden == 0) throw InputError("teacher_hidden must be positive");
    if (input_outlier_channels > layer_dims.front()) throw InputError("more outlier channels than inputs");
    if (!(input_outlier_scale >= 1.0)) throw InputError("input_outlier_scale must be >= 1");
    if (loss_window == 0) throw InputError("loss_window must be positive");
    detection.validate();
    engine.hadamard.validate();
  }
};

/// Names of the three per-layer tensors seen by the detector.
enum class TensorRole { X, W, GY };

inline std::string_view role_name(TensorRole r) noexcept {
  switch (r) {
    case TensorRole::X: return "X";
    case TensorRole::W: return "W";
    case TensorRole::GY: return "GY";
  }
  return "?";
}

inline std::string tensor_id(std::size_t layer, TensorRole r) {
  return "layer" + std::to_string(layer) + "." + std::string(role_name(r));
}

inline std::string layer_name(std::size_t layer) { return "layer" + std::to_string(layer); }

inline OutlierPattern transposed(OutlierPattern p) noexcept {
  if (p == OutlierPattern::Row) return OutlierPattern::Column;
  if (p == OutlierPattern::Column) return OutlierPattern::Row;
  return OutlierPattern::None;
}

/// Operand patterns of one layer's three products, given the tensor patterns.
///   fwd: X · Wᵀ      gw: G_Yᵀ · X      gx: G_Y · W
inline std::array<PatternPair, 3> layer_pairs(OutlierPattern x, OutlierPattern w, OutlierPattern gy) {
  return {PatternPair{x, transposed(w), MatmulPath::Fwd}, PatternPair{transposed(gy), x, MatmulPath::GradW},
          PatternPair{gy, w, MatmulPath::GradX}};
}

struct BackendRun {
  Backend backend = Backend::FullPrecision;
  std::vector<double> losses;
  bool failed = false;
  std::string failure;
  std::optional<double> final_loss;
  std::vector<CalibrationRecord> calibration;
  std::optional<StrategyPlan> plan;
};

struct TrainReport {
  ToyModelConfig config;
  std::vector<BackendRun> runs;

  const BackendRun* find(Backend b) const {
    for (const auto& r : runs)
      if (r.backend == b) return &r;
    return nullptr;
  }

  /// final_loss(b) - final_loss(FullPrecision); empty when either run failed or is missing.
  std::optional<double> gap(Backend b) const {
    const BackendRun* ref = find(Backend::FullPrecision);
    const BackendRun* run = find(b);
    if (!ref || !run || !ref->final_loss || !run->final_loss) return std::nullopt;
    return *run->final_loss - *ref->final_loss;
  }
};

namespace detail {

inline DenseMatrix gaussian_matrix(Rng rng, std::size_t rows, std::size_t cols, double stddev) {
  std::vector<float> v(rows * cols);
  for (float& x : v) x = static_cast<float>(rng.normal() * stddev);
  return DenseMatrix(rows, cols, std::move(v));
}

inline double act(Activation a, double x) {
  if (a == Activation::ReLU) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
}

inline double act_grad(Activation a, double x) {
  if (a == Activation::ReLU) return x > 0.0 ? 1.0 : 0.0;
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))) + x * pdf;
}

inline DenseMatrix apply_act(Activation a, const DenseMatrix& y) {
  DenseMatrix out = y;
  for (float& v : out.data()) v = static_cast<float>(act(a, v));
  return out;
}

}  // namespace detail

/// Fixed task derived from the seed: teacher weights, input channel scales, and a batch
/// per step. Identical for every backend.
class TeacherTask {
 public:
  explicit TeacherTask(const ToyModelConfig& cfg) : cfg_(cfg), root_(cfg.seed) {
    const std::size_t d_in = cfg.layer_dims.front(), d_out = cfg.layer_dims.back();
    channel_scale_.assign(d_in, 1.0);
    Rng pick = root_.split(3);
    for (std::size_t c : pick.sample_without_replacement(d_in, cfg.input_outlier_channels))
      channel_scale_[c] = cfg.input_outlier_scale;

    t1_ = detail::gaussian_matrix(root_.split(0).split(0), cfg.teacher_hidden, d_in, std::sqrt(2.0 / d_in));
    for (std::size_t h = 0; h < cfg.teacher_hidden; ++h)
      for (std::size_t c = 0; c < d_in; ++c) t1_(h, c) = static_cast<float>(t1_(h, c) / channel_scale_[c]);
    t2_ = detail::gaussian_matrix(root_.split(0).split(1), d_out, cfg.teacher_hidden,
                                  std::sqrt(1.0 / cfg.teacher_hidden));
  }

  DenseMatrix inputs(std::size_t step) const {
    Rng rng = root_.split(2).split(step);
    const std::size_t d_in = cfg_.layer_dims.front();
    std::vector<float> v(cfg_.batch * d_in);
    for (std::size_t i = 0; i < cfg_.batch; ++i)
      for (std::size_t c = 0; c < d_in; ++c) v[i * d_in + c] = static_cast<float>(rng.normal() * channel_scale_[c]);
    return DenseMatrix(cfg_.batch, d_in, std::move(v));
  }

  DenseMatrix targets(const DenseMatrix& x) const {
    const DenseMatrix h = detail::apply_act(cfg_.activation, matmul_exact(x, transpose(t1_)));
    return matmul_exact(h, transpose(t2_));
  }

  /// He-style initialization of the student, shared by all backends.
  std::vector<DenseMatrix> initial_weights() const {
    std::vector<DenseMatrix> w;
    for (std::size_t l = 0; l < cfg_.layers(); ++l) {
      const std::size_t fan_in = cfg_.layer_dims[l];
      const double gain = l + 1 < cfg_.layers() ? 2.0 : 1.0;
      w.push_back(detail::gaussian_matrix(root_.split(1).split(l), cfg_.layer_dims[l + 1], fan_in,
                                          std::sqrt(gain / fan_in)));
    }
    return w;
  }

  const std::vector<double>& channel_scale() const noexcept { return channel_scale_; }

 private:
  ToyModelConfig cfg_;
  Rng root_;
  std::vector<double> channel_scale_;
  DenseMatrix t1_, t2_;
};

/// Everything one forward/backward pass produced, per layer.
struct PassTensors {
  std::vector<DenseMatrix> x;   // layer inputs, batch × d_in
  std::vector<DenseMatrix> y;   // pre-activations, batch × d_out
  std::vector<DenseMatrix> gy;  // loss gradient w.r.t. y
  std::vector<DenseMatrix> gw;  // d_out × d_in
  std::vector<DenseMatrix> gx;  // batch × d_in
  double loss = 0.0;
};

/// Routes a layer product through a backend; `path` and `layer` select the plan entry.
using MatmulFn = std::function<DenseMatrix(const DenseMatrix&, const DenseMatrix&, std::size_t, MatmulPath)>;

/// Forward and backward pass. Loss is mean((Y_L - T)²) over batch × d_out.
///   Y = X Wᵀ,   G_W = G_Yᵀ X,   G_X = G_Y W
inline PassTensors forward_backward(const std::vector<DenseMatrix>& weights, const DenseMatrix& input,
                                    const DenseMatrix& target, Activation activation, const MatmulFn& mm) {
  const std::size_t layers = weights.size();
  PassTensors t;
  DenseMatrix h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseMatrix wt = transpose(weights[l]);
    DenseMatrix y = mm(h, wt, l, MatmulPath::Fwd);
    if (y.rows() != h.rows() || y.cols() != weights[l].rows()) throw ShapeError("forward output shape");
    t.x.push_back(h);
    h = l + 1 < layers ? detail::apply_act(activation, y) : y;
    t.y.push_back(std::move(y));
  }

  const DenseMatrix& out = t.y.back();
  if (!out.same_shape(target)) throw ShapeError("target shape " + shape_str(target) + " vs output " + shape_str(out));
  const double denom = static_cast<double>(out.size());
  double loss = 0.0;
  DenseMatrix g(out.rows(), out.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = static_cast<double>(out.data()[i]) - target.data()[i];
    loss += d * d;
    g.data()[i] = static_cast<float>(2.0 * d / denom);
  }
  t.loss = loss / denom;

  t.gy.resize(layers);
  t.gw.resize(layers);
  t.gx.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    t.gy[l] = g;
    const DenseMatrix gyt = transpose(g);
    // G_Yᵀ (d_out × batch) against X (batch × d_in).
    if (gyt.cols() != t.x[l].rows()) throw ShapeError("gw operand orientation");
    t.gw[l] = mm(gyt, t.x[l], l, MatmulPath::GradW);
    t.gx[l] = mm(g, weights[l], l, MatmulPath::GradX);
    if (!t.gw[l].same_shape(weights[l]) || !t.gx[l].same_shape(t.x[l])) throw ShapeError("backward output shape");
    if (l > 0) {
      g = t.gx[l];
      const DenseMatrix& pre = t.y[l - 1];
      for (std::size_t i = 0; i < g.size(); ++i)
        g.data()[i] = static_cast<float>(g.data()[i] * detail::act_grad(activation, pre.data()[i]));
    }
  }
  return t;
}

inline void sgd_step(std::vector<DenseMatrix>& weights, const std::vector<DenseMatrix>& grads, double lr) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto w = weights[l].data();
    auto g = grads[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(w[i] - lr * g[i]);
  }
}

/// Per-tensor calibration from the patterns seen during the full-precision phase, and the
/// plan they induce.
inline StrategyPlan plan_from_calibration(const std::vector<CalibrationRecord>& records, std::size_t layers,
                                          Level level, std::size_t k_extract) {
  auto final_of = [&](const std::string& id) {
    for (const auto& r : records)
      if (r.tensor_id == id) return r.final_pattern;
    throw InputError("no calibration record for " + id);
  };
  StrategyPlan plan;
  plan.level = level;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto pairs = layer_pairs(final_of(tensor_id(l, TensorRole::X)), final_of(tensor_id(l, TensorRole::W)),
                                   final_of(tensor_id(l, TensorRole::GY)));
    for (const auto& p : pairs) plan.assignments.push_back({layer_name(l), p, strategy_for_pair(p, level, k_extract)});
  }
  return plan;
}

inline BackendRun run_backend(const ToyModelConfig& cfg, Backend backend) {
  cfg.validate();
  const TeacherTask task(cfg);
  std::vector<DenseMatrix> weights = task.initial_weights();
  const std::size_t layers = cfg.layers();
  const EngineConfig& eng = cfg.engine;

  BackendRun run;
  run.backend = backend;
  std::map<std::string, std::vector<OutlierPattern>> seen;
  std::optional<StrategyPlan> plan;

  auto low_precision = [&](const DenseMatrix& a, const DenseMatrix& b, std::size_t layer, MatmulPath path) {
    switch (backend) {
      case Backend::FullPrecision: return matmul_exact(a, b);
      case Backend::NaiveMXFP4: return matmul_quantized(a, b, eng.quantizer);
      case Backend::UniformIHT: return iht_matmul(a, b, eng.hadamard, eng.quantizer);
      case Backend::AdaHOPLv1:
      case Backend::AdaHOPLv2: {
        const PlanAssignment* as = plan->find(layer_name(layer), path);
        if (!as) throw InputError("plan has no entry for " + layer_name(layer));
        return execute(a, b, as->strategy, eng);
      }
    }
    throw InputError("unknown backend");
  };

  try {
    for (std::size_t step = 0; step < cfg.steps_train; ++step) {
      const bool calibrating = is_adahop(backend) && step < cfg.steps_calib;
      if (is_adahop(backend) && step == cfg.steps_calib) {
        for (auto& [id, pats] : seen) run.calibration.push_back(calibrate_patterns(id, pats));
        plan = plan_from_calibration(run.calibration, layers,
                                     backend == Backend::AdaHOPLv1 ? Level::Lv1 : Level::Lv2, eng.k_extract);
      }
      MatmulFn mm = [&](const DenseMatrix& a, const DenseMatrix& b, std::size_t layer, MatmulPath path) {
        return calibrating ? matmul_exact(a, b) : low_precision(a, b, layer, path);
      };

      const DenseMatrix x = task.inputs(step);
      const PassTensors t = forward_backward(weights, x, task.targets(x), cfg.activation, mm);
      if (!std::isfinite(t.loss)) {
        run.failed = true;
        run.failure = "loss is not finite at step " + std::to_string(step);
        break;
      }
      run.losses.push_back(t.loss);

      if (calibrating) {
        for (std::size_t l = 0; l < layers; ++l) {
          seen[tensor_id(l, TensorRole::X)].push_back(detect_pattern(t.x[l], cfg.detection));
          seen[tensor_id(l, TensorRole::W)].push_back(detect_pattern(weights[l], cfg.detection));
          seen[tensor_id(l, TensorRole::GY)].push_back(detect_pattern(t.gy[l], cfg.detection));
        }
      }
      sgd_step(weights, t.gw, cfg.lr);
      for (const auto& w : weights)
        for (float v : w.data())
          if (!std::isfinite(v)) throw DegenerateInputError("weights diverged at step " + std::to_string(step));
    }
    // Calibration longer than the run: still report what was seen.
    if (is_adahop(backend) && !plan && !seen.empty()) {
      for (auto& [id, pats] : seen) run.calibration.push_back(calibrate_patterns(id, pats));
      plan = plan_from_calibration(run.calibration, layers, backend == Backend::AdaHOPLv1 ? Level::Lv1 : Level::Lv2,
                                   eng.k_extract);
    }
  } catch (const Error& e) {
    run.failed = true;
    run.failure = e.what();
  }
  run.plan = plan;
  if (!run.failed && !run.losses.empty()) {
    const std::size_t w = std::min(cfg.loss_window, run.losses.size());
    double s = 0.0;
    for (std::size_t i = run.losses.size() - w; i < run.losses.size(); ++i) s += run.losses[i];
    run.final_loss = s / static_cast<double>(w);
  }
  return run;
}

/// Trains every requested backend from the same seed. FullPrecision is always included
/// so that gaps can be reported.
inline TrainReport train(const ToyModelConfig& cfg, std::vector<Backend> backends = {kAllBackends.begin(),
                                                                                     kAllBackends.end()}) {
  cfg.validate();
  if (std::find(backends.begin(), backends.end(), Backend::FullPrecision) == backends.end())
    backends.insert(backends.begin(), Backend::FullPrecision);
  TrainReport report;
  report.config = cfg;
  for (Backend b : backends) report.runs.push_back(run_backend(cfg, b));
  return report;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradientCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // e.g. "W1[3,17]" or "X[5,2]"
  double tolerance = 1e-3;
  bool passed = false;
};

namespace detail {

inline double loss_double(const std::vector<std::vector<double>>& w, const std::vector<std::size_t>& dims,
                          const std::vector<double>& x, const std::vector<double>& target, std::size_t batch,
                          Activation activation) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t din = dims[l], dout = dims[l + 1];
    std::vector<double> y(batch * dout, 0.0);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t o = 0; o < dout; ++o) {
        double s = 0.0;
        for (std::size_t c = 0; c < din; ++c) s += h[i * din + c] * w[l][o * din + c];
        y[i * dout + o] = l + 2 < dims.size() ? act(activation, s) : s;
      }
    h = std::move(y);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) loss += (h[i] - target[i]) * (h[i] - target[i]);
  return loss / static_cast<double>(h.size());
}

}  // namespace detail

/// Analytic G_W (every layer) and the input gradient against central differences of a
/// double-precision forward pass. Relative error is |a - f| / max(|a|, |f|, floor), with
/// floor = 1e-3 · max|gradient| of the tensor so that near-zero entries do not dominate.
inline GradientCheckReport gradient_check(const ToyModelConfig& cfg, std::size_t samples = 128, double h = 1e-5,
                                          double tolerance = 1e-3) {
  cfg.validate();
  const TeacherTask task(cfg);
  const std::vector<DenseMatrix> weights = task.initial_weights();
  const DenseMatrix x = task.inputs(0);
  const DenseMatrix target = task.targets(x);
  MatmulFn exact = [](const DenseMatrix& a, const DenseMatrix& b, std::size_t, MatmulPath) {
    return matmul_exact(a, b);
  };
  const PassTensors t = forward_backward(weights, x, target, cfg.activation, exact);

  std::vector<std::vector<double>> w;
  for (const auto& m : weights) w.emplace_back(m.data().begin(), m.data().end());
  std::vector<double> xd(x.data().begin(), x.data().end());
  const std::vector<double> td(target.data().begin(), target.data().end());
  auto loss = [&] { return detail::loss_double(w, cfg.layer_dims, xd, td, cfg.batch, cfg.activation); };

  GradientCheckReport rep;
  rep.tolerance = tolerance;
  Rng rng = Rng(cfg.seed).split(7);
  const std::size_t targets = weights.size() + 1;  // every weight, then the input
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t which = s % targets;
    const bool is_input = which == weights.size();
    std::vector<double>& vec = is_input ? xd : w[which];
    const DenseMatrix& analytic = is_input ? t.gx[0] : t.gw[which];
    const std::size_t idx = static_cast<std::size_t>(rng.below(vec.size()));

    const double keep = vec[idx];
    const double step = h * std::max(1.0, std::fabs(keep));
    vec[idx] = keep + step;
    const double up = loss();
    vec[idx] = keep - step;
    const double down = loss();
    vec[idx] = keep;
    const double fd = (up - down) / (2.0 * step);

    const double a = analytic.data()[idx];
    const double floor = 1e-3 * max_abs(analytic);
    const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), floor, 1e-300});
    ++rep.checked;
    if (rel > rep.max_rel_error || rep.worst.empty()) {
      rep.max_rel_error = rel;
      const std::size_t cols = analytic.cols();
      rep.worst = (is_input ? std::string("X") : "W" + std::to_string(which)) + "[" + std::to_string(idx / cols) +
                  "," + std::to_string(idx % cols) + "]";
    }
  }
  rep.passed = rep.max_rel_error <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Recorded streams

/// X, W and G_Y of every layer for the first `steps` full-precision training steps,
/// keyed by tensor id ("layer0.X", ...).
inline std::map<std::string, std::vector<DenseMatrix>> collect_streams(const ToyModelConfig& cfg, std::size_t steps) {
  cfg.validate();
  const TeacherTask task(cfg);
  std::vector<DenseMatrix> weights = task.initial_weights();
  MatmulFn exact = [](const DenseMatrix& a, const DenseMatrix& b, std::size_t, MatmulPath) {
    return matmul_exact(a, b);
  };
  std::map<std::string, std::vector<DenseMatrix>> streams;
  for (std::size_t step = 0; step < steps; ++step) {
    const DenseMatrix x = task.inputs(step);
    const PassTensors t = forward_backward(weights, x, task.targets(x), cfg.activation, exact);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      streams[tensor_id(l, TensorRole::X)].push_back(t.x[l]);
      streams[tensor_id(l, TensorRole::W)].push_back(weights[l]);
      streams[tensor_id(l, TensorRole::GY)].push_back(t.gy[l]);
    }
    sgd_step(weights, t.gw, cfg.lr);
  }
  return streams;
}

inline std::string stream_file_name(const std::string& id, std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ".step%04zu.aht", step);
  return id + buf;
}

/// Writes one AHT1 file per (tensor, step) into `dir`; returns the paths in write order.
inline std::vector<std::filesystem::path> record_streams(const ToyModelConfig& cfg, std::size_t steps,
                                                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + ec.message(), dir.string());
  std::vector<std::filesystem::path> written;
  for (const auto& [id, stream] : collect_streams(cfg, steps)) {
    for (std::size_t s = 0; s < stream.size(); ++s) {
      const auto path = dir / stream_file_name(id, s);
      write_matrix(path, stream[s]);
      written.push_back(path);
    }
  }
  return written;
}

/// Inverse of record_streams: groups `<id>.stepNNNN.aht` files by id, ordered by step.
inline std::map<std::string, std::vector<DenseMatrix>> load_streams(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory", dir.string());
  std::map<std::string, std::map<std::size_t, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const auto pos = name.rfind(".step");
    if (pos == std::string::npos || name.size() < pos + 9 || name.substr(name.size() - 4) != ".aht") continue;
    const std::string digits = name.substr(pos + 5, name.size() - 4 - (pos + 5));
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    found[name.substr(0, pos)][std::stoul(digits)] = entry.path();
  }
  if (found.empty()) throw IoError("no recorded step files", dir.string());
  std::map<std::string, std::vector<DenseMatrix>> out;
  for (const auto& [id, steps] : found)
    for (const auto& [s, path] : steps) out[id].push_back(read_matrix(path));
  return out;
}

}  // namespace adahop
