#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"

namespace adahop {

enum class OutlierPattern { Row, Column, None };

inline constexpr std::array<OutlierPattern, 3> kAllPatterns{OutlierPattern::Row, OutlierPattern::Column,
                                                           OutlierPattern::None};

inline char pattern_char(OutlierPattern p) noexcept {
  switch (p) {
    case OutlierPattern::Row: return 'R';
    case OutlierPattern::Column: return 'C';
    case OutlierPattern::None: return 'N';
  }
  return '?';
}

inline OutlierPattern parse_pattern(std::string_view s) {
  if (s == "R" || s == "Row" || s == "row") return OutlierPattern::Row;
  if (s == "C" || s == "Column" || s == "column" || s == "col") return OutlierPattern::Column;
  if (s == "N" || s == "None" || s == "none") return OutlierPattern::None;
  throw InputError("unknown outlier pattern '" + std::string(s) + "'");
}

/// How the raw coefficients of variation are scaled before thresholding.
/// `Raw` compares the mean per-row / per-column CV directly against τ.
/// `SqrtDim` divides by √(slice length); with population std that value never exceeds 1,
/// so it is only useful with thresholds below 1.
enum class CvNormalization { Raw, SqrtDim };

struct DetectionConfig {
  double tau = 2.0;
  double epsilon = 1e-8;
  CvNormalization normalization = CvNormalization::Raw;

  void validate() const {
    if (!(tau > 0.0)) throw InputError("tau must be positive");
    if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  }
};

struct CvPair {
  double row_hat = 0.0;  // mean over rows of std/mean|.|; large when some columns dominate
  double col_hat = 0.0;  // mean over columns; large when some rows dominate
};

inline CvPair normalized_cvs(const DenseMatrix& a, const DetectionConfig& cfg = {}) {
  cfg.validate();
  if (a.rows() < 2 || a.cols() < 2) {
    throw ShapeError("pattern detection needs at least 2x2, got " + shape_str(a));
  }
  const std::size_t m = a.rows(), n = a.cols();
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);

  std::vector<double> row_mean(m, 0.0), col_mean(n, 0.0), row_abs(m, 0.0), col_abs(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = a(i, j);
      row_mean[i] += x;
      col_mean[j] += x;
      row_abs[i] += std::fabs(x);
      col_abs[j] += std::fabs(x);
    }
  }
  for (auto& v : row_mean) v /= dn;
  for (auto& v : row_abs) v /= dn;
  for (auto& v : col_mean) v /= dm;
  for (auto& v : col_abs) v /= dm;

  std::vector<double> row_var(m, 0.0), col_var(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = a(i, j);
      row_var[i] += (x - row_mean[i]) * (x - row_mean[i]);
      col_var[j] += (x - col_mean[j]) * (x - col_mean[j]);
    }
  }

  CvPair out;
  for (std::size_t i = 0; i < m; ++i) out.row_hat += std::sqrt(row_var[i] / dn) / (row_abs[i] + cfg.epsilon);
  for (std::size_t j = 0; j < n; ++j) out.col_hat += std::sqrt(col_var[j] / dm) / (col_abs[j] + cfg.epsilon);
  out.row_hat /= dm;
  out.col_hat /= dn;
  if (cfg.normalization == CvNormalization::SqrtDim) {
    out.row_hat /= std::sqrt(dn);
    out.col_hat /= std::sqrt(dm);
  }
  return out;
}

/// Row when the across-rows CV clears τ (and is at least the across-columns one), Column
/// when the across-columns CV clears τ and strictly dominates, otherwise None.
inline OutlierPattern classify_cvs(const CvPair& cv, double tau) noexcept {
  if (cv.col_hat > tau && cv.col_hat >= cv.row_hat) return OutlierPattern::Row;
  if (cv.row_hat > tau && cv.row_hat > cv.col_hat) return OutlierPattern::Column;
  return OutlierPattern::None;
}

inline OutlierPattern detect_pattern(const DenseMatrix& a, const DetectionConfig& cfg = {}) {
  return classify_cvs(normalized_cvs(a, cfg), cfg.tau);
}

/// Modal pattern; ties between modes go Row > Column > None.
inline OutlierPattern majority_vote(const std::vector<OutlierPattern>& patterns) {
  if (patterns.empty()) throw InputError("majority vote over an empty pattern list");
  std::array<std::size_t, 3> counts{};
  for (OutlierPattern p : patterns) ++counts[static_cast<std::size_t>(p)];
  // kAllPatterns is already in priority order, so the first maximum wins.
  OutlierPattern best = kAllPatterns[0];
  for (OutlierPattern p : kAllPatterns)
    if (counts[static_cast<std::size_t>(p)] > counts[static_cast<std::size_t>(best)]) best = p;
  return best;
}

struct CalibrationRecord {
  std::string tensor_id;
  std::vector<OutlierPattern> per_step_patterns;
  OutlierPattern final_pattern = OutlierPattern::None;
};

inline CalibrationRecord calibrate_patterns(std::string tensor_id, std::vector<OutlierPattern> patterns) {
  CalibrationRecord rec{std::move(tensor_id), std::move(patterns), OutlierPattern::None};
  rec.final_pattern = majority_vote(rec.per_step_patterns);
  return rec;
}

inline CalibrationRecord calibrate(const std::vector<DenseMatrix>& stream, const DetectionConfig& cfg = {},
                                   std::string tensor_id = {}) {
  if (stream.empty()) throw InputError("calibration stream is empty");
  std::vector<OutlierPattern> patterns;
  patterns.reserve(stream.size());
  for (const auto& t : stream) patterns.push_back(detect_pattern(t, cfg));
  return calibrate_patterns(std::move(tensor_id), std::move(patterns));
}

}  // namespace adahop
