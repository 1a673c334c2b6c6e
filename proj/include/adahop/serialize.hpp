#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "adahop/analysis.hpp"
#include "adahop/error.hpp"
#include "adahop/pattern.hpp"
#include "adahop/strategy.hpp"
#include "adahop/synth.hpp"
#include "adahop/toytrain.hpp"

namespace adahop {

using Json = nlohmann::ordered_json;

inline std::string pattern_str(OutlierPattern p) { return std::string(1, pattern_char(p)); }

// ---------------------------------------------------------------------------
// Calibration records and plans

inline Json to_json(const CalibrationRecord& r) {
  Json steps = Json::array();
  for (OutlierPattern p : r.per_step_patterns) steps.push_back(pattern_str(p));
  return Json{{"tensor_id", r.tensor_id}, {"per_step", steps}, {"final", pattern_str(r.final_pattern)}};
}

inline CalibrationRecord calibration_from_json(const Json& j) {
  try {
    CalibrationRecord r;
    r.tensor_id = j.at("tensor_id").get<std::string>();
    for (const auto& s : j.at("per_step")) r.per_step_patterns.push_back(parse_pattern(s.get<std::string>()));
    r.final_pattern = parse_pattern(j.at("final").get<std::string>());
    return r;
  } catch (const Json::exception& e) {
    throw InputError(std::string("calibration record: ") + e.what());
  }
}

inline Json to_json(const StrategyPlan& plan) {
  Json rows = Json::array();
  for (const auto& a : plan.assignments) {
    rows.push_back(Json{{"layer", a.layer},
                        {"path", std::string(path_name(a.pair.path))},
                        {"pair", a.pair.code()},
                        {"strategy", std::string(strategy_name(a.strategy.kind))},
                        {"k", a.strategy.k_extract}});
  }
  return Json{{"level", std::string(level_name(plan.level))}, {"assignments", rows}};
}

inline StrategyPlan plan_from_json(const Json& j) {
  try {
    StrategyPlan plan;
    plan.level = parse_level(j.at("level").get<std::string>());
    for (const auto& a : j.at("assignments")) {
      PlanAssignment pa;
      pa.layer = a.at("layer").get<std::string>();
      pa.pair = parse_pair(a.at("pair").get<std::string>(), parse_path(a.at("path").get<std::string>()));
      pa.strategy = {parse_strategy(a.at("strategy").get<std::string>()), a.at("k").get<std::size_t>()};
      plan.assignments.push_back(std::move(pa));
    }
    return plan;
  } catch (const Json::exception& e) {
    throw InputError(std::string("strategy plan: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic tensor specs

/// {"rows", "cols", "pattern", "outlier_count", "outlier_scale", "seed", "target_kurtosis", "planted"};
/// every key is optional and falls back to the SynthSpec default.
inline SynthSpec synth_spec_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw InputError("synth spec must be a JSON object");
    SynthSpec s;
    for (const auto& [key, value] : j.items()) {
      if (key == "rows") s.rows = value.get<std::size_t>();
      else if (key == "cols") s.cols = value.get<std::size_t>();
      else if (key == "pattern") s.pattern = parse_pattern(value.get<std::string>());
      else if (key == "outlier_count") s.outlier_count = value.get<std::size_t>();
      else if (key == "outlier_scale") s.outlier_scale = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "target_kurtosis") {
        if (!value.is_null()) s.target_kurtosis = value.get<double>();
      } else if (key == "planted") s.planted = value.get<std::vector<std::size_t>>();
      else throw InputError("unknown synth spec key '" + key + "'");
    }
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw InputError(std::string("synth spec: ") + e.what());
  }
}

inline Json to_json(const SynthSpec& s) {
  Json j{{"rows", s.rows},
         {"cols", s.cols},
         {"pattern", pattern_str(s.pattern)},
         {"outlier_count", s.outlier_count},
         {"outlier_scale", s.outlier_scale},
         {"seed", s.seed}};
  j["target_kurtosis"] = s.target_kurtosis ? Json(*s.target_kurtosis) : Json(nullptr);
  j["planted"] = s.planted;
  return j;
}

inline Json to_json(const MatrixStats& s) {
  return Json{{"gamma", s.gamma}, {"kurtosis", s.kurtosis}, {"frob_norm", s.frob_norm}, {"max_abs", s.max_abs}};
}

// ---------------------------------------------------------------------------
// Analysis reports

inline Json to_json(const PairSweepResult& r) {
  Json seeds = Json::array();
  for (const auto& s : r.per_seed)
    seeds.push_back(Json{{"seed", s.seed}, {"base", s.base}, {"iht", s.iht}, {"oht", s.oht}, {"adahop", s.oe}});
  return Json{{"pair", r.pair.code()},
              {"strategy", std::string(strategy_name(r.table_strategy.kind))},
              {"mse_base", r.mse_base},
              {"mse_iht", r.mse_iht},
              {"mse_oht", r.mse_oht},
              {"mse_adahop", r.mse_oe},
              {"improvement_iht", r.improvement_iht},
              {"improvement_best", r.improvement_best},
              {"per_seed", seeds}};
}

inline Json to_json(const GammaReport& r) {
  return Json{{"pattern", pattern_str(r.pattern)}, {"m", r.m},
              {"gamma", r.gamma},                  {"gamma_left", r.gamma_left},
              {"gamma_right", r.gamma_right},      {"left_ratio", r.left_ratio},
              {"right_ratio", r.right_ratio},      {"passed", r.passed}};
}

inline Json to_json(const OeBoundReport& r) {
  return Json{{"gamma", r.gamma},
              {"gamma_residual", r.gamma_residual},
              {"mse_oe", r.mse_oe},
              {"mse_iht", r.mse_iht},
              {"mse_base", r.mse_base},
              {"planted_extracted", r.planted_extracted},
              {"gamma_ok", r.gamma_ok},
              {"ordering_ok", r.ordering_ok}};
}

inline Json to_json(const StabilityRow& r) {
  std::string pats;
  for (OutlierPattern p : r.patterns) pats += pattern_char(p);
  return Json{{"tensor_id", r.tensor_id}, {"patterns", pats}, {"modal", pattern_str(r.modal)}, {"stability", r.stability}};
}

// ---------------------------------------------------------------------------
// Training

inline Json to_json(const ToyModelConfig& c) {
  return Json{{"layer_dims", c.layer_dims},
              {"activation", std::string(activation_name(c.activation))},
              {"batch", c.batch},
              {"steps_calib", c.steps_calib},
              {"steps_train", c.steps_train},
              {"lr", c.lr},
              {"seed", c.seed},
              {"teacher_hidden", c.teacher_hidden},
              {"input_outlier_channels", c.input_outlier_channels},
              {"input_outlier_scale", c.input_outlier_scale},
              {"loss_window", c.loss_window},
              {"tau", c.detection.tau},
              {"block", c.engine.hadamard.block_size},
              {"k", c.engine.k_extract},
              {"probe", c.engine.probe}};
}

inline Json to_json(const TrainReport& rep) {
  Json runs = Json::array();
  for (const auto& r : rep.runs) {
    Json j{{"backend", std::string(backend_name(r.backend))}, {"failed", r.failed}};
    if (r.failed) j["failure"] = r.failure;
    j["final_loss"] = r.final_loss ? Json(*r.final_loss) : Json(nullptr);
    const auto gap = rep.gap(r.backend);
    j["gap"] = gap ? Json(*gap) : Json(nullptr);
    if (is_adahop(r.backend)) {
      Json cal = Json::array();
      for (const auto& c : r.calibration) cal.push_back(to_json(c));
      j["calibration"] = cal;
      j["plan"] = r.plan ? to_json(*r.plan) : Json(nullptr);
    }
    j["losses"] = r.losses;
    runs.push_back(std::move(j));
  }
  return Json{{"config", to_json(rep.config)}, {"runs", runs}};
}

/// step,backend,loss with steps counted from 0.
inline std::string loss_csv(const TrainReport& rep) {
  std::string out = "step,backend,loss\n";
  for (const auto& r : rep.runs)
    for (std::size_t s = 0; s < r.losses.size(); ++s)
      out += std::to_string(s) + "," + std::string(backend_name(r.backend)) + "," + format_number(r.losses[s]) + "\n";
  return out;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace adahop
