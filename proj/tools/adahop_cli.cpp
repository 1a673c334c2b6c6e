// adahop: command-line front end for the MXFP4 emulation library.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adahop/adahop.hpp"

namespace fs = std::filesystem;
using namespace adahop;

namespace {

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || !std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw InputError(std::string(what) + ": '" + text + "' is not a comma-separated list of integers");
    out.push_back(std::stoul(item));
  }
  if (out.empty()) throw InputError(std::string(what) + ": empty list");
  return out;
}

MatmulDims parse_dims(const std::string& text) {
  const auto v = parse_sizes(text, "--dims");
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw InputError("--dims takes one value or R,K,N");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `out` atomically, or to stdout when no path was given.
void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text_atomic(out, text);
  }
}

struct EngineFlags {
  std::size_t k = kDefaultExtract;
  std::size_t probe = kDefaultProbe;
  std::size_t block = 32;

  void add(CLI::App* app) {
    app->add_option("--k", k, "Rows/columns moved to the high-precision path by extraction")->capture_default_str();
    app->add_option("--probe", probe, "Prefix length used to rank rows/columns by variance")->capture_default_str();
    app->add_option("--block", block, "Hadamard block size (power of two)")->capture_default_str();
  }

  EngineConfig config() const {
    EngineConfig e;
    e.k_extract = k;
    e.probe = probe;
    e.hadamard.block_size = block;
    e.hadamard.validate();
    if (k == 0) throw InputError("--k must be at least 1");
    return e;
  }
};

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(first + i);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MXFP4 matmul emulation with outlier-pattern-aware Hadamard and extraction strategies"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // gen
  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 42;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic tensor from a JSON spec and write it as AHT1");
  gen->add_option("--spec", gen_spec,
                  "JSON object with rows, cols, pattern (R|C|N), outlier_count, outlier_scale, seed, "
                  "target_kurtosis, planted; missing keys take defaults")
      ->required();
  gen->add_option("--out", gen_out, "Output AHT1 path")->required();
  gen->add_option("--seed", gen_seed, "Seed used when the spec has no \"seed\" key")->capture_default_str();

  // detect
  std::string det_in, det_out, det_norm = "raw";
  double det_tau = 2.0;
  auto* det = app.add_subcommand("detect", "Classify the outlier pattern of an AHT1 tensor");
  det->add_option("input", det_in, "AHT1 tensor")->required();
  det->add_option("--tau", det_tau, "CV threshold")->capture_default_str();
  det->add_option("--normalization", det_norm, "CV scaling: raw, or sqrtdim (divide by sqrt of slice length)")
      ->capture_default_str()
      ->check(CLI::IsMember({"raw", "sqrtdim"}));
  det->add_option("--out", det_out, "Write the result here instead of stdout");

  // calibrate
  std::string cal_dir, cal_out, cal_id;
  double cal_tau = 2.0;
  std::size_t cal_from = 0, cal_count = 0;
  auto* cal = app.add_subcommand("calibrate", "Majority-vote pattern over a directory of per-step AHT1 files");
  cal->add_option("dir", cal_dir, "Directory of *.aht files, taken in file-name order")->required();
  cal->add_option("--tau", cal_tau, "CV threshold")->capture_default_str();
  cal->add_option("--from", cal_from, "First step (index into the sorted file list)")->capture_default_str();
  cal->add_option("--count", cal_count, "Number of steps; 0 means all remaining")->capture_default_str();
  cal->add_option("--tensor-id", cal_id, "Id stored in the record (default: directory name)");
  cal->add_option("--out", cal_out, "Write the JSON record here instead of stdout");

  // sweep
  std::string sw_dims = "256", sw_out, sw_json, sw_level = "lv1";
  std::size_t sw_seeds = 3, sw_outliers = 2;
  double sw_kurt = kReferenceKurtosis, sw_scale = 100.0;
  bool sw_no_tune = false;
  std::uint64_t sw_seed = 42;
  EngineFlags sw_eng;
  auto* sw = app.add_subcommand("sweep", "MSE of plain, IHT, OHT and table strategies over the nine pattern pairs");
  sw->add_option("--dims", sw_dims, "M,K,N of the product, or one value for all three")->capture_default_str();
  sw->add_option("--seeds", sw_seeds, "Number of seeds (seed, seed+1, ...); at least 3")->capture_default_str();
  sw->add_option("--seed", sw_seed, "First seed")->capture_default_str();
  sw->add_option("--kurtosis", sw_kurt, "Target excess kurtosis of each outlier operand")->capture_default_str();
  sw->add_flag("--no-tune", sw_no_tune, "Use --scale as is instead of tuning it to --kurtosis");
  sw->add_option("--outliers", sw_outliers, "Planted outlier rows/columns per outlier operand")->capture_default_str();
  sw->add_option("--scale", sw_scale, "Outlier scale when not tuning")->capture_default_str();
  sw->add_option("--level", sw_level, "Strategy table level, lv1 or lv2")
      ->capture_default_str()
      ->check(CLI::IsMember({"lv1", "lv2", "Lv1", "Lv2"}));
  sw_eng.add(sw);
  sw->add_option("--out", sw_out, "CSV output path (default stdout)");
  sw->add_option("--json", sw_json, "Also write per-seed detail as JSON here");

  // verify-theory
  std::size_t vt_m = 256, vt_seeds = 5, vt_planted = 8;
  std::string vt_dims = "256", vt_out;
  double vt_scale = 200.0, vt_gamma_scale = 1000.0, vt_limit = 10.0;
  std::uint64_t vt_seed = 42;
  bool vt_strict = false;
  EngineFlags vt_eng;
  auto* vt = app.add_subcommand("verify-theory", "Outlier-factor reduction and extraction error checks");
  vt->add_option("--m", vt_m, "Size of the square tensors for the transform check (power of two >= 64)")
      ->capture_default_str();
  vt->add_option("--seeds", vt_seeds, "Number of seeds (seed, seed+1, ...)")->capture_default_str();
  vt->add_option("--seed", vt_seed, "First seed")->capture_default_str();
  vt->add_option("--gamma-scale", vt_gamma_scale, "Scale of the single planted slice in the transform check")
      ->capture_default_str();
  vt->add_option("--dims", vt_dims, "M,K,N of the extraction check product")->capture_default_str();
  vt->add_option("--planted", vt_planted, "Planted outlier rows in the extraction check")->capture_default_str();
  vt->add_option("--scale", vt_scale, "Scale of the planted rows")->capture_default_str();
  vt->add_option("--gamma-limit", vt_limit, "Bound checked on the residual outlier factor")->capture_default_str();
  vt_eng.add(vt);
  vt->add_flag("--strict", vt_strict, "Exit 1 when any check fails");
  vt->add_option("--out", vt_out, "JSON output path (default stdout)");

  // train
  std::string tr_dims = "64,256,64", tr_out, tr_csv, tr_act = "relu";
  std::vector<std::string> tr_backends;
  ToyModelConfig tr_cfg;
  double tr_tau = 2.0;
  bool tr_identity = false;
  EngineFlags tr_eng;
  auto* tr = app.add_subcommand("train", "Teacher-student MLP under each matmul backend; reports loss gaps");
  tr->add_option("--dims", tr_dims, "Layer widths, each a multiple of 32")->capture_default_str();
  tr->add_option("--activation", tr_act, "relu or gelu")->capture_default_str()->check(
      CLI::IsMember({"relu", "gelu"}));
  tr->add_option("--batch", tr_cfg.batch, "Tokens per step (multiple of 32)")->capture_default_str();
  tr->add_option("--steps", tr_cfg.steps_train, "Training steps")->capture_default_str();
  tr->add_option("--calib", tr_cfg.steps_calib, "Full-precision calibration steps of the adaptive backends")
      ->capture_default_str();
  tr->add_option("--lr", tr_cfg.lr, "SGD learning rate")->capture_default_str();
  tr->add_option("--seed", tr_cfg.seed, "Seed for teacher, initialization and data")->capture_default_str();
  tr->add_option("--outlier-channels", tr_cfg.input_outlier_channels, "Input channels with a larger spread")
      ->capture_default_str();
  tr->add_option("--outlier-scale", tr_cfg.input_outlier_scale, "Standard deviation of those channels")
      ->capture_default_str();
  tr->add_option("--window", tr_cfg.loss_window, "Final loss is the mean over this many last steps")
      ->capture_default_str();
  tr->add_option("--tau", tr_tau, "CV threshold used during calibration")->capture_default_str();
  tr_eng.add(tr);
  tr->add_option("--backends", tr_backends,
                 "Subset of FullPrecision NaiveMXFP4 UniformIHT AdaHOPLv1 AdaHOPLv2 (default all)");
  tr->add_flag("--identity", tr_identity, "Replace the MXFP4 quantizer by the identity");
  tr->add_option("--out", tr_out, "JSON report path (default stdout)");
  tr->add_option("--csv", tr_csv, "Also write step,backend,loss CSV here");

  // stability
  std::string st_input, st_record, st_out, st_json, st_dims = "64,256,64";
  std::size_t st_steps = 40, st_warmup = 10;
  double st_tau = 2.0;
  ToyModelConfig st_cfg;
  auto* st = app.add_subcommand("stability", "Per-step detected pattern of every X, W and G_Y tensor");
  st->add_option("--input", st_input, "Directory of recorded <id>.stepNNNN.aht files; if absent the toy model is run");
  st->add_option("--steps", st_steps, "Recorded steps when running the toy model")->capture_default_str();
  st->add_option("--warmup", st_warmup, "Leading steps left out of the table and the score")->capture_default_str();
  st->add_option("--tau", st_tau, "CV threshold")->capture_default_str();
  st->add_option("--dims", st_dims, "Layer widths of the toy model")->capture_default_str();
  st->add_option("--batch", st_cfg.batch, "Tokens per step")->capture_default_str();
  st->add_option("--lr", st_cfg.lr, "SGD learning rate")->capture_default_str();
  st->add_option("--seed", st_cfg.seed, "Seed for the toy model")->capture_default_str();
  st->add_option("--record", st_record, "Also write the recorded tensors to this directory");
  st->add_option("--out", st_out, "CSV output path (default stdout)");
  st->add_option("--json", st_json, "Also write per-tensor modal pattern and stability here");

  // quantize
  std::string q_in, q_out, q_axis = "cols", q_stats;
  auto* qz = app.add_subcommand("quantize", "MXFP4 round trip of an AHT1 tensor, with error statistics");
  qz->add_option("input", q_in, "AHT1 tensor")->required();
  qz->add_option("--out", q_out, "Dequantized AHT1 output path")->required();
  qz->add_option("--axis", q_axis, "Block direction: cols (32 entries of a row) or rows (32 entries of a column)")
      ->capture_default_str()
      ->check(CLI::IsMember({"rows", "cols"}));
  qz->add_option("--stats", q_stats, "Write the statistics JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*gen) {
      Json j;
      try {
        j = Json::parse(read_text(gen_spec));
      } catch (const Json::parse_error& e) {
        throw InputError(gen_spec + ": " + e.what());
      }
      if (j.is_object() && !j.contains("seed")) j["seed"] = gen_seed;
      const SynthSpec spec = synth_spec_from_json(j);
      const SynthTensor t = generate_tensor(spec);
      write_matrix(gen_out, t.matrix);
      Json summary{{"rows", t.matrix.rows()},
                   {"cols", t.matrix.cols()},
                   {"pattern", pattern_str(spec.pattern)},
                   {"planted", t.planted},
                   {"outlier_scale", t.outlier_scale},
                   {"stats", to_json(matrix_stats(t.matrix))}};
      std::cout << dump(summary);
    } else if (*det) {
      DetectionConfig cfg;
      cfg.tau = det_tau;
      cfg.normalization = det_norm == "raw" ? CvNormalization::Raw : CvNormalization::SqrtDim;
      const DenseMatrix a = read_matrix(det_in);
      const CvPair cv = normalized_cvs(a, cfg);
      emit(std::string(1, pattern_char(classify_cvs(cv, cfg.tau))) + "\ncv_row " + format_number(cv.row_hat) +
               "\ncv_col " + format_number(cv.col_hat) + "\n",
           det_out);
    } else if (*cal) {
      DetectionConfig cfg;
      cfg.tau = cal_tau;
      if (!fs::is_directory(cal_dir)) throw IoError("not a directory", cal_dir);
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(cal_dir))
        if (e.is_regular_file() && e.path().extension() == ".aht") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (cal_from >= files.size()) throw InputError("no step files at or after --from in " + cal_dir);
      const std::size_t end = cal_count == 0 ? files.size() : std::min(files.size(), cal_from + cal_count);
      std::vector<DenseMatrix> stream;
      for (std::size_t i = cal_from; i < end; ++i) stream.push_back(read_matrix(files[i]));
      std::string id = cal_id;
      if (id.empty()) id = fs::path(cal_dir).lexically_normal().filename().string();
      if (id.empty()) id = fs::path(cal_dir).lexically_normal().parent_path().filename().string();
      emit(dump(to_json(calibrate(stream, cfg, id))), cal_out);
    } else if (*sw) {
      SweepConfig cfg;
      cfg.dims = parse_dims(sw_dims);
      cfg.seeds = seed_list(sw_seed, sw_seeds);
      cfg.synth.outlier_count = sw_outliers;
      cfg.synth.outlier_scale = sw_scale;
      cfg.synth.target_kurtosis = sw_no_tune ? std::nullopt : std::optional<double>(sw_kurt);
      cfg.engine = sw_eng.config();
      cfg.level = parse_level(sw_level);
      const auto results = sweep_pairs(cfg);
      if (!sw_json.empty()) {
        Json arr = Json::array();
        for (const auto& r : results) arr.push_back(to_json(r));
        write_text_atomic(sw_json, dump(arr));
      }
      emit(sweep_csv(results), sw_out);
    } else if (*vt) {
      OeBoundConfig oe;
      oe.dims = parse_dims(vt_dims);
      oe.planted_rows = vt_planted;
      oe.outlier_scale = vt_scale;
      oe.engine = vt_eng.config();
      oe.gamma_residual_limit = vt_limit;
      bool ok = true;
      Json gamma = Json::array(), bound = Json::array();
      for (std::uint64_t s : seed_list(vt_seed, vt_seeds)) {
        for (OutlierPattern p : {OutlierPattern::Row, OutlierPattern::Column, OutlierPattern::None}) {
          const GammaReport g = verify_gamma_reduction(vt_m, s, p, vt_gamma_scale);
          ok = ok && g.passed;
          Json j = to_json(g);
          j["seed"] = s;
          gamma.push_back(std::move(j));
        }
        const OeBoundReport r = verify_oe_bound(oe, s);
        ok = ok && r.gamma_ok && r.ordering_ok;
        Json j = to_json(r);
        j["seed"] = s;
        bound.push_back(std::move(j));
      }
      emit(dump(Json{{"gamma_reduction", gamma}, {"oe_bound", bound}, {"all_passed", ok}}), vt_out);
      if (vt_strict && !ok) return 1;
    } else if (*tr) {
      ToyModelConfig cfg = tr_cfg;
      cfg.layer_dims = parse_sizes(tr_dims, "--dims");
      cfg.activation = parse_activation(tr_act);
      cfg.detection.tau = tr_tau;
      cfg.engine = tr_eng.config();
      if (tr_identity) cfg.engine.quantizer = Quantizer::identity();
      std::vector<Backend> backends;
      for (const auto& b : tr_backends) backends.push_back(parse_backend(b));
      const TrainReport rep = backends.empty() ? train(cfg) : train(cfg, backends);
      if (!tr_csv.empty()) write_text_atomic(tr_csv, loss_csv(rep));
      emit(dump(to_json(rep)), tr_out);
    } else if (*st) {
      DetectionConfig det_cfg;
      det_cfg.tau = st_tau;
      std::map<std::string, std::vector<DenseMatrix>> streams;
      if (!st_input.empty()) {
        streams = load_streams(st_input);
      } else {
        ToyModelConfig cfg = st_cfg;
        cfg.layer_dims = parse_sizes(st_dims, "--dims");
        if (!st_record.empty()) record_streams(cfg, st_steps, st_record);
        streams = collect_streams(cfg, st_steps);
      }
      const auto rows = track_stability(streams, det_cfg, st_warmup);
      if (!st_json.empty()) {
        Json arr = Json::array();
        for (const auto& r : rows) arr.push_back(to_json(r));
        write_text_atomic(st_json, dump(arr));
      }
      emit(stability_csv(rows, st_warmup), st_out);
    } else if (*qz) {
      const DenseMatrix a = read_matrix(q_in);
      const BlockAxis axis = q_axis == "cols" ? BlockAxis::AlongCols : BlockAxis::AlongRows;
      const DenseMatrix dq = dequantize(quantize(a, axis));
      write_matrix(q_out, dq);
      const double norm = frobenius_norm(a);
      double max_err = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i)
        max_err = std::max(max_err, std::fabs(static_cast<double>(a.data()[i]) - dq.data()[i]));
      Json stats{{"rows", a.rows()},
                 {"cols", a.cols()},
                 {"axis", q_axis},
                 {"blocks", a.size() / kMxBlock},
                 {"mse", mse(dq, a)},
                 {"max_abs_error", max_err},
                 {"rel_frob_error", norm == 0.0 ? 0.0 : frobenius_norm(add(dq, scaled(a, -1.0f))) / norm},
                 {"block_epsilon", measured_quant_epsilon(a, axis)}};
      emit(dump(stats), q_stats);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << " (" << e.path() << ")\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << " at byte " << e.offset() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
