#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ttlc/dataset.hpp"
#include "ttlc/eval.hpp"
#include "ttlc/model_io.hpp"
#include "ttlc/pipeline.hpp"
#include "ttlc/synthgen.hpp"

namespace ttlc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// State directory: manifest + lock
// ---------------------------------------------------------------------------

// Guards a state directory against concurrent commands. The lock file is
// created exclusively and removed when the command finishes.
class StateLock {
 public:
  explicit StateLock(const fs::path& state_dir) : path_(state_dir / ".lock") {
    std::error_code ec;
    fs::create_directories(state_dir, ec);
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr)
      throw IoError("state directory is locked (" + path_.string() +
                    " exists); remove it if no other command is running");
    std::fclose(f);
  }
  ~StateLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  StateLock(const StateLock&) = delete;
  StateLock& operator=(const StateLock&) = delete;

 private:
  fs::path path_;
};

// Append-only provenance log: which command with which seed produced which
// artifacts. Deliberately free of timestamps so reruns are byte-identical.
class Manifest {
 public:
  explicit Manifest(const fs::path& state_dir) : path_(state_dir / "manifest.json") {
    if (fs::exists(path_)) {
      doc_ = load_json(path_);
    } else {
      doc_["format_version"] = 1;
      doc_["entries"] = Json::array();
    }
  }

  void record(const std::string& command, std::uint64_t seed, Json params,
              std::vector<std::string> outputs) {
    Json e;
    e["command"] = command;
    e["seed"] = seed;
    e["params"] = std::move(params);
    e["outputs"] = outputs;
    doc_["entries"].push_back(std::move(e));
    save_json(path_, doc_);
  }

  // Most recent entry for a command, if any.
  std::optional<Json> last(const std::string& command) const {
    const Json& entries = doc_.at("entries");
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
      if ((*it).at("command").get<std::string>() == command) return *it;
    return std::nullopt;
  }

 private:
  fs::path path_;
  Json doc_;
};

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

inline ScenarioConfig scenario_from_json(const Json& j, ScenarioConfig base = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_vehicles", base.num_vehicles);
  get("num_lanes", base.num_lanes);
  get("lane_width", base.lane_width);
  get("duration_s", base.duration_s);
  get("lane_change_rate_per_min", base.lane_change_rate_per_min);
  get("lc_duration_min", base.lc_duration_min);
  get("lc_duration_max", base.lc_duration_max);
  get("speed_min", base.speed_min);
  get("speed_max", base.speed_max);
  get("observation_length_m", base.observation_length_m);
  get("prep_duration_min", base.prep_duration_min);
  get("prep_duration_max", base.prep_duration_max);
  get("prep_drift_m", base.prep_drift_m);
  return base;
}

struct GenerateOptions {
  fs::path state_dir = ".";
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
};

// Writes recordings/rec_000.csv plus metadata and ground-truth crossings.
inline fs::path cmd_generate(const GenerateOptions& opt) {
  StateLock lock(opt.state_dir);
  ScenarioConfig cfg = opt.scenario;
  cfg.seed = opt.seed;
  GeneratedScenario scenario = generate(cfg);

  const fs::path rec_dir = opt.state_dir / "recordings";
  const fs::path csv = rec_dir / "rec_000.csv";
  save_scenario(csv, scenario);

  Manifest manifest(opt.state_dir);
  Json params;
  params["num_vehicles"] = cfg.num_vehicles;
  params["num_lanes"] = cfg.num_lanes;
  params["duration_s"] = cfg.duration_s;
  params["lane_change_rate_per_min"] = cfg.lane_change_rate_per_min;
  manifest.record("generate", opt.seed, std::move(params), {"recordings/rec_000.csv"});

  std::printf("generated %zu observed vehicles, %zu lane crossings -> %s\n",
              scenario.recording.vehicles.size(), scenario.crossings.size(),
              csv.string().c_str());
  return csv;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareOptions {
  fs::path state_dir = ".";
  std::uint64_t seed = 0;
  double t_h = 3.0;                // records the default window length
  std::vector<fs::path> inputs;    // empty: every recordings/*.csv in order
};

inline fs::path cmd_prepare(const PrepareOptions& opt) {
  StateLock lock(opt.state_dir);
  std::vector<fs::path> inputs = opt.inputs;
  if (inputs.empty()) {
    const fs::path rec_dir = opt.state_dir / "recordings";
    if (fs::is_directory(rec_dir))
      for (const auto& entry : fs::directory_iterator(rec_dir))
        if (entry.path().extension() == ".csv") inputs.push_back(entry.path());
    std::sort(inputs.begin(), inputs.end());
  }
  if (inputs.empty()) throw InputError("no recordings to prepare (run `ttlc generate` first)");

  SampleSet set;
  std::string provenance = "seed=" + std::to_string(opt.seed);
  for (const fs::path& csv : inputs) {
    append_recording(set, load_recording(csv));
    provenance += " " + csv.filename().string();
  }
  set.default_t_h = opt.t_h;
  set.provenance = provenance;

  const fs::path out = opt.state_dir / "dataset.bin";
  save_dataset(out, set);

  const std::size_t T = Hyperparams{1, 1, opt.t_h, 1.0}.time_steps();
  const auto refs = build_windows(set, T);
  const ManeuverCounts counts = count_maneuvers(set, refs);

  Manifest manifest(opt.state_dir);
  Json params;
  params["t_h"] = opt.t_h;
  params["time_steps"] = T;
  params["inputs"] = Json::array();
  for (const fs::path& p : inputs) params["inputs"].push_back(p.filename().string());
  params["samples"] = {{"LCL", counts.lcl}, {"FLW", counts.flw}, {"LCR", counts.lcr}};
  manifest.record("prepare", opt.seed, std::move(params), {"dataset.bin"});

  std::printf("prepared %zu vehicles, %zu frames; windows(T=%zu): %zu  LCL=%zu FLW=%zu LCR=%zu\n",
              set.series.size(), set.total_frames(), T, refs.size(), counts.lcl, counts.flw,
              counts.lcr);
  return out;
}

// ---------------------------------------------------------------------------
// gridsearch
// ---------------------------------------------------------------------------

struct GridSearchOptions {
  fs::path state_dir = ".";
  std::uint64_t seed = 0;
  std::optional<fs::path> grid_file;
  std::size_t folds = 5;
  std::size_t test_fold = 0;
  TrainConfig train;
};

inline GridResult cmd_gridsearch(const GridSearchOptions& opt) {
  StateLock lock(opt.state_dir);
  SampleSet set = load_dataset(opt.state_dir / "dataset.bin");
  HyperGrid grid = opt.grid_file ? grid_from_json(load_json(*opt.grid_file)) : HyperGrid{};

  OuterSplit split = reserve_test_fold(set, opt.folds, opt.test_fold, opt.seed);
  GridResult result = grid_search(split.work, grid, opt.folds, opt.seed, opt.train);

  write_file(opt.state_dir / "grid_results.csv", result.to_csv());
  save_json(opt.state_dir / "grid_summary.json", result.summary_json());

  Manifest manifest(opt.state_dir);
  Json params;
  params["folds"] = opt.folds;
  params["test_fold"] = opt.test_fold;
  params["combinations"] = result.combos.size();
  manifest.record("gridsearch", opt.seed, std::move(params),
                  {"grid_results.csv", "grid_summary.json"});

  const ComboResult& best = result.best();
  std::printf("evaluated %zu combinations; best: %s (mean val MSE %.6f)\n", result.combos.size(),
              best.hp.describe().c_str(), *best.mean_val_mse);
  return result;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  fs::path state_dir = ".";
  std::uint64_t seed = 0;
  std::optional<Hyperparams> hyper;  // empty: take the grid search winner
  std::size_t folds = 5;
  std::size_t test_fold = 0;
  TrainConfig train;
};

inline FinalTrainResult cmd_train(const TrainOptions& opt) {
  StateLock lock(opt.state_dir);
  SampleSet set = load_dataset(opt.state_dir / "dataset.bin");

  Hyperparams hp;
  if (opt.hyper) {
    hp = *opt.hyper;
  } else {
    const fs::path summary = opt.state_dir / "grid_summary.json";
    if (!fs::exists(summary))
      throw InputError("no hyperparameters given and no grid_summary.json present");
    const Json j = load_json(summary).at("best");
    hp = Hyperparams{j.at("n_lstm").get<int>(), j.at("n_dense").get<int>(),
                     j.at("t_h").get<double>(), j.at("alpha").get<double>()};
  }
  if (hp.t_h <= 0.0) hp.t_h = set.default_t_h;

  OuterSplit split = reserve_test_fold(set, opt.folds, opt.test_fold, opt.seed);
  FinalTrainResult result = train_final(split.work, hp, opt.seed, opt.train, opt.folds);

  save_model(opt.state_dir / "model.json", result.model);
  write_file(opt.state_dir / "train_trace.csv", result.trace.to_csv());

  Manifest manifest(opt.state_dir);
  Json params;
  params["n_lstm"] = hp.n_lstm;
  params["n_dense"] = hp.n_dense;
  params["t_h"] = hp.t_h;
  params["alpha"] = hp.alpha;
  params["folds"] = opt.folds;
  params["test_fold"] = opt.test_fold;
  manifest.record("train", opt.seed, std::move(params), {"model.json", "train_trace.csv"});

  std::printf("trained %s; best val MSE %.6f at epoch %zu (%zu epochs run)\n",
              hp.describe().c_str(), result.trace.best_val_mse, result.trace.best_epoch,
              result.trace.epochs.size());
  return result;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  fs::path state_dir = ".";
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::size_t test_fold = 0;
  bool balanced = true;
  bool undersampled = true;
  double horizon = kClassificationHorizon;  // documented; Eq. 2 logic is fixed
  double bin_width = 0.25;
  ImportanceMode importance_mode = ImportanceMode::Absolute;
};

struct EvaluateResult {
  RmseTable table;
  ClassReport balanced_report;
  ClassReport undersampled_report;
  TtlcBinStats bins_left;
  TtlcBinStats bins_right;
};

inline EvaluateResult cmd_evaluate(const EvaluateOptions& opt) {
  StateLock lock(opt.state_dir);
  SampleSet set = load_dataset(opt.state_dir / "dataset.bin");
  ModelParams model = load_model(opt.state_dir / "model.json");

  // The split reservation must match what training used, otherwise the
  // "untouched test fold" claim is void.
  Manifest manifest(opt.state_dir);
  if (const auto train_entry = manifest.last("train")) {
    const Json& p = train_entry->at("params");
    if (p.at("test_fold").get<std::size_t>() != opt.test_fold ||
        p.at("folds").get<std::size_t>() != opt.folds ||
        train_entry->at("seed").get<std::uint64_t>() != opt.seed)
      throw ConfigError(
          "evaluate split (seed/folds/test fold) differs from the recorded training split; "
          "this would not evaluate the untouched test fold");
  }

  OuterSplit split = reserve_test_fold(set, opt.folds, opt.test_fold, opt.seed);
  const std::size_t T = model.hyper.time_steps();
  const auto test_refs = build_windows(split.test, T);
  if (test_refs.empty()) throw InputError("test fold yields no windows at this t_h");

  EvaluateResult result;
  const fs::path eval_dir = opt.state_dir / "eval";
  Json report;
  report["format_version"] = 1;
  report["test_fold"] = opt.test_fold;
  report["window_steps"] = T;
  report["test_samples"] = test_refs.size();

  if (opt.balanced) {
    const auto refs = balance_by_maneuver(split.test, test_refs, derive_seed(opt.seed, 31));
    result.table = rmse_table(model, split.test, refs, T);
    result.balanced_report = classification_report(model, split.test, refs, T, opt.horizon);
    write_file(eval_dir / "rmse_table.csv", result.table.to_csv());
    write_file(eval_dir / "class_report_balanced.csv", result.balanced_report.to_csv());
    Json b;
    b["samples"] = refs.size();
    for (int c = 0; c < 4; ++c) {
      const char* cols[4] = {"LCL", "FLW", "LCR", "All"};
      Json col;
      col["count"] = result.table.counts[c];
      col["overall"] = result.table.cells[0][c] ? Json(*result.table.cells[0][c]) : Json(nullptr);
      col["ttlcl"] = result.table.cells[1][c] ? Json(*result.table.cells[1][c]) : Json(nullptr);
      col["ttlcr"] = result.table.cells[2][c] ? Json(*result.table.cells[2][c]) : Json(nullptr);
      b["rmse"][cols[c]] = std::move(col);
    }
    b["mean_f1"] = result.balanced_report.mean_f1 ? Json(*result.balanced_report.mean_f1)
                                                  : Json(nullptr);
    report["balanced"] = std::move(b);
  }

  if (opt.undersampled) {
    const auto refs = undersample_flw(split.test, test_refs, derive_seed(opt.seed, 32));
    result.undersampled_report = classification_report(model, split.test, refs, T, opt.horizon);
    result.bins_left = ttlc_bin_stats(model, split.test, refs, T, opt.bin_width,
                                      TtlcChannel::Left);
    result.bins_right = ttlc_bin_stats(model, split.test, refs, T, opt.bin_width,
                                       TtlcChannel::Right);
    write_file(eval_dir / "class_report_undersampled.csv", result.undersampled_report.to_csv());
    write_file(eval_dir / "bins_left.csv", result.bins_left.to_csv());
    write_file(eval_dir / "bins_right.csv", result.bins_right.to_csv());
    Json u;
    u["samples"] = refs.size();
    u["mean_f1"] = result.undersampled_report.mean_f1 ? Json(*result.undersampled_report.mean_f1)
                                                      : Json(nullptr);
    report["undersampled"] = std::move(u);
  }

  const Vec importance = feature_importance(model, opt.importance_mode);
  write_file(eval_dir / "importance.csv", importance_to_csv(importance));
  report["importance_mode"] =
      opt.importance_mode == ImportanceMode::Absolute ? "absolute" : "signed";
  save_json(eval_dir / "report.json", report);

  Json params;
  params["folds"] = opt.folds;
  params["test_fold"] = opt.test_fold;
  params["balanced"] = opt.balanced;
  params["undersampled"] = opt.undersampled;
  params["bin_width"] = opt.bin_width;
  manifest.record("evaluate", opt.seed, std::move(params), {"eval/report.json"});

  std::printf("evaluation written to %s\n", (eval_dir / "report.json").string().c_str());
  return result;
}

// ---------------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------------

struct ImportanceOptions {
  fs::path state_dir = ".";
  std::optional<fs::path> model_path;
  ImportanceMode mode = ImportanceMode::Absolute;
};

inline Vec cmd_importance(const ImportanceOptions& opt) {
  const fs::path path = opt.model_path ? *opt.model_path : opt.state_dir / "model.json";
  ModelParams model = load_model(path);
  const Vec imp = feature_importance(model, opt.mode);
  write_file(opt.state_dir / "importance.csv", importance_to_csv(imp));
  for (std::size_t f = 0; f < imp.size(); ++f)
    std::printf("%-10s %.6f\n", kFeatureNames[f], imp[f]);
  return imp;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOptions {
  fs::path model_path;
  fs::path window_path;  // CSV: feature-name header + T rows of 21 values
};

inline Mat load_window_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0, line_no = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (!saw_header) {
      if (cells.size() != kFeatureCount || cells[0] != kFeatureNames[0])
        throw ParseError("window CSV must start with the 21-feature header");
      saw_header = true;
      continue;
    }
    if (cells.size() != kFeatureCount)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(kFeatureCount) + " values");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("window CSV contains no data rows");
  Mat m(rows.size(), kFeatureCount);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < kFeatureCount; ++c) m(r, c) = rows[r][c];
  return m;
}

inline Prediction cmd_predict(const PredictOptions& opt) {
  ModelParams model = load_model(opt.model_path);
  Mat window = load_window_csv(opt.window_path);
  if (window.rows != model.hyper.time_steps())
    throw InputError("window has " + std::to_string(window.rows) + " rows but the model expects " +
                     std::to_string(model.hyper.time_steps()));
  const Prediction p = predict(model, as_window(window));
  const Maneuver label = classify_from_ttlc(p.ttlcl, p.ttlcr);
  std::printf("ttlcl=%.4f ttlcr=%.4f label=%s\n", p.ttlcl, p.ttlcr, to_string(label));
  return p;
}

}  // namespace ttlc
