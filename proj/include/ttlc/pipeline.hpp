#pragma once

#include <chrono>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ttlc/dataset.hpp"
#include "ttlc/hyperparams.hpp"
#include "ttlc/io.hpp"
#include "ttlc/train.hpp"

namespace ttlc {

namespace seed_tag {
inline constexpr std::uint64_t kOuterSplit = 11;
inline constexpr std::uint64_t kCvUndersample = 12;
inline constexpr std::uint64_t kModelInit = 13;
inline constexpr std::uint64_t kTrainLoop = 14;
inline constexpr std::uint64_t kFinalSplit = 15;
}  // namespace seed_tag

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return Rng::keyed(seed, {a, b}).next_u64();
}

// ---------------------------------------------------------------------------
// Fold preparation
// ---------------------------------------------------------------------------

// Everything one cross-validation fold trains on. Undersampling and scaler
// statistics are functions of the training folds only; the validation fold
// contributes nothing to either.
struct FoldData {
  SampleSet scaled;  // standardized copy of the full set
  FeatureScaler scaler;
  std::vector<SampleRef> train_refs;
  std::vector<SampleRef> val_refs;
};

inline FoldData prepare_fold(const SampleSet& set,
                             const std::vector<std::vector<SampleRef>>& folds,
                             std::size_t val_index, std::size_t window_steps,
                             std::uint64_t seed) {
  if (val_index >= folds.size()) throw ConfigError("validation fold index out of range");
  if (set.scaled) throw ConfigError("prepare_fold expects an unstandardized sample set");
  FoldData fd;
  for (std::size_t k = 0; k < folds.size(); ++k)
    if (k != val_index)
      fd.train_refs.insert(fd.train_refs.end(), folds[k].begin(), folds[k].end());
  fd.val_refs = folds[val_index];
  if (fd.train_refs.empty() || fd.val_refs.empty())
    throw ConfigError("empty training or validation fold");

  // Undersampling is applied inside each training split, with the selection
  // stream keyed by the run seed alone so that symmetric inputs produce
  // symmetric folds.
  fd.train_refs = undersample_flw(set, fd.train_refs, derive_seed(seed, seed_tag::kCvUndersample));
  fd.scaler = fit_scaler(set, fd.train_refs, window_steps);
  fd.scaled = set;
  apply_scaler(fd.scaled, fd.scaler);
  return fd;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct FoldOutcome {
  std::optional<double> val_mse;
  std::size_t best_epoch = 0;
  double wall_ms = 0.0;
  std::string error;
};

namespace detail {

inline FoldOutcome run_fold(const SampleSet& set,
                            const std::vector<std::vector<SampleRef>>& folds,
                            std::size_t val_index, const Hyperparams& hp,
                            const TrainConfig& base_cfg, std::uint64_t seed,
                            std::uint64_t combo_index) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t T = hp.time_steps();
  FoldData fd = prepare_fold(set, folds, val_index, T, seed);

  ModelParams model =
      init_model(hp, kFeatureCount, derive_seed(seed, seed_tag::kModelInit, combo_index));
  TrainConfig cfg = base_cfg;
  cfg.alpha = hp.alpha;
  cfg.seed = derive_seed(seed, seed_tag::kTrainLoop, combo_index);

  TrainSet tr = make_train_set(fd.scaled, fd.train_refs, T);
  TrainSet va = make_train_set(fd.scaled, fd.val_refs, T);
  TrainResult res = train(std::move(model), tr, va, cfg);

  FoldOutcome out;
  out.val_mse = res.trace.best_val_mse;
  out.best_epoch = res.trace.best_epoch;
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace detail

// Trains k models, one per held-out fold, and returns their validation MSEs.
// Divergence in any fold propagates as TrainingError.
inline std::vector<double> cross_validate(const SampleSet& set, const Hyperparams& hp,
                                          std::size_t k, std::uint64_t seed,
                                          const TrainConfig& base_cfg,
                                          std::uint64_t combo_index = 0) {
  hp.validate();
  const auto refs = build_windows(set, hp.time_steps());
  const auto folds = split_folds(set, refs, k, seed);
  std::vector<double> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.push_back(*detail::run_fold(set, folds, i, hp, base_cfg, seed, combo_index).val_mse);
  return out;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct ComboResult {
  Hyperparams hp;
  std::vector<FoldOutcome> folds;
  std::optional<double> mean_val_mse;  // empty when the combination failed

  bool failed() const { return !mean_val_mse.has_value(); }
};

struct GridResult {
  std::vector<ComboResult> combos;
  std::size_t best_index = 0;

  const ComboResult& best() const { return combos[best_index]; }

  std::string to_csv() const {
    std::string out = "combo,n_lstm,n_dense,t_h,alpha,fold,status,val_mse,best_epoch,wall_ms\n";
    for (std::size_t c = 0; c < combos.size(); ++c) {
      const ComboResult& cr = combos[c];
      for (std::size_t f = 0; f < cr.folds.size(); ++f) {
        const FoldOutcome& fo = cr.folds[f];
        out += std::to_string(c) + "," + std::to_string(cr.hp.n_lstm) + "," +
               std::to_string(cr.hp.n_dense) + "," + fmt_double(cr.hp.t_h) + "," +
               fmt_double(cr.hp.alpha) + "," + std::to_string(f) + "," +
               (fo.val_mse ? "ok" : "diverged") + "," +
               (fo.val_mse ? fmt_double(*fo.val_mse) : std::string()) + "," +
               std::to_string(fo.best_epoch) + "," + fmt_double(fo.wall_ms) + "\n";
      }
    }
    return out;
  }

  Json summary_json() const {
    Json j;
    Json arr = Json::array();
    for (std::size_t c = 0; c < combos.size(); ++c) {
      const ComboResult& cr = combos[c];
      Json cj;
      cj["combo"] = c;
      cj["n_lstm"] = cr.hp.n_lstm;
      cj["n_dense"] = cr.hp.n_dense;
      cj["t_h"] = cr.hp.t_h;
      cj["alpha"] = cr.hp.alpha;
      if (cr.mean_val_mse)
        cj["mean_val_mse"] = *cr.mean_val_mse;
      else
        cj["mean_val_mse"] = nullptr;
      Json folds = Json::array();
      for (const FoldOutcome& fo : cr.folds) {
        Json fj;
        fj["val_mse"] = fo.val_mse ? Json(*fo.val_mse) : Json(nullptr);
        fj["best_epoch"] = fo.best_epoch;
        if (!fo.error.empty()) fj["error"] = fo.error;
        folds.push_back(std::move(fj));
      }
      cj["folds"] = std::move(folds);
      arr.push_back(std::move(cj));
    }
    j["combinations"] = std::move(arr);
    const ComboResult& b = best();
    j["best"] = {{"combo", best_index}, {"n_lstm", b.hp.n_lstm},  {"n_dense", b.hp.n_dense},
                 {"t_h", b.hp.t_h},     {"alpha", b.hp.alpha},
                 {"mean_val_mse", b.mean_val_mse ? Json(*b.mean_val_mse) : Json(nullptr)}};
    return j;
  }
};

// Exhaustively evaluates every combination with the shared fold partition.
// A diverging combination is recorded as failed, not fatal; ties on the mean
// break toward smaller n_lstm, n_dense, t_h and larger alpha.
inline GridResult grid_search(const SampleSet& set, const HyperGrid& grid, std::size_t k,
                              std::uint64_t seed, const TrainConfig& base_cfg) {
  const auto combos = grid.combinations();
  GridResult result;
  result.combos.reserve(combos.size());

  for (std::size_t c = 0; c < combos.size(); ++c) {
    ComboResult cr;
    cr.hp = combos[c];
    const auto refs = build_windows(set, cr.hp.time_steps());
    bool failed = false;
    std::vector<std::vector<SampleRef>> folds;
    try {
      folds = split_folds(set, refs, k, seed);
    } catch (const Error& e) {
      FoldOutcome fo;
      fo.error = e.what();
      cr.folds.push_back(std::move(fo));
      failed = true;
    }
    if (!failed) {
      double acc = 0.0;
      for (std::size_t f = 0; f < k; ++f) {
        try {
          cr.folds.push_back(detail::run_fold(set, folds, f, cr.hp, base_cfg, seed, c));
          acc += *cr.folds.back().val_mse;
        } catch (const TrainingError& e) {
          FoldOutcome fo;
          fo.error = e.what();
          cr.folds.push_back(std::move(fo));
          failed = true;
          break;
        }
      }
      if (!failed) cr.mean_val_mse = acc / static_cast<double>(k);
    }
    result.combos.push_back(std::move(cr));
  }

  bool any = false;
  auto better = [](const ComboResult& a, const ComboResult& b) {
    if (*a.mean_val_mse != *b.mean_val_mse) return *a.mean_val_mse < *b.mean_val_mse;
    if (a.hp.n_lstm != b.hp.n_lstm) return a.hp.n_lstm < b.hp.n_lstm;
    if (a.hp.n_dense != b.hp.n_dense) return a.hp.n_dense < b.hp.n_dense;
    if (a.hp.t_h != b.hp.t_h) return a.hp.t_h < b.hp.t_h;
    return a.hp.alpha > b.hp.alpha;
  };
  for (std::size_t c = 0; c < result.combos.size(); ++c) {
    if (result.combos[c].failed()) continue;
    if (!any || better(result.combos[c], result.combos[result.best_index])) {
      result.best_index = c;
      any = true;
    }
  }
  if (!any) throw PipelineError("every grid combination failed");
  return result;
}

// ---------------------------------------------------------------------------
// Final training
// ---------------------------------------------------------------------------

struct FinalTrainResult {
  ModelParams model;  // scaler and hyperparameters embedded
  TrainTrace trace;
};

// Trains on all but one internal fold (undersampled, standardized) and uses
// the held-out fold for early stopping. The returned model carries the
// fitted scaler and its hyperparameters, ready for persistence.
inline FinalTrainResult train_final(const SampleSet& set, const Hyperparams& hp,
                                    std::uint64_t seed, const TrainConfig& base_cfg,
                                    std::size_t k = 5) {
  hp.validate();
  const std::size_t T = hp.time_steps();
  const auto refs = build_windows(set, T);
  const auto folds =
      split_folds(set, refs, k, derive_seed(seed, seed_tag::kFinalSplit));
  FoldData fd = prepare_fold(set, folds, 0, T, seed);

  ModelParams model = init_model(hp, kFeatureCount, derive_seed(seed, seed_tag::kModelInit));
  TrainConfig cfg = base_cfg;
  cfg.alpha = hp.alpha;
  cfg.seed = derive_seed(seed, seed_tag::kTrainLoop);

  TrainSet tr = make_train_set(fd.scaled, fd.train_refs, T);
  TrainSet va = make_train_set(fd.scaled, fd.val_refs, T);
  TrainResult res = train(std::move(model), tr, va, cfg);

  res.model.scaler = fd.scaler;
  res.model.hyper = hp;
  res.model.validate();
  return FinalTrainResult{std::move(res.model), std::move(res.trace)};
}

// ---------------------------------------------------------------------------
// Outer test-fold reservation
// ---------------------------------------------------------------------------

// Assigns whole vehicles to k outer folds; fold `test_fold` is the untouched
// evaluation set, everything else feeds tuning and training.
struct OuterSplit {
  SampleSet work;  // folds other than the test fold
  SampleSet test;
};

inline OuterSplit reserve_test_fold(const SampleSet& set, std::size_t k, std::size_t test_fold,
                                    std::uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 outer folds");
  if (test_fold >= k) throw ConfigError("test fold index out of range");
  if (set.series.size() < k) throw ConfigError("fewer vehicles than outer folds");

  std::vector<std::uint32_t> vehicles(set.series.size());
  for (std::uint32_t i = 0; i < vehicles.size(); ++i) vehicles[i] = i;
  Rng rng = Rng::keyed(derive_seed(seed, seed_tag::kOuterSplit), {rng_stream::kFolds});
  rng.shuffle(vehicles);

  OuterSplit out;
  out.work.default_t_h = out.test.default_t_h = set.default_t_h;
  out.work.provenance = set.provenance;
  out.test.provenance = set.provenance;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const SampleSet& src = set;
    SampleSet& dst = (i % k == test_fold) ? out.test : out.work;
    dst.series.push_back(src.series[vehicles[i]]);
  }
  auto by_id = [](const VehicleSeries& a, const VehicleSeries& b) {
    return a.vehicle_id < b.vehicle_id;
  };
  std::sort(out.work.series.begin(), out.work.series.end(), by_id);
  std::sort(out.test.series.begin(), out.test.series.end(), by_id);
  return out;
}

// ---------------------------------------------------------------------------
// Grid config file
// ---------------------------------------------------------------------------

inline Json grid_to_json(const HyperGrid& g) {
  Json j;
  j["n_lstm"] = g.n_lstm;
  j["n_dense"] = g.n_dense;
  j["t_h"] = g.t_h;
  j["alpha"] = g.alpha;
  return j;
}

inline HyperGrid grid_from_json(const Json& j) {
  HyperGrid g;
  try {
    if (j.contains("n_lstm")) g.n_lstm = j.at("n_lstm").get<std::vector<int>>();
    if (j.contains("n_dense")) g.n_dense = j.at("n_dense").get<std::vector<int>>();
    if (j.contains("t_h")) g.t_h = j.at("t_h").get<std::vector<double>>();
    if (j.contains("alpha")) g.alpha = j.at("alpha").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad grid config: ") + e.what());
  }
  g.validate();
  return g;
}

}  // namespace ttlc
