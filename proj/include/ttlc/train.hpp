#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ttlc/adam.hpp"
#include "ttlc/common.hpp"
#include "ttlc/io.hpp"
#include "ttlc/nn.hpp"
#include "ttlc/rng.hpp"

namespace ttlc {

// A materialized batch source: window views plus regression targets.
struct TrainSet {
  std::vector<WindowView> windows;
  std::vector<std::array<double, 2>> targets;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 200;
  std::size_t early_stop_patience = 15;
  std::uint64_t seed = 0;
  double alpha = 0.0003;
  int threads = 1;
  double clip_norm = 0.0;  // 0 disables the divergence-rescue global-norm clip

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double wall_ms = 0.0;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_mse = std::numeric_limits<double>::infinity();

  // CSV per the trace schema. wall_ms is a measurement, not part of the
  // deterministic contract.
  std::string to_csv() const {
    std::string out = "epoch,train_mse,val_mse,wall_ms\n";
    for (const EpochStats& e : epochs) {
      out += std::to_string(e.epoch) + "," + fmt_double(e.train_mse) + "," +
             fmt_double(e.val_mse) + "," + fmt_double(e.wall_ms) + "\n";
    }
    return out;
  }
};

struct TrainResult {
  ModelParams model;
  TrainTrace trace;
};

inline double evaluate_mse(const ModelParams& m, const TrainSet& set) {
  std::vector<std::array<double, 2>> preds(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) preds[i] = forward(m, set.windows[i]);
  return mse_loss(preds, set.targets);
}

// Mini-batch Adam with a per-epoch Fisher-Yates shuffle keyed by
// (seed, epoch). Returns the parameters from the epoch with the lowest
// validation MSE; stops once `early_stop_patience` epochs pass without
// improvement. Throws TrainingError with the epoch index on divergence.
inline TrainResult train(ModelParams model, const TrainSet& train_set, const TrainSet& val_set,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw InputError("train: empty sample set");
  model.validate();

  AdamState adam = AdamState::zeros_like(model);
  TrainTrace trace;
  ModelParams best = model;
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<WindowView> batch_windows;
  std::vector<std::array<double, 2>> batch_targets;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    Rng shuffle_rng = Rng::keyed(cfg.seed, {rng_stream::kShuffle, epoch});
    shuffle_rng.shuffle(order);

    double sq_err_sum = 0.0;  // running numerator of the epoch's train MSE
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      batch_windows.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_windows.push_back(train_set.windows[order[i]]);
        batch_targets.push_back(train_set.targets[order[i]]);
      }

      BackwardResult bw = backward(model, batch_windows, batch_targets, cfg.threads);
      if (!std::isfinite(bw.loss))
        throw TrainingError("training diverged (non-finite loss)", epoch);
      sq_err_sum += bw.loss * 2.0 * static_cast<double>(end - start);

      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(bw.grads.squared_norm());
        if (norm > cfg.clip_norm) bw.grads.scale(cfg.clip_norm / norm);
      }
      adam_step(adam, model, bw.grads, cfg.alpha);
    }

    const double train_mse = sq_err_sum / (2.0 * static_cast<double>(order.size()));
    const double val_mse = evaluate_mse(model, val_set);
    if (!std::isfinite(val_mse))
      throw TrainingError("training diverged (non-finite validation loss)", epoch);

    const auto t1 = std::chrono::steady_clock::now();
    const double wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    trace.epochs.push_back(EpochStats{epoch, train_mse, val_mse, wall_ms});

    if (val_mse < trace.best_val_mse) {
      trace.best_val_mse = val_mse;
      trace.best_epoch = epoch;
      best = model;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.early_stop_patience) {
      break;
    }
  }

  return TrainResult{std::move(best), std::move(trace)};
}

}  // namespace ttlc
