#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ttlc/dataset.hpp"
#include "ttlc/io.hpp"
#include "ttlc/nn.hpp"

namespace ttlc {

inline constexpr double kClassificationHorizon = 5.0;  // seconds

struct Prediction {
  double ttlcl = 0.0;
  double ttlcr = 0.0;
};

// Applies the model's embedded scaler to a raw window and runs the network.
inline Prediction predict(const ModelParams& model, WindowView window) {
  if (model.scaler.empty()) throw ConfigError("model has no fitted scaler");
  Mat buf(window.steps, window.features);
  std::copy(window.data, window.data + window.steps * window.features, buf.data.begin());
  for (std::size_t t = 0; t < buf.rows; ++t) model.scaler.transform_row(buf.row(t));
  const auto out = forward(model, as_window(buf));
  return Prediction{out[0], out[1]};
}

// Predictions for a set of raw (unstandardized) samples.
inline std::vector<Prediction> predict_all(const ModelParams& model, const SampleSet& set,
                                           std::span<const SampleRef> refs,
                                           std::size_t window_steps) {
  if (set.scaled) throw ConfigError("evaluation expects an unstandardized sample set");
  std::vector<Prediction> out;
  out.reserve(refs.size());
  for (const SampleRef& r : refs)
    out.push_back(predict(model, set.sample(r, window_steps).window));
  return out;
}

// ---------------------------------------------------------------------------
// RMSE
// ---------------------------------------------------------------------------

inline double rmse(std::span<const double> residuals) {
  if (residuals.empty()) throw InputError("rmse of an empty residual set");
  double acc = 0.0;
  for (double r : residuals) acc += r * r;
  return std::sqrt(acc / static_cast<double>(residuals.size()));
}

// Rows {overall, ttlcl, ttlcr} x columns {LCL, FLW, LCR, All}. Column
// membership uses the 7 s horizon; samples announcing changes on both sides
// are counted in both the LCL and LCR columns.
struct RmseTable {
  enum Row { kOverall = 0, kTtlclRow = 1, kTtlcrRow = 2 };
  enum Col { kLcl = 0, kFlw = 1, kLcr = 2, kAll = 3 };

  std::array<std::array<std::optional<double>, 4>, 3> cells;
  std::array<std::size_t, 4> counts = {0, 0, 0, 0};

  std::string to_csv() const {
    auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
    std::string out = "row,LCL,FLW,LCR,All\n";
    out += "samples," + std::to_string(counts[0]) + "," + std::to_string(counts[1]) + "," +
           std::to_string(counts[2]) + "," + std::to_string(counts[3]) + "\n";
    const char* names[3] = {"overall", "ttlcl", "ttlcr"};
    for (int r = 0; r < 3; ++r) {
      out += names[r];
      for (int c = 0; c < 4; ++c) out += "," + cell(cells[r][c]);
      out += "\n";
    }
    return out;
  }
};

struct LabeledPrediction {
  double true_l = 0.0, true_r = 0.0;
  double pred_l = 0.0, pred_r = 0.0;
};

inline RmseTable rmse_table(std::span<const LabeledPrediction> rows) {
  RmseTable table;
  std::array<std::vector<double>, 4> res_l, res_r;
  auto add = [&](int col, const LabeledPrediction& p) {
    res_l[col].push_back(p.pred_l - p.true_l);
    res_r[col].push_back(p.pred_r - p.true_r);
  };
  for (const LabeledPrediction& p : rows) {
    const bool lcl = p.true_l < kTtlcClipSeconds;
    const bool lcr = p.true_r < kTtlcClipSeconds;
    if (lcl) add(RmseTable::kLcl, p);
    if (lcr) add(RmseTable::kLcr, p);
    if (!lcl && !lcr) add(RmseTable::kFlw, p);
    add(RmseTable::kAll, p);
  }
  for (int c = 0; c < 4; ++c) {
    table.counts[c] = res_l[c].size();
    if (res_l[c].empty()) continue;
    std::vector<double> pooled = res_l[c];
    pooled.insert(pooled.end(), res_r[c].begin(), res_r[c].end());
    table.cells[RmseTable::kOverall][c] = rmse(pooled);
    table.cells[RmseTable::kTtlclRow][c] = rmse(res_l[c]);
    table.cells[RmseTable::kTtlcrRow][c] = rmse(res_r[c]);
  }
  return table;
}

inline RmseTable rmse_table(const ModelParams& model, const SampleSet& set,
                            std::span<const SampleRef> refs, std::size_t window_steps) {
  const auto preds = predict_all(model, set, refs, window_steps);
  std::vector<LabeledPrediction> rows(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Sample s = set.sample(refs[i], window_steps);
    rows[i] = LabeledPrediction{s.ttlcl, s.ttlcr, preds[i].ttlcl, preds[i].ttlcr};
  }
  return rmse_table(rows);
}

// ---------------------------------------------------------------------------
// Error over remaining TTLC
// ---------------------------------------------------------------------------

enum class TtlcChannel { Left, Right };

struct TtlcBin {
  double lo = 0.0, hi = 0.0, center = 0.0;
  std::size_t count = 0;
  std::optional<double> rmse;
  std::optional<double> median, q1, q3;
  std::optional<double> whisker_lo, whisker_hi;
  std::size_t outliers = 0;
};

struct TtlcBinStats {
  TtlcChannel channel = TtlcChannel::Left;
  double bin_width = 0.25;
  std::vector<TtlcBin> bins;

  std::string to_csv() const {
    auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
    std::string out = "bin_lo,bin_hi,center,count,rmse,median,q1,q3,whisker_lo,whisker_hi,outliers\n";
    for (const TtlcBin& b : bins) {
      out += fmt_double(b.lo) + "," + fmt_double(b.hi) + "," + fmt_double(b.center) + "," +
             std::to_string(b.count) + "," + cell(b.rmse) + "," + cell(b.median) + "," +
             cell(b.q1) + "," + cell(b.q3) + "," + cell(b.whisker_lo) + "," +
             cell(b.whisker_hi) + "," + std::to_string(b.outliers) + "\n";
    }
    return out;
  }
};

namespace detail {

// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& x, double p) {
  if (x.size() == 1) return x[0];
  const double pos = p * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] * (1.0 - frac) + x[lo + 1] * frac;
}

}  // namespace detail

// Groups signed prediction errors of one output channel by the true TTLC of
// samples with an upcoming change on that side. Boxplot statistics follow the
// Tukey convention (1.5 IQR whiskers, interpolated quartiles).
inline TtlcBinStats ttlc_bin_stats(std::span<const LabeledPrediction> rows, double bin_width,
                                   TtlcChannel channel) {
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
  TtlcBinStats stats;
  stats.channel = channel;
  stats.bin_width = bin_width;
  const std::size_t nbins =
      static_cast<std::size_t>(std::ceil(kTtlcClipSeconds / bin_width - 1e-12));

  std::vector<std::vector<double>> errors(nbins);
  for (const LabeledPrediction& p : rows) {
    const double truth = channel == TtlcChannel::Left ? p.true_l : p.true_r;
    const double pred = channel == TtlcChannel::Left ? p.pred_l : p.pred_r;
    if (!(truth < kTtlcClipSeconds)) continue;  // only upcoming changes on this side
    std::size_t bin = static_cast<std::size_t>(truth / bin_width);
    if (bin >= nbins) bin = nbins - 1;
    errors[bin].push_back(pred - truth);
  }

  for (std::size_t i = 0; i < nbins; ++i) {
    TtlcBin b;
    b.lo = static_cast<double>(i) * bin_width;
    b.hi = std::min((static_cast<double>(i) + 1.0) * bin_width, kTtlcClipSeconds);
    b.center = 0.5 * (b.lo + b.hi);
    std::vector<double>& e = errors[i];
    b.count = e.size();
    if (!e.empty()) {
      b.rmse = rmse(e);
      std::sort(e.begin(), e.end());
      b.q1 = detail::quantile_sorted(e, 0.25);
      b.median = detail::quantile_sorted(e, 0.5);
      b.q3 = detail::quantile_sorted(e, 0.75);
      const double iqr = *b.q3 - *b.q1;
      const double lo_limit = *b.q1 - 1.5 * iqr;
      const double hi_limit = *b.q3 + 1.5 * iqr;
      double wlo = e.back(), whi = e.front();
      std::size_t outliers = 0;
      for (double x : e) {
        if (x >= lo_limit && x <= hi_limit) {
          wlo = std::min(wlo, x);
          whi = std::max(whi, x);
        } else {
          ++outliers;
        }
      }
      b.whisker_lo = wlo;
      b.whisker_hi = whi;
      b.outliers = outliers;
    }
    stats.bins.push_back(std::move(b));
  }
  return stats;
}

inline TtlcBinStats ttlc_bin_stats(const ModelParams& model, const SampleSet& set,
                                   std::span<const SampleRef> refs, std::size_t window_steps,
                                   double bin_width, TtlcChannel channel) {
  const auto preds = predict_all(model, set, refs, window_steps);
  std::vector<LabeledPrediction> rows(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Sample s = set.sample(refs[i], window_steps);
    rows[i] = LabeledPrediction{s.ttlcl, s.ttlcr, preds[i].ttlcl, preds[i].ttlcr};
  }
  return ttlc_bin_stats(rows, bin_width, channel);
}

// ---------------------------------------------------------------------------
// Classification derived from the regression output
// ---------------------------------------------------------------------------

// LCL if TTLCL~ <= 5 s and TTLCL~ <= TTLCR~; LCR if TTLCR~ <= 5 s and
// TTLCR~ < TTLCL~; FLW otherwise. The asymmetric comparison sends exact ties
// to LCL.
inline Maneuver classify_from_ttlc(double ttlcl_hat, double ttlcr_hat,
                                   double horizon = kClassificationHorizon) {
  if (ttlcl_hat <= horizon && ttlcl_hat <= ttlcr_hat) return Maneuver::LCL;
  if (ttlcr_hat <= horizon && ttlcr_hat < ttlcl_hat) return Maneuver::LCR;
  return Maneuver::FLW;
}

struct ClassMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::size_t support = 0;
};

struct ClassReport {
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [truth][prediction]
  std::array<ClassMetrics, 3> per_class;                   // indexed by Maneuver
  std::optional<double> mean_precision, mean_recall, mean_f1;

  std::string to_csv() const {
    auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
    std::string out = "class,precision,recall,f1,support\n";
    const Maneuver order[3] = {Maneuver::LCL, Maneuver::FLW, Maneuver::LCR};
    for (Maneuver m : order) {
      const ClassMetrics& c = per_class[static_cast<std::size_t>(m)];
      out += std::string(to_string(m)) + "," + cell(c.precision) + "," + cell(c.recall) + "," +
             cell(c.f1) + "," + std::to_string(c.support) + "\n";
    }
    out += "mean," + cell(mean_precision) + "," + cell(mean_recall) + "," + cell(mean_f1) + ",\n";
    return out;
  }
};

// One-vs-rest precision/recall/F1 per maneuver class plus unweighted means
// over the classes where the metric is defined.
inline ClassReport class_report(std::span<const Maneuver> predicted,
                                std::span<const Maneuver> truth) {
  if (predicted.size() != truth.size()) throw InputError("class_report: length mismatch");
  if (predicted.empty()) throw InputError("class_report: empty input");
  ClassReport rep;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++rep.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];

  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t tp = rep.confusion[c][c];
    std::size_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < 3; ++o) {
      if (o == c) continue;
      fp += rep.confusion[o][c];
      fn += rep.confusion[c][o];
    }
    ClassMetrics& m = rep.per_class[c];
    m.support = tp + fn;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (m.support > 0) m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    if (m.precision && m.recall)
      m.f1 = *m.precision + *m.recall > 0.0
                 ? 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall)
                 : 0.0;
  }

  auto mean_of = [&](auto getter) -> std::optional<double> {
    double acc = 0.0;
    int n = 0;
    for (const ClassMetrics& m : rep.per_class)
      if (auto v = getter(m)) {
        acc += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return acc / n;
  };
  rep.mean_precision = mean_of([](const ClassMetrics& m) { return m.precision; });
  rep.mean_recall = mean_of([](const ClassMetrics& m) { return m.recall; });
  rep.mean_f1 = mean_of([](const ClassMetrics& m) { return m.f1; });
  return rep;
}

// Classification report of a model over raw samples: predictions through
// classify_from_ttlc, ground truth through label_maneuver at the same
// horizon (5 s by default).
inline ClassReport classification_report(const ModelParams& model, const SampleSet& set,
                                         std::span<const SampleRef> refs,
                                         std::size_t window_steps,
                                         double horizon = kClassificationHorizon) {
  const auto preds = predict_all(model, set, refs, window_steps);
  std::vector<Maneuver> predicted(refs.size()), truth(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Sample s = set.sample(refs[i], window_steps);
    predicted[i] = classify_from_ttlc(preds[i].ttlcl, preds[i].ttlcr, horizon);
    truth[i] = label_maneuver(s.ttlcl, s.ttlcr, horizon);
  }
  return class_report(predicted, truth);
}

// ---------------------------------------------------------------------------
// Feature importance report
// ---------------------------------------------------------------------------

inline std::string importance_to_csv(const Vec& importance) {
  std::string out = "feature,importance\n";
  for (std::size_t f = 0; f < importance.size(); ++f)
    out += std::string(kFeatureNames[f]) + "," + fmt_double(importance[f]) + "\n";
  return out;
}

}  // namespace ttlc
