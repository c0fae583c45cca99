#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "ttlc/common.hpp"
#include "ttlc/tensor.hpp"

namespace ttlc {

// Per-feature standardization to zero mean / unit variance. Constant features
// get their standard deviation floored so the transform stays defined.
struct FeatureScaler {
  static constexpr double kStdFloor = 1e-8;

  Vec mean;
  Vec std;

  std::size_t features() const { return mean.size(); }
  bool empty() const { return mean.empty(); }

  void transform_row(double* row) const {
    for (std::size_t f = 0; f < mean.size(); ++f) row[f] = (row[f] - mean[f]) / std[f];
  }

  void inverse_row(double* row) const {
    for (std::size_t f = 0; f < mean.size(); ++f) row[f] = row[f] * std[f] + mean[f];
  }

  void validate() const {
    if (mean.size() != std.size()) throw ConfigError("scaler mean/std size mismatch");
    for (double s : std)
      if (!(s > 0.0)) throw ConfigError("scaler std must be positive");
  }
};

// Two-pass mean/population-variance fit over an arbitrary sequence of rows.
// `rows` yields pointers to rows of `features` doubles each.
template <typename RowRange>
FeatureScaler fit_scaler_rows(const RowRange& rows, std::size_t features) {
  FeatureScaler s;
  s.mean.assign(features, 0.0);
  s.std.assign(features, 0.0);
  std::size_t n = 0;
  for (const double* row : rows) {
    for (std::size_t f = 0; f < features; ++f) s.mean[f] += row[f];
    ++n;
  }
  if (n == 0) throw InputError("cannot fit scaler on an empty sample set");
  for (std::size_t f = 0; f < features; ++f) s.mean[f] /= static_cast<double>(n);
  for (const double* row : rows) {
    for (std::size_t f = 0; f < features; ++f) {
      const double d = row[f] - s.mean[f];
      s.std[f] += d * d;
    }
  }
  for (std::size_t f = 0; f < features; ++f) {
    s.std[f] = std::sqrt(s.std[f] / static_cast<double>(n));
    if (s.std[f] < FeatureScaler::kStdFloor) s.std[f] = FeatureScaler::kStdFloor;
  }
  return s;
}

}  // namespace ttlc
