#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ttlc/common.hpp"

namespace ttlc {

inline constexpr int kFrameRate = 25;           // Hz
inline constexpr double kTtlcClipSeconds = 7.0;  // label clip / "no change ahead"

// One point of the tuning grid.
struct Hyperparams {
  int n_lstm = 256;
  int n_dense = 32;
  double t_h = 3.0;       // seconds of feature history
  double alpha = 0.0003;  // Adam learning rate

  std::size_t time_steps() const {
    return static_cast<std::size_t>(std::lround(t_h * kFrameRate));
  }

  void validate() const {
    if (n_lstm < 1 || n_dense < 1) throw ConfigError("layer sizes must be >= 1");
    if (!(t_h > 0.0)) throw ConfigError("t_h must be positive");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  }

  std::string describe() const {
    return "n_lstm=" + std::to_string(n_lstm) + " n_dense=" + std::to_string(n_dense) +
           " t_h=" + std::to_string(t_h) + " alpha=" + std::to_string(alpha);
  }
};

// The full default tuning grid (3 * 3 * 3 * 2 = 54 combinations).
struct HyperGrid {
  std::vector<int> n_lstm = {64, 128, 256};
  std::vector<int> n_dense = {16, 32, 64};
  std::vector<double> t_h = {1.0, 3.0, 5.0};
  std::vector<double> alpha = {0.001, 0.0003};

  void validate() const {
    if (n_lstm.empty() || n_dense.empty() || t_h.empty() || alpha.empty())
      throw ConfigError("grid axes must be non-empty");
  }

  // Row-major expansion in declared axis order; evaluation and logs follow
  // this ordering exactly.
  std::vector<Hyperparams> combinations() const {
    validate();
    std::vector<Hyperparams> out;
    out.reserve(n_lstm.size() * n_dense.size() * t_h.size() * alpha.size());
    for (int nl : n_lstm)
      for (int nd : n_dense)
        for (double th : t_h)
          for (double a : alpha) out.push_back(Hyperparams{nl, nd, th, a});
    return out;
  }
};

}  // namespace ttlc
