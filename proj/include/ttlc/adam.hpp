#pragma once

#include <cmath>
#include <cstdint>

#include "ttlc/common.hpp"
#include "ttlc/nn.hpp"

namespace ttlc {

// m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2 ; theta <- theta - a m^ / (sqrt(v^) + eps)
// with the usual bias corrections. `step` is the 1-based update count.
inline void adam_update(std::span<double> param, std::span<const double> grad,
                        std::span<double> m, std::span<double> v, std::uint64_t step,
                        double alpha, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
  if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
    throw ConfigError("adam_update shape mismatch");
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / m_corr;
    const double v_hat = v[i] / v_corr;
    param[i] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
  }
}

struct AdamState {
  std::uint64_t step = 0;
  Gradients m;
  Gradients v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_like(const ModelParams& p) {
    AdamState s;
    s.m = Gradients::zeros_like(p);
    s.v = Gradients::zeros_like(p);
    return s;
  }
};

// One optimizer step over every trainable tensor of the model.
inline void adam_step(AdamState& state, ModelParams& params, const Gradients& grads,
                      double alpha) {
  ++state.step;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->size() != g[i]->size()) throw ConfigError("adam_step shape mismatch");
    adam_update(*p[i], *g[i], *m[i], *v[i], state.step, alpha, state.beta1, state.beta2,
                state.eps);
  }
}

}  // namespace ttlc
