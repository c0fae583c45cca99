#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/rng.hpp"

namespace ttlc {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Deliberately minimal: the network code
// only needs matrix-vector products, rank-1 updates and elementwise access.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// out += M x
inline void matvec_add(const Mat& m, const double* x, double* out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] += acc;
  }
}

// out += M^T x   (x has m.rows entries, out has m.cols entries)
inline void matvec_transpose_add(const Mat& m, const double* x, double* out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += w[c] * xr;
  }
}

// M += a b^T   (a has m.rows entries, b has m.cols entries)
inline void outer_add(Mat& m, const double* a, const double* b) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* w = m.row(r);
    const double ar = a[r];
    if (ar == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) w[c] += ar * b[c];
  }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Mat& m) { return all_finite(std::span<const double>(m.data)); }

// Glorot-uniform fill for a kernel with the given fan counts.
inline void fill_glorot_uniform(Mat& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : m.data) x = rng.uniform(-limit, limit);
}

// Orthonormalizes a square Gaussian matrix with modified Gram-Schmidt over
// rows; column signs fixed by the diagonal so the result is deterministic.
inline Mat random_orthogonal(std::size_t n, Rng& rng) {
  Mat q(n, n);
  for (double& x : q.data) x = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double* qi = q.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const double* qj = q.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += qi[k] * qj[k];
      for (std::size_t k = 0; k < n; ++k) qi[k] -= dot * qj[k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += qi[k] * qi[k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw ConfigError("degenerate draw during orthogonal init");
    for (std::size_t k = 0; k < n; ++k) qi[k] /= norm;
    if (qi[i] < 0.0)
      for (std::size_t k = 0; k < n; ++k) qi[k] = -qi[k];
  }
  return q;
}

}  // namespace ttlc
