#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <future>
#include <span>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/hyperparams.hpp"
#include "ttlc/rng.hpp"
#include "ttlc/scaler.hpp"
#include "ttlc/tensor.hpp"

namespace ttlc {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

enum class Activation { ReLU };

// Non-owning view of one input window: T rows of F features, row-major.
struct WindowView {
  const double* data = nullptr;
  std::size_t steps = 0;
  std::size_t features = 0;

  const double* row(std::size_t t) const { return data + t * features; }
};

inline WindowView as_window(const Mat& m) { return WindowView{m.data.data(), m.rows, m.cols}; }

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Gate rows are stacked (i, f, g, o), each block `hidden` rows tall.
struct LstmLayerParams {
  Mat input_kernel;      // [4H x F]
  Mat recurrent_kernel;  // [4H x H]
  Vec bias;              // [4H]

  std::size_t hidden_size() const { return recurrent_kernel.cols; }
  std::size_t input_size() const { return input_kernel.cols; }

  void validate() const {
    const std::size_t h = hidden_size();
    if (h == 0 || input_kernel.rows != 4 * h || recurrent_kernel.rows != 4 * h ||
        bias.size() != 4 * h)
      throw ConfigError("inconsistent LSTM layer dimensions");
    if (!all_finite(input_kernel) || !all_finite(recurrent_kernel) || !all_finite(bias))
      throw ConfigError("non-finite LSTM layer parameters");
  }
};

struct DenseLayerParams {
  Mat kernel;  // [out x in]
  Vec bias;    // [out]
  Activation activation = Activation::ReLU;

  std::size_t output_size() const { return kernel.rows; }
  std::size_t input_size() const { return kernel.cols; }

  void validate() const {
    if (kernel.rows == 0 || kernel.cols == 0 || bias.size() != kernel.rows)
      throw ConfigError("inconsistent dense layer dimensions");
    if (!all_finite(kernel) || !all_finite(bias))
      throw ConfigError("non-finite dense layer parameters");
  }
};

inline constexpr int kModelFormatVersion = 1;

struct ModelParams {
  LstmLayerParams lstm;
  DenseLayerParams hidden;  // [n_dense x n_lstm]
  DenseLayerParams output;  // [2 x n_dense]
  FeatureScaler scaler;     // empty until fitted
  Hyperparams hyper;
  int format_version = kModelFormatVersion;

  void validate() const {
    lstm.validate();
    hidden.validate();
    output.validate();
    if (output.output_size() != 2) throw ConfigError("output layer must have exactly 2 units");
    if (hidden.input_size() != lstm.hidden_size() || output.input_size() != hidden.output_size())
      throw ConfigError("layer shapes do not chain");
    if (static_cast<std::size_t>(hyper.n_lstm) != lstm.hidden_size() ||
        static_cast<std::size_t>(hyper.n_dense) != hidden.output_size())
      throw ConfigError("hyperparameters disagree with layer shapes");
    if (!scaler.empty()) {
      scaler.validate();
      if (scaler.features() != lstm.input_size())
        throw ConfigError("scaler width disagrees with input feature count");
    }
  }

  // Trainable tensors in a fixed order; gradients and optimizer state mirror it.
  std::array<Vec*, 7> tensors() {
    return {&lstm.input_kernel.data, &lstm.recurrent_kernel.data, &lstm.bias,
            &hidden.kernel.data,     &hidden.bias,                &output.kernel.data,
            &output.bias};
  }
  std::array<const Vec*, 7> tensors() const {
    return {&lstm.input_kernel.data, &lstm.recurrent_kernel.data, &lstm.bias,
            &hidden.kernel.data,     &hidden.bias,                &output.kernel.data,
            &output.bias};
  }
};

struct LstmState {
  Vec cell;
  Vec hidden;

  LstmState() = default;
  explicit LstmState(std::size_t h) : cell(h, 0.0), hidden(h, 0.0) {}
};

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

// One recurrent update. Mutates `state` and returns the new hidden output.
inline const Vec& lstm_step(const LstmLayerParams& p, LstmState& state,
                            std::span<const double> x) {
  const std::size_t h = p.hidden_size();
  if (x.size() != p.input_size() || state.cell.size() != h || state.hidden.size() != h)
    throw ConfigError("lstm_step dimension mismatch");
  if (!all_finite(x)) throw InputError("non-finite input to lstm_step");

  Vec gates(p.bias);
  matvec_add(p.input_kernel, x.data(), gates.data());
  matvec_add(p.recurrent_kernel, state.hidden.data(), gates.data());

  for (std::size_t k = 0; k < h; ++k) {
    const double i = sigmoid(gates[k]);
    const double f = sigmoid(gates[h + k]);
    const double g = std::tanh(gates[2 * h + k]);
    const double o = sigmoid(gates[3 * h + k]);
    const double c = f * state.cell[k] + i * g;
    state.cell[k] = c;
    state.hidden[k] = o * std::tanh(c);
  }
  return state.hidden;
}

namespace detail {

inline void dense_forward(const DenseLayerParams& d, const double* in, double* pre,
                          double* post) {
  for (std::size_t r = 0; r < d.output_size(); ++r) pre[r] = d.bias[r];
  matvec_add(d.kernel, in, pre);
  for (std::size_t r = 0; r < d.output_size(); ++r) post[r] = relu(pre[r]);
}

}  // namespace detail

// Runs the whole network over a standardized window; only the final step's
// hidden vector feeds the dense head. Outputs are nonnegative by construction.
inline std::array<double, 2> forward(const ModelParams& m, WindowView window) {
  const std::size_t h = m.lstm.hidden_size();
  if (window.features != m.lstm.input_size() || window.steps == 0)
    throw ConfigError("forward window shape mismatch");
  if (!all_finite(std::span<const double>(window.data, window.steps * window.features)))
    throw InputError("non-finite window");

  LstmState state(h);
  for (std::size_t t = 0; t < window.steps; ++t)
    lstm_step(m.lstm, state, std::span<const double>(window.row(t), window.features));

  const std::size_t nd = m.hidden.output_size();
  Vec z1(nd), y1(nd);
  detail::dense_forward(m.hidden, state.hidden.data(), z1.data(), y1.data());
  std::array<double, 2> z2{}, y2{};
  detail::dense_forward(m.output, y1.data(), z2.data(), y2.data());
  return y2;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Mean over all batch elements and both output channels of the squared error.
inline double mse_loss(std::span<const std::array<double, 2>> pred,
                       std::span<const std::array<double, 2>> target) {
  if (pred.empty()) throw InputError("mse_loss: empty batch");
  if (pred.size() != target.size()) throw InputError("mse_loss: batch length mismatch");
  double acc = 0.0;
  for (std::size_t b = 0; b < pred.size(); ++b) {
    const double dl = pred[b][0] - target[b][0];
    const double dr = pred[b][1] - target[b][1];
    acc += dl * dl + dr * dr;
  }
  return acc / (2.0 * static_cast<double>(pred.size()));
}

// ---------------------------------------------------------------------------
// Backward (exact BPTT)
// ---------------------------------------------------------------------------

struct Gradients {
  Mat d_input_kernel;
  Mat d_recurrent_kernel;
  Vec d_bias;
  Mat d_hidden_kernel;
  Vec d_hidden_bias;
  Mat d_output_kernel;
  Vec d_output_bias;

  static Gradients zeros_like(const ModelParams& m) {
    Gradients g;
    g.d_input_kernel = Mat(m.lstm.input_kernel.rows, m.lstm.input_kernel.cols);
    g.d_recurrent_kernel = Mat(m.lstm.recurrent_kernel.rows, m.lstm.recurrent_kernel.cols);
    g.d_bias.assign(m.lstm.bias.size(), 0.0);
    g.d_hidden_kernel = Mat(m.hidden.kernel.rows, m.hidden.kernel.cols);
    g.d_hidden_bias.assign(m.hidden.bias.size(), 0.0);
    g.d_output_kernel = Mat(m.output.kernel.rows, m.output.kernel.cols);
    g.d_output_bias.assign(m.output.bias.size(), 0.0);
    return g;
  }

  std::array<Vec*, 7> tensors() {
    return {&d_input_kernel.data, &d_recurrent_kernel.data, &d_bias,      &d_hidden_kernel.data,
            &d_hidden_bias,       &d_output_kernel.data,    &d_output_bias};
  }
  std::array<const Vec*, 7> tensors() const {
    return {&d_input_kernel.data, &d_recurrent_kernel.data, &d_bias,      &d_hidden_kernel.data,
            &d_hidden_bias,       &d_output_kernel.data,    &d_output_bias};
  }

  void add(const Gradients& other) {
    auto mine = tensors();
    auto theirs = other.tensors();
    for (std::size_t i = 0; i < mine.size(); ++i)
      for (std::size_t k = 0; k < mine[i]->size(); ++k) (*mine[i])[k] += (*theirs[i])[k];
  }

  void scale(double s) {
    for (Vec* v : tensors())
      for (double& x : *v) x *= s;
  }

  double squared_norm() const {
    double acc = 0.0;
    for (const Vec* v : tensors())
      for (double x : *v) acc += x * x;
    return acc;
  }
};

namespace detail {

// Per-sample scratch buffers; reused across samples to keep allocations out
// of the training loop.
struct BpttWorkspace {
  Mat gate_i, gate_f, gate_g, gate_o;  // [T x H] post-activation
  Mat cell, tanh_cell, hidden;         // [T x H]
  Vec z1, y1;
  std::array<double, 2> z2{}, y2{};
  Vec dh, dc, dgates, dh_prev, dz1;

  void resize(std::size_t T, std::size_t h, std::size_t nd) {
    auto fit = [&](Mat& m) {
      if (m.rows != T || m.cols != h) m = Mat(T, h);
    };
    fit(gate_i);
    fit(gate_f);
    fit(gate_g);
    fit(gate_o);
    fit(cell);
    fit(tanh_cell);
    fit(hidden);
    z1.assign(nd, 0.0);
    y1.assign(nd, 0.0);
    dh.assign(h, 0.0);
    dc.assign(h, 0.0);
    dgates.assign(4 * h, 0.0);
    dh_prev.assign(h, 0.0);
    dz1.assign(nd, 0.0);
  }
};

// Forward pass that records every activation needed by the backward sweep.
inline std::array<double, 2> forward_cached(const ModelParams& m, WindowView w,
                                            BpttWorkspace& ws) {
  const std::size_t h = m.lstm.hidden_size();
  const std::size_t nd = m.hidden.output_size();
  ws.resize(w.steps, h, nd);

  Vec gates(4 * h);
  Vec c_prev(h, 0.0), h_prev(h, 0.0);
  for (std::size_t t = 0; t < w.steps; ++t) {
    for (std::size_t k = 0; k < 4 * h; ++k) gates[k] = m.lstm.bias[k];
    matvec_add(m.lstm.input_kernel, w.row(t), gates.data());
    matvec_add(m.lstm.recurrent_kernel, h_prev.data(), gates.data());
    for (std::size_t k = 0; k < h; ++k) {
      const double i = sigmoid(gates[k]);
      const double f = sigmoid(gates[h + k]);
      const double g = std::tanh(gates[2 * h + k]);
      const double o = sigmoid(gates[3 * h + k]);
      const double c = f * c_prev[k] + i * g;
      const double tc = std::tanh(c);
      ws.gate_i(t, k) = i;
      ws.gate_f(t, k) = f;
      ws.gate_g(t, k) = g;
      ws.gate_o(t, k) = o;
      ws.cell(t, k) = c;
      ws.tanh_cell(t, k) = tc;
      ws.hidden(t, k) = o * tc;
    }
    c_prev.assign(ws.cell.row(t), ws.cell.row(t) + h);
    h_prev.assign(ws.hidden.row(t), ws.hidden.row(t) + h);
  }

  dense_forward(m.hidden, ws.hidden.row(w.steps - 1), ws.z1.data(), ws.y1.data());
  dense_forward(m.output, ws.y1.data(), ws.z2.data(), ws.y2.data());
  return ws.y2;
}

// Backpropagates one sample given unnormalized output gradients dy (the
// caller scales by the batch factor afterwards). Accumulates into `acc`.
inline void backward_sample(const ModelParams& m, WindowView w, const BpttWorkspace& ws,
                            const std::array<double, 2>& dy, Gradients& acc,
                            BpttWorkspace& tmp) {
  const std::size_t h = m.lstm.hidden_size();
  const std::size_t nd = m.hidden.output_size();
  const std::size_t T = w.steps;

  // Output dense. ReLU subgradient at exactly 0 is taken as 0.
  std::array<double, 2> dz2{};
  for (std::size_t r = 0; r < 2; ++r) dz2[r] = ws.z2[r] > 0.0 ? dy[r] : 0.0;
  outer_add(acc.d_output_kernel, dz2.data(), ws.y1.data());
  for (std::size_t r = 0; r < 2; ++r) acc.d_output_bias[r] += dz2[r];

  Vec& dz1 = tmp.dz1;
  dz1.assign(nd, 0.0);
  matvec_transpose_add(m.output.kernel, dz2.data(), dz1.data());
  for (std::size_t r = 0; r < nd; ++r)
    if (!(ws.z1[r] > 0.0)) dz1[r] = 0.0;
  outer_add(acc.d_hidden_kernel, dz1.data(), ws.hidden.row(T - 1));
  for (std::size_t r = 0; r < nd; ++r) acc.d_hidden_bias[r] += dz1[r];

  Vec& dh = tmp.dh;
  Vec& dc = tmp.dc;
  Vec& dgates = tmp.dgates;
  Vec& dh_prev = tmp.dh_prev;
  dh.assign(h, 0.0);
  dc.assign(h, 0.0);
  dgates.assign(4 * h, 0.0);
  matvec_transpose_add(m.hidden.kernel, dz1.data(), dh.data());

  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t k = 0; k < h; ++k) {
      const double i = ws.gate_i(t, k);
      const double f = ws.gate_f(t, k);
      const double g = ws.gate_g(t, k);
      const double o = ws.gate_o(t, k);
      const double tc = ws.tanh_cell(t, k);
      const double c_prev = t > 0 ? ws.cell(t - 1, k) : 0.0;

      const double dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
      const double d_o = dh[k] * tc;
      const double d_i = dct * g;
      const double d_f = dct * c_prev;
      const double d_g = dct * i;

      dgates[k] = d_i * i * (1.0 - i);
      dgates[h + k] = d_f * f * (1.0 - f);
      dgates[2 * h + k] = d_g * (1.0 - g * g);
      dgates[3 * h + k] = d_o * o * (1.0 - o);
      dc[k] = dct * f;
    }

    outer_add(acc.d_input_kernel, dgates.data(), w.row(t));
    if (t > 0) outer_add(acc.d_recurrent_kernel, dgates.data(), ws.hidden.row(t - 1));
    for (std::size_t k = 0; k < 4 * h; ++k) acc.d_bias[k] += dgates[k];

    dh_prev.assign(h, 0.0);
    matvec_transpose_add(m.lstm.recurrent_kernel, dgates.data(), dh_prev.data());
    dh.swap(dh_prev);
  }
}

}  // namespace detail

struct BackwardResult {
  Gradients grads;
  double loss = 0.0;
};

// Exact d(MSE)/dtheta over the batch via backpropagation through time.
//
// The batch is always partitioned into the same fixed shards; shards may be
// evaluated on worker threads but are reduced in shard order, so results are
// bit-identical for any `threads` value.
inline BackwardResult backward(const ModelParams& m, std::span<const WindowView> windows,
                               std::span<const std::array<double, 2>> targets,
                               int threads = 1) {
  if (windows.empty()) throw InputError("backward: empty batch");
  if (windows.size() != targets.size()) throw InputError("backward: batch length mismatch");

  constexpr std::size_t kShards = 8;
  const std::size_t n = windows.size();

  struct ShardOut {
    Gradients grads;
    double sq_err = 0.0;
  };

  auto run_shard = [&](std::size_t lo, std::size_t hi) {
    ShardOut out;
    out.grads = Gradients::zeros_like(m);
    detail::BpttWorkspace ws, tmp;
    for (std::size_t b = lo; b < hi; ++b) {
      const auto pred = detail::forward_cached(m, windows[b], ws);
      std::array<double, 2> dy{};
      for (std::size_t k = 0; k < 2; ++k) {
        const double r = pred[k] - targets[b][k];
        dy[k] = r;
        out.sq_err += r * r;
      }
      detail::backward_sample(m, windows[b], ws, dy, out.grads, tmp);
    }
    return out;
  };

  std::array<std::size_t, kShards + 1> bounds{};
  for (std::size_t s = 0; s <= kShards; ++s) bounds[s] = s * n / kShards;

  std::vector<ShardOut> outs(kShards);
  if (threads <= 1) {
    for (std::size_t s = 0; s < kShards; ++s) outs[s] = run_shard(bounds[s], bounds[s + 1]);
  } else {
    std::vector<std::future<ShardOut>> futs;
    futs.reserve(kShards);
    for (std::size_t s = 0; s < kShards; ++s)
      futs.push_back(std::async(std::launch::async, run_shard, bounds[s], bounds[s + 1]));
    for (std::size_t s = 0; s < kShards; ++s) outs[s] = futs[s].get();
  }

  BackwardResult res;
  res.grads = std::move(outs[0].grads);
  double sq_err = outs[0].sq_err;
  for (std::size_t s = 1; s < kShards; ++s) {
    res.grads.add(outs[s].grads);
    sq_err += outs[s].sq_err;
  }
  res.grads.scale(1.0 / static_cast<double>(n));
  res.loss = sq_err / (2.0 * static_cast<double>(n));
  return res;
}

// ---------------------------------------------------------------------------
// Feature importance
// ---------------------------------------------------------------------------

enum class ImportanceMode { Absolute, Signed };

// Sums the input-kernel weights connecting each feature to the LSTM layer
// (all units, all gates) and normalizes the result to sum 1. The literal
// signed sum can cancel; Absolute is the default interpretation.
inline Vec feature_importance(const ModelParams& m, ImportanceMode mode = ImportanceMode::Absolute) {
  const Mat& k = m.lstm.input_kernel;
  Vec raw(k.cols, 0.0);
  for (std::size_t r = 0; r < k.rows; ++r) {
    const double* row = k.row(r);
    for (std::size_t c = 0; c < k.cols; ++c)
      raw[c] += mode == ImportanceMode::Absolute ? std::fabs(row[c]) : row[c];
  }
  double total = 0.0;
  for (double v : raw) total += v;
  if (std::fabs(total) < 1e-12)
    throw InputError("feature importance normalizer is zero (signed sum cancelled?)");
  for (double& v : raw) v /= total;
  return raw;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// Input kernels Glorot-uniform, recurrent kernels per-gate orthogonal,
// biases zero except the forget gate at 1.0.
inline ModelParams init_model(const Hyperparams& hp, std::size_t input_features,
                              std::uint64_t seed) {
  hp.validate();
  const auto h = static_cast<std::size_t>(hp.n_lstm);
  const auto nd = static_cast<std::size_t>(hp.n_dense);
  Rng rng = Rng::keyed(seed, {rng_stream::kInit});

  ModelParams m;
  m.hyper = hp;
  m.lstm.input_kernel = Mat(4 * h, input_features);
  fill_glorot_uniform(m.lstm.input_kernel, input_features, 4 * h, rng);
  m.lstm.recurrent_kernel = Mat(4 * h, h);
  for (std::size_t gate = 0; gate < 4; ++gate) {
    Mat q = random_orthogonal(h, rng);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < h; ++c) m.lstm.recurrent_kernel(gate * h + r, c) = q(r, c);
  }
  m.lstm.bias.assign(4 * h, 0.0);
  for (std::size_t k = 0; k < h; ++k) m.lstm.bias[h + k] = 1.0;  // forget gate

  m.hidden.kernel = Mat(nd, h);
  fill_glorot_uniform(m.hidden.kernel, h, nd, rng);
  m.hidden.bias.assign(nd, 0.0);

  m.output.kernel = Mat(2, nd);
  fill_glorot_uniform(m.output.kernel, nd, 2, rng);
  m.output.bias.assign(2, 0.0);

  m.validate();
  return m;
}

}  // namespace ttlc
