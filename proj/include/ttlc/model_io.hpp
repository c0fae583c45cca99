#pragma once

#include <filesystem>

#include "ttlc/io.hpp"
#include "ttlc/nn.hpp"

namespace ttlc {

namespace detail {

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("expected non-empty matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw ParseError("ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Vec vec_from_json(const Json& j) { return j.get<Vec>(); }

}  // namespace detail

// Single-document JSON model file. Tensors are row-major nested arrays of
// doubles; key order is fixed by construction.
inline Json model_to_json(const ModelParams& m) {
  Json j;
  j["format_version"] = m.format_version;
  j["hyperparams"] = {{"n_lstm", m.hyper.n_lstm},
                      {"n_dense", m.hyper.n_dense},
                      {"t_h", m.hyper.t_h},
                      {"alpha", m.hyper.alpha}};
  j["scaler"] = {{"mean", detail::vec_to_json(m.scaler.mean)},
                 {"std", detail::vec_to_json(m.scaler.std)}};
  j["lstm"] = {{"input_kernel", detail::mat_to_json(m.lstm.input_kernel)},
               {"recurrent_kernel", detail::mat_to_json(m.lstm.recurrent_kernel)},
               {"bias", detail::vec_to_json(m.lstm.bias)}};
  j["hidden"] = {{"kernel", detail::mat_to_json(m.hidden.kernel)},
                 {"bias", detail::vec_to_json(m.hidden.bias)},
                 {"activation", "relu"}};
  j["output"] = {{"kernel", detail::mat_to_json(m.output.kernel)},
                 {"bias", detail::vec_to_json(m.output.bias)},
                 {"activation", "relu"}};
  return j;
}

inline ModelParams model_from_json(const Json& j) {
  ModelParams m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kModelFormatVersion)
      throw ParseError("unsupported model format_version " + std::to_string(m.format_version));
    const Json& hp = j.at("hyperparams");
    m.hyper.n_lstm = hp.at("n_lstm").get<int>();
    m.hyper.n_dense = hp.at("n_dense").get<int>();
    m.hyper.t_h = hp.at("t_h").get<double>();
    m.hyper.alpha = hp.at("alpha").get<double>();
    m.scaler.mean = detail::vec_from_json(j.at("scaler").at("mean"));
    m.scaler.std = detail::vec_from_json(j.at("scaler").at("std"));
    m.lstm.input_kernel = detail::mat_from_json(j.at("lstm").at("input_kernel"));
    m.lstm.recurrent_kernel = detail::mat_from_json(j.at("lstm").at("recurrent_kernel"));
    m.lstm.bias = detail::vec_from_json(j.at("lstm").at("bias"));
    m.hidden.kernel = detail::mat_from_json(j.at("hidden").at("kernel"));
    m.hidden.bias = detail::vec_from_json(j.at("hidden").at("bias"));
    m.output.kernel = detail::mat_from_json(j.at("output").at("kernel"));
    m.output.bias = detail::vec_from_json(j.at("output").at("bias"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model file: ") + e.what());
  }
  m.validate();
  return m;
}

inline void save_model(const std::filesystem::path& path, const ModelParams& m) {
  save_json(path, model_to_json(m));
}

inline ModelParams load_model(const std::filesystem::path& path) {
  return model_from_json(load_json(path));
}

}  // namespace ttlc
