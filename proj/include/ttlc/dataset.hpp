#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/features.hpp"
#include "ttlc/labeling.hpp"
#include "ttlc/recording.hpp"
#include "ttlc/rng.hpp"
#include "ttlc/scaler.hpp"
#include "ttlc/train.hpp"

namespace ttlc {

// One vehicle's observed block: a contiguous feature matrix plus per-frame
// clipped TTLC labels. Windows are views into this storage, so a sample costs
// two indices instead of a T x 21 copy.
struct VehicleSeries {
  int vehicle_id = 0;
  long long first_frame = 0;
  Mat features;  // [frames x kFeatureCount]
  Vec ttlcl;
  Vec ttlcr;

  std::size_t size() const { return features.rows; }
};

struct SampleRef {
  std::uint32_t vehicle = 0;  // index into SampleSet::series
  std::uint32_t end = 0;      // window end row (labels taken here)
};

// Materialized spec-facing sample.
struct Sample {
  WindowView window;
  double ttlcl = 0.0;
  double ttlcr = 0.0;
  Maneuver maneuver = Maneuver::FLW;  // 7 s horizon, smaller-TTLC rule
  int vehicle_id = 0;
  long long frame = 0;
};

inline constexpr int kDatasetFormatVersion = 1;

struct SampleSet {
  std::vector<VehicleSeries> series;
  bool scaled = false;
  FeatureScaler scaler;  // empty unless `scaled`
  double default_t_h = 3.0;
  std::string provenance;
  int format_version = kDatasetFormatVersion;

  std::size_t total_frames() const {
    std::size_t n = 0;
    for (const VehicleSeries& v : series) n += v.size();
    return n;
  }

  Sample sample(SampleRef ref, std::size_t window_steps) const {
    const VehicleSeries& v = series[ref.vehicle];
    Sample s;
    s.window = WindowView{v.features.row(ref.end + 1 - window_steps), window_steps,
                          kFeatureCount};
    s.ttlcl = v.ttlcl[ref.end];
    s.ttlcr = v.ttlcr[ref.end];
    s.maneuver = label_maneuver(s.ttlcl, s.ttlcr, kTtlcClipSeconds);
    s.vehicle_id = v.vehicle_id;
    s.frame = v.first_frame + static_cast<long long>(ref.end);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Building
// ---------------------------------------------------------------------------

// Extracts features and labels for every observed frame of every vehicle.
inline void append_recording(SampleSet& set, const TrajectoryRecording& rec) {
  const FrameIndex index(rec);
  for (std::size_t vi = 0; vi < rec.vehicles.size(); ++vi) {
    const Trajectory& traj = rec.vehicles[vi];
    if (traj.frames.empty()) continue;
    const auto crossings = find_lane_crossings(traj, rec.geometry);

    VehicleSeries v;
    v.vehicle_id = traj.vehicle_id;
    v.first_frame = traj.first_frame();
    v.features = Mat(traj.frames.size(), kFeatureCount);
    v.ttlcl.resize(traj.frames.size());
    v.ttlcr.resize(traj.frames.size());
    for (std::size_t fi = 0; fi < traj.frames.size(); ++fi) {
      const FeatureRow row = extract_features(rec, index, vi, fi);
      std::copy(row.begin(), row.end(), v.features.row(fi));
      const auto [l, r] = label_sample(crossings, traj.frames[fi].frame, rec.geometry.frame_rate);
      v.ttlcl[fi] = l;
      v.ttlcr[fi] = r;
    }
    set.series.push_back(std::move(v));
  }
}

inline SampleSet build_dataset(const TrajectoryRecording& rec) {
  SampleSet set;
  append_recording(set, rec);
  return set;
}

// Every frame with at least window_steps-1 predecessors yields one sample.
inline std::vector<SampleRef> build_windows(const SampleSet& set, std::size_t window_steps) {
  if (window_steps < 1) throw ConfigError("window length must be >= 1");
  std::vector<SampleRef> refs;
  for (std::uint32_t vi = 0; vi < set.series.size(); ++vi) {
    const std::size_t n = set.series[vi].size();
    for (std::size_t end = window_steps - 1; end < n; ++end)
      refs.push_back(SampleRef{vi, static_cast<std::uint32_t>(end)});
  }
  return refs;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

// Mean/std over all frames of all given windows (frames shared by several
// windows count once per window, matching what the network actually sees).
inline FeatureScaler fit_scaler(const SampleSet& set, std::span<const SampleRef> refs,
                                std::size_t window_steps) {
  if (refs.empty()) throw InputError("fit_scaler: no samples");
  std::vector<const double*> rows;
  rows.reserve(refs.size() * window_steps);
  for (const SampleRef& r : refs) {
    const VehicleSeries& v = set.series[r.vehicle];
    for (std::size_t t = 0; t < window_steps; ++t)
      rows.push_back(v.features.row(r.end + 1 - window_steps + t));
  }
  return fit_scaler_rows(rows, kFeatureCount);
}

// Transforms every stored frame in place.
inline void apply_scaler(SampleSet& set, const FeatureScaler& scaler) {
  scaler.validate();
  if (set.scaled) throw ConfigError("sample set is already standardized");
  for (VehicleSeries& v : set.series)
    for (std::size_t fi = 0; fi < v.size(); ++fi) scaler.transform_row(v.features.row(fi));
  set.scaled = true;
  set.scaler = scaler;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

// Keeps every lane-change sample and a uniformly random floor(N/3) of the
// lane-following samples. Order is preserved; the choice depends only on the
// seed.
inline std::vector<SampleRef> undersample_flw(const SampleSet& set,
                                              std::span<const SampleRef> refs,
                                              std::uint64_t seed) {
  std::vector<std::size_t> flw_positions;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const VehicleSeries& v = set.series[refs[i].vehicle];
    if (label_maneuver(v.ttlcl[refs[i].end], v.ttlcr[refs[i].end], kTtlcClipSeconds) ==
        Maneuver::FLW)
      flw_positions.push_back(i);
  }
  Rng rng = Rng::keyed(seed, {rng_stream::kUndersample});
  const std::vector<std::size_t> chosen =
      rng.sample_indices(flw_positions.size(), flw_positions.size() / 3);

  std::vector<bool> keep(refs.size(), true);
  for (std::size_t p : flw_positions) keep[p] = false;
  for (std::size_t c : chosen) keep[flw_positions[c]] = true;

  std::vector<SampleRef> out;
  out.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    if (keep[i]) out.push_back(refs[i]);
  return out;
}

// Disjoint folds covering all samples, grouped by vehicle so windows of one
// vehicle never straddle folds. Vehicle counts per fold differ by at most 1.
inline std::vector<std::vector<SampleRef>> split_folds(const SampleSet& set,
                                                       std::span<const SampleRef> refs,
                                                       std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  std::vector<std::uint32_t> vehicles;
  for (const SampleRef& r : refs)
    if (std::find(vehicles.begin(), vehicles.end(), r.vehicle) == vehicles.end())
      vehicles.push_back(r.vehicle);
  std::sort(vehicles.begin(), vehicles.end());
  if (vehicles.size() < k)
    throw ConfigError("fewer vehicles (" + std::to_string(vehicles.size()) + ") than folds (" +
                      std::to_string(k) + ")");

  Rng rng = Rng::keyed(seed, {rng_stream::kFolds});
  rng.shuffle(vehicles);
  std::vector<std::size_t> fold_of(set.series.size(), 0);
  for (std::size_t i = 0; i < vehicles.size(); ++i) fold_of[vehicles[i]] = i % k;

  std::vector<std::vector<SampleRef>> folds(k);
  for (const SampleRef& r : refs) folds[fold_of[r.vehicle]].push_back(r);
  return folds;
}

// Downsamples every maneuver class to the size of the smallest one.
inline std::vector<SampleRef> balance_by_maneuver(const SampleSet& set,
                                                  std::span<const SampleRef> refs,
                                                  std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> by_class;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const VehicleSeries& v = set.series[refs[i].vehicle];
    const Maneuver m =
        label_maneuver(v.ttlcl[refs[i].end], v.ttlcr[refs[i].end], kTtlcClipSeconds);
    by_class[static_cast<std::size_t>(m)].push_back(i);
  }
  std::size_t minority = refs.size();
  for (const auto& cls : by_class) {
    if (cls.empty()) throw ConfigError("cannot balance: a maneuver class is empty");
    minority = std::min(minority, cls.size());
  }

  std::vector<bool> keep(refs.size(), false);
  for (std::size_t c = 0; c < 3; ++c) {
    Rng rng = Rng::keyed(seed, {rng_stream::kBalance, c});
    for (std::size_t chosen : rng.sample_indices(by_class[c].size(), minority))
      keep[by_class[c][chosen]] = true;
  }
  std::vector<SampleRef> out;
  out.reserve(3 * minority);
  for (std::size_t i = 0; i < refs.size(); ++i)
    if (keep[i]) out.push_back(refs[i]);
  return out;
}

// Window views plus targets for the training loop. The SampleSet must stay
// alive and unmodified while the TrainSet is in use.
inline TrainSet make_train_set(const SampleSet& set, std::span<const SampleRef> refs,
                               std::size_t window_steps) {
  TrainSet ts;
  ts.windows.reserve(refs.size());
  ts.targets.reserve(refs.size());
  for (const SampleRef& r : refs) {
    const Sample s = set.sample(r, window_steps);
    ts.windows.push_back(s.window);
    ts.targets.push_back({s.ttlcl, s.ttlcr});
  }
  return ts;
}

struct ManeuverCounts {
  std::size_t lcl = 0, flw = 0, lcr = 0;
};

inline ManeuverCounts count_maneuvers(const SampleSet& set, std::span<const SampleRef> refs) {
  ManeuverCounts c;
  for (const SampleRef& r : refs) {
    const VehicleSeries& v = set.series[r.vehicle];
    switch (label_maneuver(v.ttlcl[r.end], v.ttlcr[r.end], kTtlcClipSeconds)) {
      case Maneuver::LCL: ++c.lcl; break;
      case Maneuver::FLW: ++c.flw; break;
      case Maneuver::LCR: ++c.lcr; break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Cache file (binary, deterministic bytes)
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kCacheMagic[8] = {'T', 'T', 'L', 'C', 'D', 'S', '0', '1'};

struct ByteWriter {
  std::string out;

  void raw(const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64s(std::span<const double> v) { raw(v.data(), v.size() * 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct ByteReader {
  std::span<const char> in;
  std::size_t pos = 0;

  void raw(void* p, std::size_t n) {
    if (pos + n > in.size()) throw ParseError("truncated dataset cache");
    std::memcpy(p, in.data() + pos, n);
    pos += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  void f64s(std::span<double> v) { raw(v.data(), v.size() * 8); }
  std::string str() {
    std::string s(u32(), '\0');
    raw(s.data(), s.size());
    return s;
  }
};

}  // namespace detail

inline std::string dataset_to_bytes(const SampleSet& set) {
  detail::ByteWriter w;
  w.raw(detail::kCacheMagic, sizeof(detail::kCacheMagic));
  w.u32(static_cast<std::uint32_t>(set.format_version));
  w.u8(set.scaled ? 1 : 0);
  w.f64(set.default_t_h);
  w.str(set.provenance);
  w.u32(static_cast<std::uint32_t>(set.series.size()));
  for (const VehicleSeries& v : set.series) {
    w.u32(static_cast<std::uint32_t>(v.vehicle_id));
    w.i64(v.first_frame);
    w.u32(static_cast<std::uint32_t>(v.size()));
    w.f64s(v.features.data);
    w.f64s(v.ttlcl);
    w.f64s(v.ttlcr);
  }
  w.u8(set.scaled ? 1 : 0);
  if (set.scaled) {
    w.f64s(set.scaler.mean);
    w.f64s(set.scaler.std);
  }
  return std::move(w.out);
}

inline SampleSet dataset_from_bytes(std::span<const char> bytes) {
  detail::ByteReader r{bytes};
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, detail::kCacheMagic, 8) != 0)
    throw ParseError("not a dataset cache file");
  SampleSet set;
  set.format_version = static_cast<int>(r.u32());
  if (set.format_version != kDatasetFormatVersion)
    throw ParseError("unsupported dataset cache version");
  set.scaled = r.u8() != 0;
  set.default_t_h = r.f64();
  set.provenance = r.str();
  const std::uint32_t nveh = r.u32();
  set.series.resize(nveh);
  for (VehicleSeries& v : set.series) {
    v.vehicle_id = static_cast<int>(r.u32());
    v.first_frame = r.i64();
    const std::uint32_t n = r.u32();
    v.features = Mat(n, kFeatureCount);
    v.ttlcl.resize(n);
    v.ttlcr.resize(n);
    r.f64s(v.features.data);
    r.f64s(v.ttlcl);
    r.f64s(v.ttlcr);
  }
  if (r.u8() != 0) {
    set.scaler.mean.resize(kFeatureCount);
    set.scaler.std.resize(kFeatureCount);
    r.f64s(set.scaler.mean);
    r.f64s(set.scaler.std);
  }
  return set;
}

inline void save_dataset(const std::filesystem::path& path, const SampleSet& set) {
  write_file(path, dataset_to_bytes(set));
}

inline SampleSet load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return dataset_from_bytes(std::span<const char>(bytes.data(), bytes.size()));
}

}  // namespace ttlc
