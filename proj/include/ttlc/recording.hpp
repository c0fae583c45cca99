#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/hyperparams.hpp"
#include "ttlc/io.hpp"

namespace ttlc {

// Road-aligned coordinates: x along the driving direction, y lateral and
// growing toward the right lane boundary (left = decreasing y).
struct VehicleFrame {
  long long frame = 0;  // 25 Hz tick
  int vehicle_id = 0;
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double ax = 0.0, ay = 0.0;
  int lane_id = 0;
};

struct Trajectory {
  int vehicle_id = 0;
  std::vector<VehicleFrame> frames;  // consecutive 25 Hz ticks

  long long first_frame() const { return frames.front().frame; }
  long long last_frame() const { return frames.back().frame; }
};

enum class MarkingType { Dashed, Solid };

inline const char* to_string(MarkingType t) {
  return t == MarkingType::Dashed ? "dashed" : "solid";
}

inline MarkingType marking_from_string(std::string_view s) {
  if (s == "dashed") return MarkingType::Dashed;
  if (s == "solid") return MarkingType::Solid;
  throw ParseError("unknown marking type '" + std::string(s) + "'");
}

struct Lane {
  int id = 0;
  double left_y = 0.0;
  double right_y = 0.0;
  MarkingType left_type = MarkingType::Dashed;
  MarkingType right_type = MarkingType::Dashed;

  double width() const { return right_y - left_y; }
  double center() const { return 0.5 * (left_y + right_y); }
};

struct LaneGeometry {
  int frame_rate = kFrameRate;
  std::vector<Lane> lanes;  // kept sorted by left_y

  void validate() const {
    if (frame_rate != kFrameRate)
      throw DataError("recording frame rate must be " + std::to_string(kFrameRate) + " Hz");
    if (lanes.empty()) throw DataError("geometry declares no lanes");
    for (const Lane& l : lanes)
      if (!(l.width() > 0.0)) throw DataError("lane " + std::to_string(l.id) + " has width <= 0");
    for (std::size_t i = 1; i < lanes.size(); ++i)
      if (lanes[i].left_y < lanes[i - 1].left_y) throw DataError("lanes not sorted by left_y");
  }

  // Index into `lanes`, or -1.
  int index_of(int lane_id) const {
    for (std::size_t i = 0; i < lanes.size(); ++i)
      if (lanes[i].id == lane_id) return static_cast<int>(i);
    return -1;
  }

  const Lane& lane_by_id(int lane_id) const {
    const int i = index_of(lane_id);
    if (i < 0) throw DataError("unknown lane id " + std::to_string(lane_id));
    return lanes[static_cast<std::size_t>(i)];
  }

  // Lane containing y under the [left_y, right_y) convention, clamped to the
  // outermost lanes.
  int lane_id_at(double y) const {
    for (const Lane& l : lanes)
      if (y >= l.left_y && y < l.right_y) return l.id;
    return y < lanes.front().left_y ? lanes.front().id : lanes.back().id;
  }

  // Unique marking positions, ascending.
  std::vector<double> marking_positions() const {
    std::vector<double> ys;
    for (const Lane& l : lanes) {
      ys.push_back(l.left_y);
      ys.push_back(l.right_y);
    }
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
  }
};

struct TrajectoryRecording {
  LaneGeometry geometry;
  std::vector<Trajectory> vehicles;

  const Trajectory* find_vehicle(int id) const {
    for (const Trajectory& t : vehicles)
      if (t.vehicle_id == id) return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRecordingCsvHeader =
    "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId";

inline LaneGeometry geometry_from_json(const Json& j) {
  LaneGeometry g;
  try {
    g.frame_rate = j.at("frame_rate").get<int>();
    for (const Json& lj : j.at("lanes")) {
      Lane l;
      l.id = lj.at("id").get<int>();
      l.left_y = lj.at("left_y").get<double>();
      l.right_y = lj.at("right_y").get<double>();
      l.left_type = marking_from_string(lj.at("left_type").get<std::string>());
      l.right_type = marking_from_string(lj.at("right_type").get<std::string>());
      g.lanes.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad recording metadata: ") + e.what());
  }
  std::sort(g.lanes.begin(), g.lanes.end(),
            [](const Lane& a, const Lane& b) { return a.left_y < b.left_y; });
  g.validate();
  return g;
}

inline Json geometry_to_json(const LaneGeometry& g) {
  Json j;
  j["format_version"] = 1;
  j["frame_rate"] = g.frame_rate;
  Json lanes = Json::array();
  for (const Lane& l : g.lanes) {
    Json lj;
    lj["id"] = l.id;
    lj["left_y"] = l.left_y;
    lj["right_y"] = l.right_y;
    lj["left_type"] = to_string(l.left_type);
    lj["right_type"] = to_string(l.right_type);
    lanes.push_back(std::move(lj));
  }
  j["lanes"] = std::move(lanes);
  return j;
}

inline std::filesystem::path metadata_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

inline TrajectoryRecording load_recording(const std::filesystem::path& csv_path,
                                          const std::filesystem::path& meta_path) {
  TrajectoryRecording rec;
  rec.geometry = geometry_from_json(load_json(meta_path));

  const std::string text = read_file(csv_path);
  std::size_t pos = 0, line_no = 0;
  bool saw_header = false;
  // vehicle id -> index into rec.vehicles, in order of first appearance
  std::vector<int> index_by_id;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    if (!saw_header) {
      if (line != kRecordingCsvHeader)
        throw ParseError("line 1: unexpected CSV header '" + std::string(line) + "'");
      saw_header = true;
      continue;
    }

    const auto cells = split_csv(line);
    if (cells.size() != 9)
      throw ParseError("line " + std::to_string(line_no) + ": expected 9 columns, got " +
                       std::to_string(cells.size()));
    VehicleFrame f;
    f.frame = parse_int(cells[0], line_no);
    f.vehicle_id = static_cast<int>(parse_int(cells[1], line_no));
    f.x = parse_double(cells[2], line_no);
    f.y = parse_double(cells[3], line_no);
    f.vx = parse_double(cells[4], line_no);
    f.vy = parse_double(cells[5], line_no);
    f.ax = parse_double(cells[6], line_no);
    f.ay = parse_double(cells[7], line_no);
    f.lane_id = static_cast<int>(parse_int(cells[8], line_no));

    Trajectory* traj = nullptr;
    for (Trajectory& t : rec.vehicles)
      if (t.vehicle_id == f.vehicle_id) {
        traj = &t;
        break;
      }
    if (traj == nullptr) {
      rec.vehicles.push_back(Trajectory{f.vehicle_id, {}});
      traj = &rec.vehicles.back();
    }
    if (!traj->frames.empty()) {
      const long long prev = traj->frames.back().frame;
      if (f.frame <= prev)
        throw DataError("vehicle " + std::to_string(f.vehicle_id) +
                        ": non-monotone frame numbers");
      if (f.frame != prev + 1)
        throw DataError("vehicle " + std::to_string(f.vehicle_id) + ": gap between frames " +
                        std::to_string(prev) + " and " + std::to_string(f.frame));
    }
    traj->frames.push_back(f);
  }
  if (!saw_header) throw ParseError("line 1: missing CSV header");

  std::sort(rec.vehicles.begin(), rec.vehicles.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.vehicle_id < b.vehicle_id; });
  return rec;
}

inline TrajectoryRecording load_recording(const std::filesystem::path& csv_path) {
  return load_recording(csv_path, metadata_path_for(csv_path));
}

inline std::string recording_to_csv(const TrajectoryRecording& rec) {
  std::string out(kRecordingCsvHeader);
  out += "\n";
  // Rows ordered by frame, then vehicle id: matches a frame-by-frame capture.
  struct RowRef {
    const VehicleFrame* f;
  };
  std::vector<RowRef> rows;
  for (const Trajectory& t : rec.vehicles)
    for (const VehicleFrame& f : t.frames) rows.push_back(RowRef{&f});
  std::sort(rows.begin(), rows.end(), [](const RowRef& a, const RowRef& b) {
    if (a.f->frame != b.f->frame) return a.f->frame < b.f->frame;
    return a.f->vehicle_id < b.f->vehicle_id;
  });
  for (const RowRef& r : rows) {
    const VehicleFrame& f = *r.f;
    out += std::to_string(f.frame) + "," + std::to_string(f.vehicle_id) + "," + fmt_double(f.x) +
           "," + fmt_double(f.y) + "," + fmt_double(f.vx) + "," + fmt_double(f.vy) + "," +
           fmt_double(f.ax) + "," + fmt_double(f.ay) + "," + std::to_string(f.lane_id) + "\n";
  }
  return out;
}

inline void save_recording(const std::filesystem::path& csv_path,
                           const TrajectoryRecording& rec) {
  write_file(csv_path, recording_to_csv(rec));
  save_json(metadata_path_for(csv_path), geometry_to_json(rec.geometry));
}

}  // namespace ttlc
