#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/recording.hpp"

namespace ttlc {

inline constexpr std::size_t kFeatureCount = 21;

// Fixed feature order. Marking types encode dashed=0 / solid=1; activity
// flags are 1 when the corresponding neighbor exists. Role suffixes:
// f front, fr front right, r right/rear (see kFeatureNames), rr rear right,
// l left. Longitudinal `r` features refer to the rear vehicle in the own
// lane; lateral `r` features to the nearest vehicle in the right lane.
enum Feature : std::size_t {
  kTml = 0,     // type of the left marking
  kTmr,         // type of the right marking
  kActvFr,      // front right vehicle present
  kActvR,       // right vehicle present
  kActvRr,      // rear right vehicle present
  kWLane,       // lane width
  kDxRelF,      // longitudinal distance to the front vehicle
  kDxRelFr,     // longitudinal distance to the front right vehicle
  kDxRelR,      // longitudinal distance to the rear vehicle
  kDyMl,        // lateral distance to the left marking
  kDyRelR,      // lateral distance to the right vehicle
  kDyRelRr,     // lateral distance to the rear right vehicle
  kVxRelF,      // relative longitudinal velocity of the front vehicle
  kVxRelR,      // relative longitudinal velocity of the rear vehicle
  kVyRelF,      // relative lateral velocity of the front vehicle
  kVyRelFr,     // relative lateral velocity of the front right vehicle
  kVyRelL,      // relative lateral velocity of the left vehicle
  kVyRelR,      // relative lateral velocity of the right vehicle
  kAx,          // longitudinal acceleration of the prediction target
  kAxRelFr,     // relative longitudinal acceleration of the front right vehicle
  kAy,          // lateral acceleration of the prediction target
};

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "t_ml",     "t_mr",      "actv_fr",  "actv_r",    "actv_rr",  "w_lane",   "dx_rel_f",
    "dx_rel_fr", "dx_rel_r", "dy_ml",    "dy_rel_r",  "dy_rel_rr", "vx_rel_f", "vx_rel_r",
    "vy_rel_f", "vy_rel_fr", "vy_rel_l", "vy_rel_r",  "ax",        "ax_rel_fr", "ay"};

// Missing-neighbor sentinels: +/-100 m for longitudinal distances, zero for
// everything else. Bounded values keep the standardization stable.
inline constexpr double kMissingFrontGap = 100.0;
inline constexpr double kMissingRearGap = -100.0;

using FeatureRow = std::array<double, kFeatureCount>;

// Per-frame lookup of every vehicle present, built once per recording.
class FrameIndex {
 public:
  explicit FrameIndex(const TrajectoryRecording& rec) {
    for (std::size_t vi = 0; vi < rec.vehicles.size(); ++vi) {
      const Trajectory& t = rec.vehicles[vi];
      for (std::size_t fi = 0; fi < t.frames.size(); ++fi)
        by_frame_[t.frames[fi].frame].push_back({vi, fi});
    }
  }

  struct Entry {
    std::size_t vehicle_index;
    std::size_t frame_index;
  };

  const std::vector<Entry>& at(long long frame) const {
    static const std::vector<Entry> empty;
    const auto it = by_frame_.find(frame);
    return it == by_frame_.end() ? empty : it->second;
  }

 private:
  std::unordered_map<long long, std::vector<Entry>> by_frame_;
};

namespace detail {

struct Neighbor {
  const VehicleFrame* frame = nullptr;
  double dx = 0.0;

  bool present() const { return frame != nullptr; }
};

// Prefers the smaller longitudinal distance; ties go to the lower vehicle id
// so extraction is deterministic.
inline void take_if_closer(Neighbor& slot, const VehicleFrame& cand, double dx, double key) {
  if (!slot.present() || key < std::fabs(slot.dx) - 1e-12 ||
      (std::fabs(key - std::fabs(slot.dx)) <= 1e-12 && cand.vehicle_id < slot.frame->vehicle_id)) {
    slot.frame = &cand;
    slot.dx = dx;
  }
}

}  // namespace detail

// Computes the full feature vector for one vehicle at one frame. Neighbor
// roles are assigned by lane relative to the target lane and by nearest
// longitudinal distance; relative quantities are neighbor minus target.
inline FeatureRow extract_features(const TrajectoryRecording& rec, const FrameIndex& index,
                                   std::size_t vehicle_index, std::size_t frame_index) {
  const Trajectory& traj = rec.vehicles[vehicle_index];
  const VehicleFrame& me = traj.frames[frame_index];
  const LaneGeometry& geo = rec.geometry;

  const int lane_idx = geo.index_of(me.lane_id);
  if (lane_idx < 0)
    throw DataError("vehicle " + std::to_string(me.vehicle_id) + " in unknown lane " +
                    std::to_string(me.lane_id));
  const Lane& lane = geo.lanes[static_cast<std::size_t>(lane_idx)];
  const int left_lane_id =
      lane_idx > 0 ? geo.lanes[static_cast<std::size_t>(lane_idx) - 1].id : -1;
  const int right_lane_id = static_cast<std::size_t>(lane_idx) + 1 < geo.lanes.size()
                                ? geo.lanes[static_cast<std::size_t>(lane_idx) + 1].id
                                : -1;

  detail::Neighbor front, rear, front_right, rear_right, right, left;
  for (const FrameIndex::Entry& e : index.at(me.frame)) {
    if (e.vehicle_index == vehicle_index) continue;
    const VehicleFrame& other = rec.vehicles[e.vehicle_index].frames[e.frame_index];
    const double dx = other.x - me.x;
    if (other.lane_id == me.lane_id) {
      if (dx > 0.0) detail::take_if_closer(front, other, dx, dx);
      if (dx < 0.0) detail::take_if_closer(rear, other, dx, -dx);
    } else if (other.lane_id == right_lane_id && right_lane_id != -1) {
      if (dx > 0.0) detail::take_if_closer(front_right, other, dx, dx);
      if (dx < 0.0) detail::take_if_closer(rear_right, other, dx, -dx);
      detail::take_if_closer(right, other, dx, std::fabs(dx));
    } else if (other.lane_id == left_lane_id && left_lane_id != -1) {
      detail::take_if_closer(left, other, dx, std::fabs(dx));
    }
  }

  FeatureRow f{};
  f[kTml] = lane.left_type == MarkingType::Solid ? 1.0 : 0.0;
  f[kTmr] = lane.right_type == MarkingType::Solid ? 1.0 : 0.0;
  f[kActvFr] = front_right.present() ? 1.0 : 0.0;
  f[kActvR] = right.present() ? 1.0 : 0.0;
  f[kActvRr] = rear_right.present() ? 1.0 : 0.0;
  f[kWLane] = lane.width();
  f[kDxRelF] = front.present() ? front.dx : kMissingFrontGap;
  f[kDxRelFr] = front_right.present() ? front_right.dx : kMissingFrontGap;
  f[kDxRelR] = rear.present() ? rear.dx : kMissingRearGap;
  f[kDyMl] = me.y - lane.left_y;
  f[kDyRelR] = right.present() ? right.frame->y - me.y : 0.0;
  f[kDyRelRr] = rear_right.present() ? rear_right.frame->y - me.y : 0.0;
  f[kVxRelF] = front.present() ? front.frame->vx - me.vx : 0.0;
  f[kVxRelR] = rear.present() ? rear.frame->vx - me.vx : 0.0;
  f[kVyRelF] = front.present() ? front.frame->vy - me.vy : 0.0;
  f[kVyRelFr] = front_right.present() ? front_right.frame->vy - me.vy : 0.0;
  f[kVyRelL] = left.present() ? left.frame->vy - me.vy : 0.0;
  f[kVyRelR] = right.present() ? right.frame->vy - me.vy : 0.0;
  f[kAx] = me.ax;
  f[kAxRelFr] = front_right.present() ? front_right.frame->ax - me.ax : 0.0;
  f[kAy] = me.ay;
  return f;
}

}  // namespace ttlc
