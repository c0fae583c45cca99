#pragma once

#include <algorithm>
#include <vector>

#include "ttlc/hyperparams.hpp"
#include "ttlc/recording.hpp"

namespace ttlc {

enum class LaneChangeDirection { Left, Right };

inline const char* to_string(LaneChangeDirection d) {
  return d == LaneChangeDirection::Left ? "left" : "right";
}

struct LaneCrossing {
  long long frame = 0;  // first frame with the center on the far side
  LaneChangeDirection direction = LaneChangeDirection::Left;
};

// Scans a trajectory against every lane marking. A crossing is the first
// frame whose center y sits strictly on the other side of a marking than the
// last known side; sitting exactly on the marking decides nothing yet.
inline std::vector<LaneCrossing> find_lane_crossings(const Trajectory& traj,
                                                     const LaneGeometry& geometry) {
  std::vector<LaneCrossing> out;
  const std::vector<double> markings = geometry.marking_positions();
  std::vector<int> last_side(markings.size(), 0);

  for (std::size_t mi = 0; mi < markings.size(); ++mi) {
    const double y0 = traj.frames.empty() ? 0.0 : traj.frames.front().y - markings[mi];
    last_side[mi] = y0 > 0.0 ? 1 : (y0 < 0.0 ? -1 : 0);
  }

  for (std::size_t i = 1; i < traj.frames.size(); ++i) {
    for (std::size_t mi = 0; mi < markings.size(); ++mi) {
      const double d = traj.frames[i].y - markings[mi];
      const int side = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
      if (side == 0) continue;
      if (last_side[mi] != 0 && side != last_side[mi]) {
        // y decreasing through the marking = lane change to the left
        out.push_back(LaneCrossing{traj.frames[i].frame,
                                   side < last_side[mi] ? LaneChangeDirection::Left
                                                        : LaneChangeDirection::Right});
      }
      last_side[mi] = side;
    }
  }

  std::sort(out.begin(), out.end(),
            [](const LaneCrossing& a, const LaneCrossing& b) { return a.frame < b.frame; });
  return out;
}

// Clipped times to the next crossing in each direction, in seconds. Exactly
// kTtlcClipSeconds when no crossing lies ahead.
inline std::pair<double, double> label_sample(const std::vector<LaneCrossing>& crossings,
                                              long long frame, int frame_rate = kFrameRate) {
  double ttlcl = kTtlcClipSeconds;
  double ttlcr = kTtlcClipSeconds;
  bool have_left = false, have_right = false;
  for (const LaneCrossing& c : crossings) {
    if (c.frame < frame) continue;
    const double dt = static_cast<double>(c.frame - frame) / frame_rate;
    if (c.direction == LaneChangeDirection::Left && !have_left) {
      ttlcl = std::min(kTtlcClipSeconds, dt);
      have_left = true;
    } else if (c.direction == LaneChangeDirection::Right && !have_right) {
      ttlcr = std::min(kTtlcClipSeconds, dt);
      have_right = true;
    }
    if (have_left && have_right) break;
  }
  return {ttlcl, ttlcr};
}

enum class Maneuver { LCL, FLW, LCR };

inline const char* to_string(Maneuver m) {
  switch (m) {
    case Maneuver::LCL: return "LCL";
    case Maneuver::FLW: return "FLW";
    case Maneuver::LCR: return "LCR";
  }
  return "?";
}

// Single-label maneuver class against a horizon; the smaller TTLC wins and
// ties go to LCL.
inline Maneuver label_maneuver(double ttlcl, double ttlcr, double horizon) {
  if (ttlcl < horizon && ttlcl <= ttlcr) return Maneuver::LCL;
  if (ttlcr < horizon && ttlcr < ttlcl) return Maneuver::LCR;
  return Maneuver::FLW;
}

}  // namespace ttlc
