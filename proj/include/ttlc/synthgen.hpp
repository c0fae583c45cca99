#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ttlc/common.hpp"
#include "ttlc/labeling.hpp"
#include "ttlc/recording.hpp"
#include "ttlc/rng.hpp"

namespace ttlc {

// Forces a lane change for one vehicle at a fixed simulation time; used to
// construct exactly reproducible labeling scenarios.
struct ScriptedLaneChange {
  int vehicle_id = 0;
  double t_start = 0.0;
  LaneChangeDirection direction = LaneChangeDirection::Left;
  double duration = 4.0;
};

struct ScenarioConfig {
  int num_vehicles = 200;
  int num_lanes = 3;
  double lane_width = 3.75;
  double duration_s = 600.0;
  double lane_change_rate_per_min = 2.0;  // expected attempts per vehicle per minute
  double lc_duration_min = 3.5;
  double lc_duration_max = 4.5;
  double speed_min = 23.0;  // m/s
  double speed_max = 33.0;
  double observation_length_m = 420.0;  // only this x range is recorded
  std::uint64_t seed = 0;
  std::vector<ScriptedLaneChange> scripted;

  // Drivers drift slightly toward the target lane before committing to the
  // actual maneuver; this precursor is what makes early anticipation
  // learnable at all. Scripted changes skip it.
  double prep_duration_min = 2.0;
  double prep_duration_max = 4.0;
  double prep_drift_m = 0.3;

  // Longitudinal car-following (fixed published defaults; configuration, not
  // contract).
  double idm_min_gap = 2.0;
  double idm_headway = 1.5;
  double idm_max_accel = 1.5;
  double idm_comfort_decel = 2.0;
  double vehicle_length = 5.0;

  void validate() const {
    if (num_vehicles < 1) throw ConfigError("num_vehicles must be >= 1");
    if (num_lanes < 1) throw ConfigError("num_lanes must be >= 1");
    if (!(lane_width > 0.0)) throw ConfigError("lane_width must be positive");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
    if (lane_change_rate_per_min < 0.0) throw ConfigError("lane_change_rate must be >= 0");
    if (lc_duration_min < 3.0 || lc_duration_max > 5.0 || lc_duration_min > lc_duration_max)
      throw ConfigError("lc_duration range must lie within [3, 5] s");
    if (prep_duration_min < 0.0 || prep_duration_min > prep_duration_max ||
        prep_drift_m < 0.0 || prep_drift_m > 0.45 * lane_width)
      throw ConfigError("invalid lane change preparation parameters");
    if (!(speed_min > 0.0) || speed_min > speed_max)
      throw ConfigError("invalid speed range");
    if (!(observation_length_m > 0.0)) throw ConfigError("observation length must be positive");
    for (const ScriptedLaneChange& s : scripted)
      if (s.vehicle_id < 0 || s.vehicle_id >= num_vehicles)
        throw ConfigError("scripted lane change for unknown vehicle");

    // Injected flow per lane must stay below what jam spacing can carry.
    const double arrivals_per_lane = num_vehicles / duration_s / num_lanes;  // veh/s
    const double jam_flow = speed_min / (vehicle_length + idm_min_gap);
    if (arrivals_per_lane > 0.9 * jam_flow)
      throw ConfigError("infeasible density: vehicles per lane-km exceed jam spacing");
  }

  LaneGeometry make_geometry() const {
    LaneGeometry g;
    g.frame_rate = kFrameRate;
    for (int i = 0; i < num_lanes; ++i) {
      Lane l;
      l.id = i + 1;
      l.left_y = i * lane_width;
      l.right_y = (i + 1) * lane_width;
      l.left_type = i == 0 ? MarkingType::Solid : MarkingType::Dashed;
      l.right_type = i == num_lanes - 1 ? MarkingType::Solid : MarkingType::Dashed;
      g.lanes.push_back(l);
    }
    return g;
  }
};

struct GroundTruthCrossing {
  int vehicle_id = 0;
  long long frame = 0;
  LaneChangeDirection direction = LaneChangeDirection::Left;
};

struct GeneratedScenario {
  TrajectoryRecording recording;
  std::vector<GroundTruthCrossing> crossings;
};

namespace detail {

inline double sigmoid_raw(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Normalized logistic reaching 0 at u=0 and 1 at u=1 exactly, midpoint at
// u=1/2 where the lateral position sits on the lane marking.
inline double lc_profile(double u) {
  constexpr double k = 8.0;
  const double lo = sigmoid_raw(-k / 2.0);
  const double hi = sigmoid_raw(k / 2.0);
  return (sigmoid_raw(k * (u - 0.5)) - lo) / (hi - lo);
}

struct SimVehicle {
  int id = 0;
  double spawn_time = 0.0;
  bool active = false;
  bool done = false;
  double x = 0.0;
  double v = 0.0;
  double v_desired = 30.0;
  double y = 0.0;
  int lane_index = 0;  // 0-based, current (by y)

  // Lateral maneuver state
  bool changing = false;
  double lc_t0 = 0.0, lc_duration = 4.0;
  double lc_y_from = 0.0, lc_y_to = 0.0;
  double lc_marking = 0.0;
  LaneChangeDirection lc_direction = LaneChangeDirection::Left;
  int lc_last_side = 0;      // last nonzero side on a *recorded* frame
  bool lc_reported = false;  // ground truth emitted for this maneuver

  // Precursor drift before the committed maneuver
  bool preparing = false;
  double prep_t0 = 0.0, prep_duration = 1.0;
  double prep_from_y = 0.0, prep_delta = 0.0;
  double pending_lc_duration = 4.0;
  LaneChangeDirection prep_direction = LaneChangeDirection::Left;

  double next_attempt = 0.0;
  std::size_t next_scripted = 0;

  // Recorded block
  std::vector<double> rec_x, rec_y, rec_ax;
  std::vector<double> rec_v;
  long long rec_first_frame = -1;
};

}  // namespace detail

// Simulates IDM-style longitudinal traffic with logistic lane changes and
// emits a highD-schema recording of the observation window together with the
// exact crossing frames used by the labeling oracle.
inline GeneratedScenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  const LaneGeometry geometry = cfg.make_geometry();
  const double dt = 1.0 / kFrameRate;
  const long long total_frames = static_cast<long long>(std::llround(cfg.duration_s * kFrameRate));
  const double spawn_x = -80.0;
  const double despawn_x = cfg.observation_length_m + 150.0;
  const double rate_per_s = cfg.lane_change_rate_per_min / 60.0;

  Rng world_rng = Rng::keyed(cfg.seed, {rng_stream::kScenario});

  std::vector<detail::SimVehicle> vehicles(static_cast<std::size_t>(cfg.num_vehicles));
  std::vector<std::vector<ScriptedLaneChange>> scripted(vehicles.size());
  for (const ScriptedLaneChange& s : cfg.scripted)
    scripted[static_cast<std::size_t>(s.vehicle_id)].push_back(s);
  for (auto& list : scripted)
    std::sort(list.begin(), list.end(),
              [](const ScriptedLaneChange& a, const ScriptedLaneChange& b) {
                return a.t_start < b.t_start;
              });

  // Spawn schedule: vehicle 0 immediately, the rest uniform over the first
  // 90% of the scenario so late vehicles still traverse the window.
  {
    std::vector<double> times(vehicles.size(), 0.0);
    for (std::size_t i = 1; i < times.size(); ++i)
      times[i] = world_rng.uniform(0.0, 0.9 * cfg.duration_s);
    std::sort(times.begin(), times.end());
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      detail::SimVehicle& v = vehicles[i];
      v.id = static_cast<int>(i) + 1;
      v.spawn_time = times[i];
      v.lane_index = static_cast<int>(world_rng.below(static_cast<std::uint64_t>(cfg.num_lanes)));
      v.v_desired = world_rng.uniform(cfg.speed_min, cfg.speed_max);
      v.v = v.v_desired;
      v.x = spawn_x;
      v.y = geometry.lanes[static_cast<std::size_t>(v.lane_index)].center();
    }
  }

  std::vector<Rng> veh_rng;
  veh_rng.reserve(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i)
    veh_rng.push_back(Rng::keyed(cfg.seed, {rng_stream::kScenario, 1000 + i}));
  for (std::size_t i = 0; i < vehicles.size(); ++i)
    vehicles[i].next_attempt =
        rate_per_s > 0.0 ? vehicles[i].spawn_time + veh_rng[i].exponential(rate_per_s) : 1e18;

  std::vector<GroundTruthCrossing> truth;

  // Vehicles indexed per lane each tick; a changing vehicle occupies both its
  // origin and target lane for gap queries.
  std::vector<std::vector<std::size_t>> lane_members(static_cast<std::size_t>(cfg.num_lanes));

  auto lanes_of = [&](const detail::SimVehicle& v) {
    std::vector<int> out;
    out.push_back(v.lane_index);
    if (v.changing) {
      const int target = geometry.index_of(geometry.lane_id_at(v.lc_y_to));
      if (target != v.lane_index) out.push_back(target);
      const int origin = geometry.index_of(geometry.lane_id_at(v.lc_y_from));
      if (origin != v.lane_index && origin != target) out.push_back(origin);
    }
    return out;
  };

  auto leader_in_lane = [&](const detail::SimVehicle& v, int lane) -> const detail::SimVehicle* {
    const detail::SimVehicle* best = nullptr;
    for (std::size_t j : lane_members[static_cast<std::size_t>(lane)]) {
      const detail::SimVehicle& o = vehicles[j];
      if (o.id == v.id || o.x <= v.x) continue;
      if (best == nullptr || o.x < best->x) best = &o;
    }
    return best;
  };

  auto follower_in_lane = [&](const detail::SimVehicle& v, int lane) -> const detail::SimVehicle* {
    const detail::SimVehicle* best = nullptr;
    for (std::size_t j : lane_members[static_cast<std::size_t>(lane)]) {
      const detail::SimVehicle& o = vehicles[j];
      if (o.id == v.id || o.x >= v.x) continue;
      if (best == nullptr || o.x > best->x) best = &o;
    }
    return best;
  };

  auto idm_accel = [&](const detail::SimVehicle& v, const detail::SimVehicle* leader) {
    const double free_term = std::pow(v.v / v.v_desired, 4.0);
    double interaction = 0.0;
    if (leader != nullptr) {
      const double gap = leader->x - v.x - cfg.vehicle_length;
      const double dv = v.v - leader->v;
      const double s_star = cfg.idm_min_gap + v.v * cfg.idm_headway +
                            v.v * dv / (2.0 * std::sqrt(cfg.idm_max_accel * cfg.idm_comfort_decel));
      const double s = std::max(gap, 0.1);
      interaction = (s_star > 0.0 ? s_star / s : 0.0) * (s_star > 0.0 ? s_star / s : 0.0);
    }
    double a = cfg.idm_max_accel * (1.0 - free_term - interaction);
    return std::clamp(a, -8.0, cfg.idm_max_accel);
  };

  auto gap_ok = [&](const detail::SimVehicle& v, int target_lane) {
    const detail::SimVehicle* lead = leader_in_lane(v, target_lane);
    if (lead != nullptr &&
        lead->x - v.x - cfg.vehicle_length < cfg.idm_min_gap + 0.6 * cfg.idm_headway * v.v)
      return false;
    const detail::SimVehicle* rear = follower_in_lane(v, target_lane);
    if (rear != nullptr &&
        v.x - rear->x - cfg.vehicle_length < cfg.idm_min_gap + 0.6 * cfg.idm_headway * rear->v)
      return false;
    return true;
  };

  auto begin_change = [&](detail::SimVehicle& v, LaneChangeDirection dir, double t,
                          double duration) {
    const int target =
        v.lane_index + (dir == LaneChangeDirection::Left ? -1 : 1);
    if (target < 0 || target >= cfg.num_lanes) return false;
    v.changing = true;
    v.lc_t0 = t;
    v.lc_duration = duration;
    v.lc_y_from = v.y;
    v.lc_y_to = geometry.lanes[static_cast<std::size_t>(target)].center();
    v.lc_marking = dir == LaneChangeDirection::Left
                       ? geometry.lanes[static_cast<std::size_t>(v.lane_index)].left_y
                       : geometry.lanes[static_cast<std::size_t>(v.lane_index)].right_y;
    v.lc_direction = dir;
    v.lc_last_side = 0;
    v.lc_reported = false;
    return true;
  };

  for (long long frame = 0; frame < total_frames; ++frame) {
    const double t = frame * dt;

    // Activate due spawns when the entry area is clear.
    for (detail::SimVehicle& v : vehicles) {
      if (v.active || v.done || v.spawn_time > t) continue;
      bool clear = true;
      for (const detail::SimVehicle& o : vehicles) {
        if (!o.active || o.lane_index != v.lane_index) continue;
        if (o.x - spawn_x - cfg.vehicle_length < cfg.idm_min_gap + cfg.idm_headway * v.v &&
            o.x >= spawn_x) {
          clear = false;
          break;
        }
      }
      if (clear) {
        v.active = true;
        v.x = spawn_x;
      }
    }

    for (auto& members : lane_members) members.clear();
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      if (!vehicles[i].active) continue;
      for (int lane : lanes_of(vehicles[i]))
        lane_members[static_cast<std::size_t>(lane)].push_back(i);
    }

    // Record snapshots inside the observation window, then advance.
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      detail::SimVehicle& v = vehicles[i];
      if (!v.active) continue;

      const bool recorded = v.x >= 0.0 && v.x <= cfg.observation_length_m;
      if (recorded) {
        if (v.rec_first_frame < 0) v.rec_first_frame = frame;
        v.rec_x.push_back(v.x);
        v.rec_y.push_back(v.y);
        v.rec_v.push_back(v.v);
      }

      // Lane change bookkeeping on recorded frames only: the ground truth
      // must refer to what the recording can actually show.
      if (v.changing && recorded && !v.lc_reported) {
        const double d = v.y - v.lc_marking;
        const int side = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (side != 0) {
          if (v.lc_last_side != 0 && side != v.lc_last_side) {
            truth.push_back(GroundTruthCrossing{v.id, frame, v.lc_direction});
            v.lc_reported = true;
          }
          v.lc_last_side = side;
        }
      }

      // Maneuver decisions.
      if (!v.changing && !v.preparing) {
        auto& script = scripted[i];
        if (v.next_scripted < script.size() && t >= script[v.next_scripted].t_start) {
          // Scripted changes replay the stated profile exactly, no precursor.
          const ScriptedLaneChange& s = script[v.next_scripted];
          begin_change(v, s.direction, t, s.duration);
          ++v.next_scripted;
        } else if (script.empty() && t >= v.next_attempt) {
          const bool can_left = v.lane_index > 0;
          const bool can_right = v.lane_index + 1 < cfg.num_lanes;
          if (can_left || can_right) {
            LaneChangeDirection dir;
            if (can_left && can_right)
              dir = veh_rng[i].below(2) == 0 ? LaneChangeDirection::Left
                                             : LaneChangeDirection::Right;
            else
              dir = can_left ? LaneChangeDirection::Left : LaneChangeDirection::Right;
            const double duration = veh_rng[i].uniform(cfg.lc_duration_min, cfg.lc_duration_max);
            const int target = v.lane_index + (dir == LaneChangeDirection::Left ? -1 : 1);
            if (gap_ok(v, target)) {
              v.preparing = true;
              v.prep_t0 = t;
              v.prep_duration = veh_rng[i].uniform(cfg.prep_duration_min, cfg.prep_duration_max);
              v.prep_from_y = v.y;
              v.prep_delta = (dir == LaneChangeDirection::Left ? -1.0 : 1.0) *
                             cfg.prep_drift_m * veh_rng[i].uniform(0.7, 1.0);
              v.prep_direction = dir;
              v.pending_lc_duration = duration;
            }
          }
          v.next_attempt = t + veh_rng[i].exponential(rate_per_s);
        }
      }

      // Longitudinal update (IDM against the most restrictive leader).
      const detail::SimVehicle* leader = nullptr;
      double a = cfg.idm_max_accel;
      for (int lane : lanes_of(v)) {
        const detail::SimVehicle* cand = leader_in_lane(v, lane);
        const double ca = idm_accel(v, cand);
        if (ca < a) {
          a = ca;
          leader = cand;
        }
      }
      (void)leader;
      if (recorded) v.rec_ax.push_back(a);

      v.v = std::max(0.0, v.v + a * dt);
      v.x += v.v * dt;

      // Lateral update.
      const double t_next = t + dt;
      if (v.preparing) {
        const double u = (t_next - v.prep_t0) / v.prep_duration;
        if (u < 1.0) {
          const double s = u <= 0.0 ? 0.0 : u * u * (3.0 - 2.0 * u);  // C1 ramp
          v.y = v.prep_from_y + v.prep_delta * s;
        } else {
          v.y = v.prep_from_y + v.prep_delta;
          v.preparing = false;
          begin_change(v, v.prep_direction, v.prep_t0 + v.prep_duration,
                       v.pending_lc_duration);
        }
      }
      if (v.changing) {
        const double u = (t_next - v.lc_t0) / v.lc_duration;
        if (u >= 1.0) {
          v.y = v.lc_y_to;
          v.changing = false;
        } else if (u > 0.0) {
          v.y = v.lc_y_from + (v.lc_y_to - v.lc_y_from) * detail::lc_profile(u);
        }
      }
      v.lane_index = geometry.index_of(geometry.lane_id_at(v.y));

      if (v.x > despawn_x) {
        v.active = false;
        v.done = true;
      }
    }
  }

  // Assemble the recording; lateral velocity and acceleration come from
  // central differences of the emitted positions so the kinematics columns
  // are self-consistent.
  GeneratedScenario out;
  out.recording.geometry = geometry;
  for (detail::SimVehicle& v : vehicles) {
    if (v.rec_first_frame < 0 || v.rec_x.empty()) continue;
    const std::size_t n = v.rec_x.size();
    std::vector<double> vy(n, 0.0), ay(n, 0.0);
    auto central = [&](const std::vector<double>& src, std::vector<double>& dst) {
      if (n == 1) return;
      dst[0] = (src[1] - src[0]) / dt;
      dst[n - 1] = (src[n - 1] - src[n - 2]) / dt;
      for (std::size_t i = 1; i + 1 < n; ++i) dst[i] = (src[i + 1] - src[i - 1]) / (2.0 * dt);
    };
    central(v.rec_y, vy);
    central(vy, ay);

    Trajectory traj;
    traj.vehicle_id = v.id;
    traj.frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      VehicleFrame f;
      f.frame = v.rec_first_frame + static_cast<long long>(i);
      f.vehicle_id = v.id;
      f.x = v.rec_x[i];
      f.y = v.rec_y[i];
      f.vx = v.rec_v[i];
      f.vy = vy[i];
      f.ax = v.rec_ax[i];
      f.ay = ay[i];
      f.lane_id = geometry.lane_id_at(f.y);
      traj.frames.push_back(f);
    }
    out.recording.vehicles.push_back(std::move(traj));
  }
  std::sort(out.recording.vehicles.begin(), out.recording.vehicles.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.vehicle_id < b.vehicle_id; });
  out.crossings = std::move(truth);
  std::sort(out.crossings.begin(), out.crossings.end(),
            [](const GroundTruthCrossing& a, const GroundTruthCrossing& b) {
              if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
              return a.frame < b.frame;
            });
  return out;
}

inline Json crossings_to_json(const std::vector<GroundTruthCrossing>& cs) {
  Json arr = Json::array();
  for (const GroundTruthCrossing& c : cs) {
    Json j;
    j["vehicle_id"] = c.vehicle_id;
    j["frame"] = c.frame;
    j["direction"] = to_string(c.direction);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<GroundTruthCrossing> crossings_from_json(const Json& arr) {
  std::vector<GroundTruthCrossing> out;
  for (const Json& j : arr) {
    GroundTruthCrossing c;
    c.vehicle_id = j.at("vehicle_id").get<int>();
    c.frame = j.at("frame").get<long long>();
    c.direction = j.at("direction").get<std::string>() == "left" ? LaneChangeDirection::Left
                                                                 : LaneChangeDirection::Right;
    out.push_back(c);
  }
  return out;
}

// Writes recording CSV + metadata JSON + ground-truth crossing list.
inline void save_scenario(const std::filesystem::path& csv_path, const GeneratedScenario& s) {
  save_recording(csv_path, s.recording);
  std::filesystem::path truth_path = csv_path;
  truth_path.replace_extension(".truth.json");
  save_json(truth_path, crossings_to_json(s.crossings));
}

}  // namespace ttlc
