#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lidarplan/geometry.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/spline.hpp"

namespace lidarplan {

// ---------------------------------------------------------------------------
// Frame conversion and horizon sizing.

inline std::vector<Vec2> to_ego_frame(const std::vector<Vec2>& global_wps, const Pose2& ego_pose) {
  std::vector<Vec2> out;
  out.reserve(global_wps.size());
  for (const Vec2& p : global_wps) out.push_back(map_to_frame(ego_pose, p));
  return out;
}

// Safe braking distance from current speed. The default model keeps the
// published proportional form v/(2*mu*g); the kinematic model uses the
// textbook v^2/(2*mu*g).
inline double braking_distance(double v, double mu, double g, const std::string& model = "paper") {
  const double denom = 2.0 * mu * g;
  if (model == "kinematic") return v * v / denom;
  return v / denom;
}

inline double braking_distance(double v, const PlannerConfig& cfg) {
  return braking_distance(v, cfg.mu, cfg.g, cfg.braking_model);
}

// Number of forward waypoints covering distance d at spacing d_wp with the
// safety factor applied, clamped to what the route can still provide.
struct WaypointCount {
  int m = 0;
  bool truncated = false;
};

inline WaypointCount waypoint_count(double d, double d_wp, double f_safe, int available = -1) {
  WaypointCount out;
  if (d <= 0.0) return out;
  out.m = static_cast<int>(std::ceil(d / d_wp * f_safe));
  if (available >= 0 && out.m > available) {
    out.m = available;
    out.truncated = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Velocity-extended vehicle bounds.

struct VBound {
  int vehicle_index = -1;
  std::vector<Segment> segments;  // front, left, right, rear of the extended box
  double speed = 0.0;             // source info consumed by speed planning
  double yaw = 0.0;
  Vec2 position;
};

// Translates the two corners with the greatest projection onto the heading
// by (cos(yaw), sin(yaw)) * speed * t_est and rebuilds the four bounding
// segments of the extended rectangle.
inline VBound extend_bounds(const std::array<Vec2, 4>& corners, double yaw, double speed,
                            double t_est) {
  const Vec2 u{std::cos(yaw), std::sin(yaw)};
  const Vec2 w = u.perp();
  std::array<int, 4> idx{0, 1, 2, 3};
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double pa = corners[a].dot(u), pb = corners[b].dot(u);
    if (pa != pb) return pa > pb;
    return corners[a].dot(w) > corners[b].dot(w);
  });
  // idx[0], idx[1] are the front corners. Order each pair left-to-right so
  // side segments connect matching sides.
  int f1 = idx[0], f2 = idx[1], r1 = idx[2], r2 = idx[3];
  if (corners[f1].dot(w) < corners[f2].dot(w)) std::swap(f1, f2);
  if (corners[r1].dot(w) < corners[r2].dot(w)) std::swap(r1, r2);

  const Vec2 ext = u * (speed * t_est);
  const Vec2 c1 = corners[f1] + ext;  // front-left, extended
  const Vec2 c2 = corners[f2] + ext;  // front-right, extended
  const Vec2 c3 = corners[r1];        // rear-left
  const Vec2 c4 = corners[r2];        // rear-right

  VBound vb;
  vb.segments = {Segment{c1, c2}, Segment{c1, c3}, Segment{c2, c4}, Segment{c3, c4}};
  vb.speed = speed;
  vb.yaw = yaw;
  return vb;
}

// ---------------------------------------------------------------------------
// Collision checking (trajectory truncation against bound segments).

struct BlockingInfo {
  int vehicle_index = -1;
  double distance = 0.0;  // bound segment to the path start
  double speed = 0.0;
  double yaw = 0.0;
};

struct IntersectCheckResult {
  std::vector<Vec2> cfw;  // collision-free prefix of the input trajectory
  int vehicle_index = -1;
  double distance = 0.0;
  int blocking_segment = -1;  // index into the blocker's segment list
};

namespace planner_detail {
inline bool segment_hits_polyline(const Segment& s, const std::vector<Vec2>& poly) {
  for (size_t i = 0; i + 1 < poly.size(); ++i)
    if (segments_intersect(s, Segment{poly[i], poly[i + 1]})) return true;
  return false;
}
}  // namespace planner_detail

// Walks every bound segment of every vehicle and pops waypoints from the far
// end of the working path until that segment no longer crosses it. The last
// vehicle to cause a pop is the reported blocker (the nearest one, since a
// nearer blocker shortens the path below any farther crossing).
inline IntersectCheckResult intersect_check(const std::vector<Vec2>& rwp,
                                            const std::vector<VBound>& bounds) {
  IntersectCheckResult res;
  res.cfw = rwp;
  if (rwp.empty()) return res;
  for (const VBound& vb : bounds) {
    for (size_t si = 0; si < vb.segments.size(); ++si) {
      const Segment& seg = vb.segments[si];
      bool popped = false;
      while (res.cfw.size() >= 2 && planner_detail::segment_hits_polyline(seg, res.cfw)) {
        res.cfw.pop_back();
        popped = true;
      }
      if (popped) {
        res.vehicle_index = vb.vehicle_index;
        res.distance = point_segment_distance(rwp.front(), seg);
        res.blocking_segment = static_cast<int>(si);
      }
    }
  }
  return res;
}

struct CollisionFreePath {
  std::vector<Vec2> new_path;
  std::optional<BlockingInfo> blocking;
};

// Composition step: runs the intersect check over all vehicle bounds and
// joins the blocker's index back to its speed and yaw.
inline CollisionFreePath generate_collision_free_path(const std::vector<VBound>& vlist,
                                                      const std::vector<Vec2>& rwp) {
  CollisionFreePath out;
  const IntersectCheckResult res = intersect_check(rwp, vlist);
  out.new_path = res.cfw;
  if (res.vehicle_index >= 0) {
    BlockingInfo info;
    info.vehicle_index = res.vehicle_index;
    info.distance = res.distance;
    for (const VBound& vb : vlist)
      if (vb.vehicle_index == res.vehicle_index) {
        info.speed = vb.speed;
        info.yaw = vb.yaw;
        break;
      }
    out.blocking = info;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Three-case speed planning.

enum class SpeedCase { Free, Obstacle, Platoon };

inline const char* speed_case_name(SpeedCase c) {
  switch (c) {
    case SpeedCase::Free:
      return "free";
    case SpeedCase::Obstacle:
      return "obstacle";
    default:
      return "platoon";
  }
}

struct SpeedPlan {
  double v_exc = 0.0;  // after the reachability clamp
  double v_pre = 0.0;  // raw case value before clamping
  SpeedCase speed_case = SpeedCase::Free;
  double v_reach = 0.0;
  double d_safe = 0.0;
};

// Case selection: free road tracks the target pose; a blocker that is static
// or not aligned with the ego heading is approached as an obstacle; an
// aligned moving blocker is followed as a platoon leader. The result is
// clamped to [0, v_reach] where v_reach = min(max(v + a_max*dt, v_init), v_max).
inline SpeedPlan plan_speed(const std::optional<BlockingInfo>& blocking, double v_current,
                            double d_pose, double dt, const PlannerConfig& cfg) {
  SpeedPlan plan;
  const double d_brake = braking_distance(v_current, cfg);
  plan.d_safe = d_brake + cfg.d_buffer;
  if (!blocking.has_value()) {
    plan.speed_case = SpeedCase::Free;
    const double d_reach = v_current * dt;
    plan.v_pre = v_current + (d_pose - d_reach) * dt;
  } else {
    const bool aligned =
        std::abs(wrap_angle(blocking->yaw)) < cfg.align_threshold_deg * M_PI / 180.0;
    const bool moving = blocking->speed >= cfg.static_speed_threshold;
    if (aligned && moving) {
      plan.speed_case = SpeedCase::Platoon;
      plan.v_pre = blocking->speed + cfg.w * (blocking->distance - plan.d_safe) * dt;
    } else {
      plan.speed_case = SpeedCase::Obstacle;
      plan.v_pre = cfg.v_appr + (blocking->distance - plan.d_safe) / plan.d_safe * cfg.v_appr;
    }
  }
  plan.v_reach = std::min(std::max(v_current + cfg.a_max * dt, cfg.v_init), cfg.v_max);
  plan.v_exc = std::clamp(plan.v_pre, 0.0, plan.v_reach);
  return plan;
}

// ---------------------------------------------------------------------------
// Per-tick composition.

// Obstacle as seen by the planner, in the ego frame.
struct ObstacleInfo {
  int index = -1;  // stable id (track id or world vehicle id)
  Vec2 center;
  double yaw = 0.0;  // relative to ego heading
  double speed = 0.0;
  double length = 4.5;
  double width = 1.9;
};

struct PlanStageTimes {
  double path_generation_us = 0.0;
  double speed_planning_us = 0.0;
};

struct PlanResult {
  EgoTrajectory trajectory;  // resampled reference path
  std::vector<Vec2> cfw;     // collision-free prefix
  std::optional<BlockingInfo> blocking;
  SpeedPlan speed;
  Vec2 target_pos;
  double target_heading = 0.0;
  double d_pose = 0.0;
  int m_waypoints = 0;
  bool route_truncated = false;
  bool route_exhausted = false;
  bool spline_passthrough = false;
};

// Plans one tick from ego-frame waypoints (route points ahead of the ego,
// origin not included) and ego-frame obstacles. v_max in cfg must already
// reflect the current road limit.
inline PlanResult plan_local(const std::vector<Vec2>& ego_wps, double v_current,
                             const std::vector<ObstacleInfo>& obstacles,
                             const PlannerConfig& cfg, double dt, bool route_truncated,
                             PlanStageTimes* times = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  PlanResult result;
  result.route_truncated = route_truncated;

  std::vector<Vec2> wps;
  wps.reserve(ego_wps.size() + 1);
  wps.push_back({0.0, 0.0});
  wps.insert(wps.end(), ego_wps.begin(), ego_wps.end());
  result.trajectory = bspline_resample(wps, cfg.t_s);
  result.spline_passthrough = result.trajectory.passthrough;
  result.m_waypoints = static_cast<int>(ego_wps.size());

  std::vector<VBound> bounds;
  bounds.reserve(obstacles.size());
  for (const ObstacleInfo& obs : obstacles) {
    VBound vb = extend_bounds(rect_corners(obs.center, obs.yaw, obs.length, obs.width), obs.yaw,
                              obs.speed, cfg.t_est);
    vb.vehicle_index = obs.index;
    vb.position = obs.center;
    bounds.push_back(std::move(vb));
  }

  CollisionFreePath cf = generate_collision_free_path(bounds, result.trajectory.points);
  result.cfw = std::move(cf.new_path);
  result.blocking = cf.blocking;

  // Target pose: fixed arc lookahead on the collision-free prefix.
  size_t ti = 0;
  for (size_t i = 0; i < result.cfw.size(); ++i) {
    ti = i;
    if (result.trajectory.cum_arc[i] >= cfg.lookahead_m) break;
  }
  result.target_pos = result.cfw.empty() ? Vec2{0.0, 0.0} : result.cfw[ti];
  result.d_pose = result.cfw.empty() ? 0.0 : result.trajectory.cum_arc[ti];
  if (ti > 0) {
    const Vec2 d = result.cfw[ti] - result.cfw[ti - 1];
    result.target_heading = std::atan2(d.y, d.x);
  } else if (result.cfw.size() >= 2) {
    const Vec2 d = result.cfw[1] - result.cfw[0];
    result.target_heading = std::atan2(d.y, d.x);
  }

  const auto t_speed = clock::now();
  result.speed = plan_speed(result.blocking, v_current, result.d_pose, dt, cfg);

  // Route end: once the remaining reference path is shorter than the
  // lookahead and the route provides no more waypoints, ramp to a stop.
  if (route_truncated && !result.trajectory.cum_arc.empty() &&
      result.trajectory.cum_arc.back() < cfg.lookahead_m) {
    result.route_exhausted = true;
    result.speed.v_pre = 0.0;
    result.speed.v_exc = 0.0;
  }
  if (times) {
    times->path_generation_us =
        std::chrono::duration<double, std::micro>(t_speed - t_start).count();
    times->speed_planning_us =
        std::chrono::duration<double, std::micro>(clock::now() - t_speed).count();
  }
  return result;
}

}  // namespace lidarplan
