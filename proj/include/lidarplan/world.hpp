#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidarplan/geometry.hpp"
#include "lidarplan/scenario.hpp"

namespace lidarplan {

enum class VehicleKind { Ego, Traffic };

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::Traffic;
  Vec2 position;
  double yaw = 0.0;  // [-pi, pi)
  double speed = 0.0;
  BoxDims box;
  double z_base = 0.0;
};

struct GlobalWaypointPath {
  std::vector<Vec2> points;  // map frame
  double spacing = 2.0;
  bool route_end = false;
};

struct ControlCommand {
  double target_speed = 0.0;  // ego speed for the next tick (already accel-limited)
  double steer = 0.0;         // curvature command, 1/m
};

// Piecewise-linear speed over time; constant before the first and after the
// last knot.
inline double profile_speed(const std::vector<SpeedKnot>& profile, double t, double fallback) {
  if (profile.empty()) return fallback;
  if (t <= profile.front().t) return profile.front().speed;
  if (t >= profile.back().t) return profile.back().speed;
  for (size_t i = 1; i < profile.size(); ++i) {
    if (t <= profile[i].t) {
      const double u = (t - profile[i - 1].t) / (profile[i].t - profile[i - 1].t);
      return profile[i - 1].speed + u * (profile[i].speed - profile[i - 1].speed);
    }
  }
  return profile.back().speed;
}

// Concatenated lane centerlines with arc-length lookup. Interior corners of a
// lane are optionally rounded with sampled circular arcs so that tangent yaw
// (and the waypoint spacing invariant) stay well behaved through turns.
class RouteGeometry {
 public:
  RouteGeometry() = default;

  RouteGeometry(const MapSpec& map, const std::vector<std::string>& lane_ids, bool loop)
      : loop_(loop) {
    for (const std::string& id : lane_ids) {
      const LaneSpec* lane = nullptr;
      for (const LaneSpec& l : map.lanes)
        if (l.id == id) lane = &l;
      if (!lane) throw ScenarioError("route references unknown lane \"" + id + "\"");
      std::vector<Vec2> pts =
          lane->fillet_radius > 0.0 ? fillet(lane->centerline, lane->fillet_radius)
                                    : lane->centerline;
      for (const Vec2& p : pts) {
        if (!pts_.empty() && (p - pts_.back()).norm() < 1e-9) continue;
        pts_.push_back(p);
        limits_.push_back(lane->speed_limit);
      }
    }
    if (pts_.size() < 2) throw ScenarioError("route geometry needs at least 2 points");
    cum_.resize(pts_.size());
    cum_[0] = 0.0;
    for (size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + (pts_[i] - pts_[i - 1]).norm();
    if (loop_ && (pts_.back() - pts_.front()).norm() > 0.5)
      throw ScenarioError("looped route does not close (ends " +
                          std::to_string((pts_.back() - pts_.front()).norm()) + " m apart)");
  }

  double total_length() const { return cum_.back(); }
  bool loop() const { return loop_; }

  double wrap_s(double s) const {
    if (!loop_) return std::clamp(s, 0.0, total_length());
    s = std::fmod(s, total_length());
    if (s < 0.0) s += total_length();
    return s;
  }

  Pose2 pose_at(double s) const {
    s = wrap_s(s);
    const size_t i = segment_index(s);
    const Vec2 d = pts_[i + 1] - pts_[i];
    const double len = cum_[i + 1] - cum_[i];
    const double u = len > 0.0 ? (s - cum_[i]) / len : 0.0;
    return {pts_[i] + d * u, std::atan2(d.y, d.x)};
  }

  double speed_limit_at(double s) const { return limits_[segment_index(wrap_s(s))]; }

  // Arc position of the point on the route nearest to p, searched within
  // [hint - back, hint + fwd] so that progress on self-approaching loops
  // stays monotone. Coarse scan picks the segment, then the foot of the
  // perpendicular is computed exactly on nearby segments.
  double project(const Vec2& p, double hint, double back = 10.0, double fwd = 20.0) const {
    double best_s = wrap_s(hint);
    double best_d = 1e300;
    auto consider = [&](double s) {
      if (!loop_ && (s < 0.0 || s > total_length())) return;
      const double sw = wrap_s(s);
      const size_t i = segment_index(sw);
      const Vec2 d = pts_[i + 1] - pts_[i];
      const double len2 = d.squared_norm();
      const double u = len2 > 0.0 ? std::clamp((p - pts_[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
      const double dist = (pts_[i] + d * u - p).squared_norm();
      if (dist < best_d) {
        best_d = dist;
        best_s = cum_[i] + u * std::sqrt(len2);
      }
    };
    for (double off = -back; off <= fwd; off += 0.25) consider(hint + off);
    return best_s;
  }

  const std::vector<Vec2>& points() const { return pts_; }

 private:
  size_t segment_index(double s) const {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    size_t i = static_cast<size_t>(it - cum_.begin());
    if (i > 0) --i;
    return std::min(i, pts_.size() - 2);
  }

  static std::vector<Vec2> fillet(const std::vector<Vec2>& poly, double radius) {
    std::vector<Vec2> out;
    out.push_back(poly.front());
    for (size_t i = 1; i + 1 < poly.size(); ++i) {
      const Vec2 u_in = (poly[i] - poly[i - 1]).normalized();
      const Vec2 u_out = (poly[i + 1] - poly[i]).normalized();
      const double turn = std::atan2(u_in.cross(u_out), u_in.dot(u_out));
      if (std::abs(turn) < 1e-6) {
        out.push_back(poly[i]);
        continue;
      }
      const double len_in = (poly[i] - poly[i - 1]).norm();
      const double len_out = (poly[i + 1] - poly[i]).norm();
      double t = radius * std::tan(std::abs(turn) / 2.0);
      const double t_max = 0.45 * std::min(len_in, len_out);
      double r = radius;
      if (t > t_max) {
        t = t_max;
        r = t / std::tan(std::abs(turn) / 2.0);
      }
      const Vec2 p1 = poly[i] - u_in * t;
      const double side = turn > 0.0 ? 1.0 : -1.0;
      const Vec2 center = p1 + u_in.perp() * (side * r);
      const double a1 = std::atan2(p1.y - center.y, p1.x - center.x);
      const int n = std::max(2, static_cast<int>(std::ceil(r * std::abs(turn) / 0.5)));
      for (int k = 0; k <= n; ++k) {
        const double a = a1 + side * std::abs(turn) * (static_cast<double>(k) / n);
        out.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
      }
    }
    out.push_back(poly.back());
    return out;
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
  std::vector<double> limits_;  // per segment start point
  bool loop_ = false;
};

// Deterministic 2.5D world: scripted traffic rides lane centerlines, the ego
// integrates unicycle kinematics from control commands. All state is plain
// value data; each tick other modules receive it read-only.
class World {
 public:
  explicit World(const ScenarioConfig& cfg) : cfg_(cfg) {
    routes_.emplace_back(cfg.map, cfg.ego.route, cfg.ego.loop);
    VehicleState ego;
    ego.id = 0;
    ego.kind = VehicleKind::Ego;
    const Pose2 p = routes_[0].pose_at(cfg.ego.start_s);
    ego.position = p.position;
    ego.yaw = p.yaw;
    ego.speed = cfg.ego.initial_speed;
    ego.box = cfg.ego.box;
    vehicles_.push_back(ego);
    ego_route_s_ = cfg.ego.start_s;

    int next_id = 1;
    for (const AgentSpec& a : cfg.traffic) {
      routes_.emplace_back(cfg.map, a.route, a.loop);
      VehicleState v;
      v.id = next_id++;
      v.kind = VehicleKind::Traffic;
      v.box = a.box;
      v.speed = profile_speed(a.speed_profile, 0.0, a.initial_speed);
      traffic_s_.push_back(a.start_s);
      const Pose2 tp = routes_.back().pose_at(a.start_s);
      v.position = tp.position;
      v.yaw = tp.yaw;
      vehicles_.push_back(v);
    }
  }

  const ScenarioConfig& config() const { return cfg_; }
  double time() const { return tick_ * cfg_.sim_dt; }
  long tick() const { return tick_; }
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  const std::vector<ClutterSpec>& clutter() const { return cfg_.clutter; }
  const VehicleState& ego() const { return vehicles_[0]; }
  const RouteGeometry& ego_route() const { return routes_[0]; }
  double ego_route_s() const { return ego_route_s_; }

  Pose2 ego_pose() const { return {vehicles_[0].position, vehicles_[0].yaw}; }

  // Advances scripted traffic along lanes and integrates the ego from the
  // given command. Traffic clamps at route end with speed 0 unless looped.
  void step(const ControlCommand& cmd, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
    const double t = time();
    for (size_t i = 1; i < vehicles_.size(); ++i) {
      VehicleState& v = vehicles_[i];
      const AgentSpec& spec = cfg_.traffic[i - 1];
      const RouteGeometry& route = routes_[i];
      double speed = profile_speed(spec.speed_profile, t, spec.initial_speed);
      double s = traffic_s_[i - 1] + speed * dt;
      if (!route.loop() && s >= route.total_length()) {
        s = route.total_length();
        speed = 0.0;
      }
      traffic_s_[i - 1] = route.wrap_s(s);
      const Pose2 p = route.pose_at(s);
      v.position = p.position;
      v.yaw = p.yaw;
      v.speed = speed;
    }
    VehicleState& ego = vehicles_[0];
    ego.speed = std::max(0.0, cmd.target_speed);
    ego.yaw = wrap_angle(ego.yaw + ego.speed * cmd.steer * dt);
    ego.position.x += ego.speed * std::cos(ego.yaw) * dt;
    ego.position.y += ego.speed * std::sin(ego.yaw) * dt;
    ego_route_s_ = routes_[0].project(ego.position, ego_route_s_);
    ++tick_;
  }

  // Non-ego vehicles within radius of the ego, mapped into the ego frame and
  // sorted by distance.
  std::vector<VehicleState> ground_truth_neighbors(double radius) const {
    const Pose2 ego = ego_pose();
    std::vector<VehicleState> out;
    for (size_t i = 1; i < vehicles_.size(); ++i) {
      const VehicleState& v = vehicles_[i];
      if ((v.position - ego.position).norm() > radius) continue;
      VehicleState rel = v;
      rel.position = map_to_frame(ego, v.position);
      rel.yaw = wrap_angle(v.yaw - ego.yaw);
      out.push_back(rel);
    }
    std::sort(out.begin(), out.end(), [](const VehicleState& a, const VehicleState& b) {
      return a.position.squared_norm() < b.position.squared_norm();
    });
    return out;
  }

  // Next ceil(horizon_m / d_wp) centerline points ahead of the ego at d_wp
  // spacing, in map frame. Truncates with route_end set when the route runs
  // out.
  GlobalWaypointPath global_waypoints(double horizon_m, double d_wp) const {
    GlobalWaypointPath path;
    path.spacing = d_wp;
    if (horizon_m <= 0.0) return path;
    const RouteGeometry& route = routes_[0];
    const int count = static_cast<int>(std::ceil(horizon_m / d_wp));
    for (int k = 1; k <= count; ++k) {
      const double s = ego_route_s_ + k * d_wp;
      if (!route.loop() && s > route.total_length() + 1e-9) {
        path.route_end = true;
        break;
      }
      path.points.push_back(route.pose_at(s).position);
    }
    return path;
  }

  double ego_speed_limit() const { return routes_[0].speed_limit_at(ego_route_s_); }

 private:
  ScenarioConfig cfg_;
  std::vector<RouteGeometry> routes_;  // [0] = ego route, then one per traffic agent
  std::vector<VehicleState> vehicles_;
  std::vector<double> traffic_s_;
  double ego_route_s_ = 0.0;
  long tick_ = 0;
};

}  // namespace lidarplan
