#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarplan/geometry.hpp"

namespace lidarplan {

using json = nlohmann::ordered_json;

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BoxDims {
  double length = 4.5;
  double width = 1.9;
  double height = 1.55;
  bool operator==(const BoxDims&) const = default;
};

struct LidarConfig {
  int channels = 64;
  double vertical_fov_min_deg = -15.0;
  double vertical_fov_max_deg = 0.0;
  double horizontal_resolution_deg = 0.8;
  double max_range = 70.0;
  double range_noise_sigma = 0.02;
  double mount_height = 2.2;
  double dropout_prob = 0.05;  bool operator==(const LidarConfig&) const = default;
};

struct RansacConfig {
  double distance_threshold = 0.15;
  int max_iterations = 50;
  double min_inlier_fraction = 0.15;  bool operator==(const RansacConfig&) const = default;
};

struct DbscanConfig {
  double epsilon = 1.4;
  int min_points = 5;  bool operator==(const DbscanConfig&) const = default;
};

// Acceptance ranges are deliberately permissive on the thin side: a distant
// vehicle often returns only one visible face, which projects to a narrow
// slab in BEV. Recall depends on keeping those; false positives from real
// static objects are handled by the tracker's static labeling, not here.
struct ClassifierConfig {
  int min_points = 8;
  int max_points = 50000;
  double min_width = 0.02;
  double max_width = 3.2;
  double min_length = 0.3;
  double max_length = 8.0;
  double min_area = 0.01;
  double max_area = 18.0;
  double min_ratio = 0.004;
  double max_ratio = 1.0;  bool operator==(const ClassifierConfig&) const = default;
};

struct PerceptionConfig {
  double roi_radius = 20.0;
  double voxel_size = 0.15;
  double lshape_step_deg = 1.0;
  RansacConfig ransac;
  DbscanConfig dbscan;
  ClassifierConfig classifier;  bool operator==(const PerceptionConfig&) const = default;
};

struct TrackerConfig {
  double gate = 2.5;             // association gate, meters
  int confirm_hits = 3;          // M hits ...
  int confirm_window = 5;        // ... within N frames
  int tentative_max_misses = 2;  // tentative killed after this many consecutive misses
  int confirmed_max_misses = 5;  // confirmed killed after this many consecutive misses
  double sigma_accel = 2.0;      // process noise, longitudinal accel
  double sigma_yaw_accel = 1.0;  // process noise, yaw acceleration
  double meas_sigma_xy = 0.12;
  double meas_sigma_yaw = 0.2;
  double meas_sigma_yaw_thin = 0.6;  // inflated yaw noise for slab-like detections
  double thin_ratio = 0.25;          // width/length below which a detection is "thin"
  double fd_sigma_v = 0.8;           // finite-difference speed measurement noise
  double fd_sigma_yaw = 0.25;        // finite-difference heading measurement noise
  int fd_frames = 3;                 // finite-difference baseline, frames
  double static_speed_threshold = 0.5;
  double extent_decay = 0.002;        // smoothed-extent floor shrink, meters per frame
  double extent_shrink_rate = 0.04;   // proportional shrink toward the raw extent, per frame
  bool operator==(const TrackerConfig&) const = default;
};

struct PlannerConfig {
  double mu = 0.35;
  double g = 9.8;
  double d_wp = 2.0;
  double f_safe = 1.5;
  double t_s = 0.5;
  double t_est = 1.0;
  double d_buffer = 6.0;
  double v_appr = 3.0;
  double w = 10.0;
  double a_max = 2.5;
  double v_init = 6.0;
  double v_max = 8.33;
  std::string braking_model = "paper";  // "paper" (v/(2 mu g)) or "kinematic" (v^2/(2 mu g))
  double horizon_floor_m = 30.0;        // lower bound on the waypoint horizon distance
  double lookahead_m = 6.0;             // target-pose arc distance on the collision-free path
  double align_threshold_deg = 30.0;    // leader-vs-obstacle yaw discrimination
  double static_speed_threshold = 0.5;  bool operator==(const PlannerConfig&) const = default;
};

struct ControlConfig {
  double accel_limit = 2.5;
  double brake_limit = 4.5;
  double stop_speed_threshold = 2.0;  // obstacle-case commands below this brake to a halt
  double max_yaw_rate = 1.0;  bool operator==(const ControlConfig&) const = default;
};

struct LaneSpec {
  std::string id;
  std::vector<Vec2> centerline;
  double speed_limit = 8.33;
  double fillet_radius = 0.0;  // > 0 rounds interior corners with sampled arcs
  bool operator==(const LaneSpec&) const = default;
};

struct MapSpec {
  double lane_width = 3.75;
  double ground_slope_deg = 0.0;  // constant slope about the map y-axis
  std::vector<LaneSpec> lanes;  bool operator==(const MapSpec&) const = default;
};

struct SpeedKnot {
  double t = 0.0;
  double speed = 0.0;  bool operator==(const SpeedKnot&) const = default;
};

struct AgentSpec {
  std::vector<std::string> route;
  double start_s = 0.0;
  double initial_speed = 0.0;
  BoxDims box;
  std::vector<SpeedKnot> speed_profile;  // piecewise-linear speed over time
  bool loop = false;  bool operator==(const AgentSpec&) const = default;
};

struct ClutterSpec {
  Vec2 position;
  double yaw = 0.0;
  BoxDims box;  bool operator==(const ClutterSpec&) const = default;
};

struct ScenarioConfig {
  int schema_version = 1;
  std::string name = "scenario";
  uint64_t seed = 0;
  double sim_dt = 0.05;
  double duration = 60.0;
  MapSpec map;
  AgentSpec ego;
  std::vector<AgentSpec> traffic;
  std::vector<ClutterSpec> clutter;
  LidarConfig lidar;
  PerceptionConfig perception;
  TrackerConfig tracker;
  PlannerConfig planner;
  ControlConfig control;

  bool operator==(const ScenarioConfig&) const = default;
};


namespace cfgdetail {

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ScenarioError(path + "." + it.key() + ": unknown key");
  }
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path + ": expected an object");
}

template <typename T>
void get_to(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path + "." + key + ": " + e.what());
  }
}

inline void require_positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ScenarioError(path + ": must be > 0, got " + std::to_string(v));
}

inline void require_nonneg(double v, const std::string& path) {
  if (!(v >= 0.0)) throw ScenarioError(path + ": must be >= 0, got " + std::to_string(v));
}

inline Vec2 parse_vec2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ScenarioError(path + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline BoxDims parse_box(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ScenarioError(path + ": expected [length, width, height]");
  BoxDims b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  require_positive(b.length, path + "[0] (length)");
  require_positive(b.width, path + "[1] (width)");
  require_positive(b.height, path + "[2] (height)");
  return b;
}

inline LidarConfig parse_lidar(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"channels", "vertical_fov_min_deg", "vertical_fov_max_deg",
                  "horizontal_resolution_deg", "max_range", "range_noise_sigma", "mount_height",
                  "dropout_prob"});
  LidarConfig c;
  get_to(j, path, "channels", c.channels);
  get_to(j, path, "vertical_fov_min_deg", c.vertical_fov_min_deg);
  get_to(j, path, "vertical_fov_max_deg", c.vertical_fov_max_deg);
  get_to(j, path, "horizontal_resolution_deg", c.horizontal_resolution_deg);
  get_to(j, path, "max_range", c.max_range);
  get_to(j, path, "range_noise_sigma", c.range_noise_sigma);
  get_to(j, path, "mount_height", c.mount_height);
  get_to(j, path, "dropout_prob", c.dropout_prob);
  if (c.channels < 1) throw ScenarioError(path + ".channels: must be >= 1");
  require_positive(c.max_range, path + ".max_range");
  require_nonneg(c.range_noise_sigma, path + ".range_noise_sigma");
  require_positive(c.horizontal_resolution_deg, path + ".horizontal_resolution_deg");
  require_positive(c.mount_height, path + ".mount_height");
  if (c.dropout_prob < 0.0 || c.dropout_prob >= 1.0)
    throw ScenarioError(path + ".dropout_prob: must be in [0, 1)");
  if (c.vertical_fov_min_deg > c.vertical_fov_max_deg)
    throw ScenarioError(path + ".vertical_fov_min_deg: must be <= vertical_fov_max_deg");
  return c;
}

inline PerceptionConfig parse_perception(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"roi_radius", "voxel_size", "lshape_step_deg", "ransac", "dbscan",
                           "classifier"});
  PerceptionConfig c;
  get_to(j, path, "roi_radius", c.roi_radius);
  get_to(j, path, "voxel_size", c.voxel_size);
  get_to(j, path, "lshape_step_deg", c.lshape_step_deg);
  if (j.contains("ransac")) {
    const json& r = j.at("ransac");
    const std::string rp = path + ".ransac";
    expect_object(r, rp);
    reject_unknown(r, rp, {"distance_threshold", "max_iterations", "min_inlier_fraction"});
    get_to(r, rp, "distance_threshold", c.ransac.distance_threshold);
    get_to(r, rp, "max_iterations", c.ransac.max_iterations);
    get_to(r, rp, "min_inlier_fraction", c.ransac.min_inlier_fraction);
    require_positive(c.ransac.distance_threshold, rp + ".distance_threshold");
    if (c.ransac.max_iterations < 1) throw ScenarioError(rp + ".max_iterations: must be >= 1");
    require_positive(c.ransac.min_inlier_fraction, rp + ".min_inlier_fraction");
  }
  if (j.contains("dbscan")) {
    const json& d = j.at("dbscan");
    const std::string dp = path + ".dbscan";
    expect_object(d, dp);
    reject_unknown(d, dp, {"epsilon", "min_points"});
    get_to(d, dp, "epsilon", c.dbscan.epsilon);
    get_to(d, dp, "min_points", c.dbscan.min_points);
    require_positive(c.dbscan.epsilon, dp + ".epsilon");
    if (c.dbscan.min_points < 1) throw ScenarioError(dp + ".min_points: must be >= 1");
  }
  if (j.contains("classifier")) {
    const json& cl = j.at("classifier");
    const std::string cp = path + ".classifier";
    expect_object(cl, cp);
    reject_unknown(cl, cp, {"min_points", "max_points", "min_width", "max_width", "min_length",
                            "max_length", "min_area", "max_area", "min_ratio", "max_ratio"});
    get_to(cl, cp, "min_points", c.classifier.min_points);
    get_to(cl, cp, "max_points", c.classifier.max_points);
    get_to(cl, cp, "min_width", c.classifier.min_width);
    get_to(cl, cp, "max_width", c.classifier.max_width);
    get_to(cl, cp, "min_length", c.classifier.min_length);
    get_to(cl, cp, "max_length", c.classifier.max_length);
    get_to(cl, cp, "min_area", c.classifier.min_area);
    get_to(cl, cp, "max_area", c.classifier.max_area);
    get_to(cl, cp, "min_ratio", c.classifier.min_ratio);
    get_to(cl, cp, "max_ratio", c.classifier.max_ratio);
  }
  require_positive(c.roi_radius, path + ".roi_radius");
  require_positive(c.voxel_size, path + ".voxel_size");
  require_positive(c.lshape_step_deg, path + ".lshape_step_deg");
  if (c.classifier.max_width > c.classifier.max_length)
    throw ScenarioError(path + ".classifier.max_width: must be <= max_length");
  return c;
}

inline TrackerConfig parse_tracker(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"gate", "confirm_hits", "confirm_window", "tentative_max_misses",
                  "confirmed_max_misses", "sigma_accel", "sigma_yaw_accel", "meas_sigma_xy",
                  "meas_sigma_yaw", "meas_sigma_yaw_thin", "thin_ratio", "fd_sigma_v",
                  "fd_sigma_yaw", "fd_frames", "static_speed_threshold", "extent_decay",
                  "extent_shrink_rate"});
  TrackerConfig c;
  get_to(j, path, "gate", c.gate);
  get_to(j, path, "confirm_hits", c.confirm_hits);
  get_to(j, path, "confirm_window", c.confirm_window);
  get_to(j, path, "tentative_max_misses", c.tentative_max_misses);
  get_to(j, path, "confirmed_max_misses", c.confirmed_max_misses);
  get_to(j, path, "sigma_accel", c.sigma_accel);
  get_to(j, path, "sigma_yaw_accel", c.sigma_yaw_accel);
  get_to(j, path, "meas_sigma_xy", c.meas_sigma_xy);
  get_to(j, path, "meas_sigma_yaw", c.meas_sigma_yaw);
  get_to(j, path, "meas_sigma_yaw_thin", c.meas_sigma_yaw_thin);
  get_to(j, path, "thin_ratio", c.thin_ratio);
  get_to(j, path, "fd_sigma_v", c.fd_sigma_v);
  get_to(j, path, "fd_sigma_yaw", c.fd_sigma_yaw);
  get_to(j, path, "fd_frames", c.fd_frames);
  get_to(j, path, "static_speed_threshold", c.static_speed_threshold);
  get_to(j, path, "extent_decay", c.extent_decay);
  get_to(j, path, "extent_shrink_rate", c.extent_shrink_rate);
  require_positive(c.gate, path + ".gate");
  if (c.extent_decay < 0.0) throw ScenarioError(path + ".extent_decay: must be >= 0");
  if (c.extent_shrink_rate < 0.0 || c.extent_shrink_rate >= 1.0)
    throw ScenarioError(path + ".extent_shrink_rate: must be in [0, 1)");
  if (c.confirm_hits < 1 || c.confirm_window < c.confirm_hits)
    throw ScenarioError(path + ".confirm_hits: need 1 <= confirm_hits <= confirm_window");
  if (c.fd_frames < 1) throw ScenarioError(path + ".fd_frames: must be >= 1");
  return c;
}

inline PlannerConfig parse_planner(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"mu", "g", "d_wp", "f_safe", "t_s", "t_est", "d_buffer", "v_appr", "w",
                           "a_max", "v_init", "v_max", "braking_model", "horizon_floor_m",
                           "lookahead_m", "align_threshold_deg", "static_speed_threshold"});
  PlannerConfig c;
  get_to(j, path, "mu", c.mu);
  get_to(j, path, "g", c.g);
  get_to(j, path, "d_wp", c.d_wp);
  get_to(j, path, "f_safe", c.f_safe);
  get_to(j, path, "t_s", c.t_s);
  get_to(j, path, "t_est", c.t_est);
  get_to(j, path, "d_buffer", c.d_buffer);
  get_to(j, path, "v_appr", c.v_appr);
  get_to(j, path, "w", c.w);
  get_to(j, path, "a_max", c.a_max);
  get_to(j, path, "v_init", c.v_init);
  get_to(j, path, "v_max", c.v_max);
  get_to(j, path, "braking_model", c.braking_model);
  get_to(j, path, "horizon_floor_m", c.horizon_floor_m);
  get_to(j, path, "lookahead_m", c.lookahead_m);
  get_to(j, path, "align_threshold_deg", c.align_threshold_deg);
  get_to(j, path, "static_speed_threshold", c.static_speed_threshold);
  for (auto [v, n] : {std::pair<double, const char*>{c.mu, "mu"}, {c.g, "g"}, {c.d_wp, "d_wp"},
                      {c.t_s, "t_s"}, {c.t_est, "t_est"}, {c.d_buffer, "d_buffer"},
                      {c.v_appr, "v_appr"}, {c.w, "w"}, {c.a_max, "a_max"}, {c.v_init, "v_init"},
                      {c.v_max, "v_max"}, {c.horizon_floor_m, "horizon_floor_m"},
                      {c.lookahead_m, "lookahead_m"}})
    require_positive(v, path + "." + n);
  if (c.f_safe < 1.0) throw ScenarioError(path + ".f_safe: must be >= 1");
  if (c.braking_model != "paper" && c.braking_model != "kinematic")
    throw ScenarioError(path + ".braking_model: must be \"paper\" or \"kinematic\"");
  return c;
}

inline ControlConfig parse_control(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"accel_limit", "brake_limit", "stop_speed_threshold", "max_yaw_rate"});
  ControlConfig c;
  get_to(j, path, "accel_limit", c.accel_limit);
  get_to(j, path, "brake_limit", c.brake_limit);
  get_to(j, path, "stop_speed_threshold", c.stop_speed_threshold);
  get_to(j, path, "max_yaw_rate", c.max_yaw_rate);
  require_positive(c.accel_limit, path + ".accel_limit");
  require_positive(c.brake_limit, path + ".brake_limit");
  require_nonneg(c.stop_speed_threshold, path + ".stop_speed_threshold");
  require_positive(c.max_yaw_rate, path + ".max_yaw_rate");
  return c;
}

inline AgentSpec parse_agent(const json& j, const std::string& path, bool is_ego) {
  expect_object(j, path);
  reject_unknown(j, path,
                 {"route", "start_s", "initial_speed", "box", "speed_profile", "loop"});
  AgentSpec a;
  if (!j.contains("route") || !j.at("route").is_array() || j.at("route").empty())
    throw ScenarioError(path + ".route: required non-empty array of lane ids");
  for (size_t i = 0; i < j.at("route").size(); ++i) {
    const json& r = j.at("route")[i];
    if (!r.is_string())
      throw ScenarioError(path + ".route[" + std::to_string(i) + "]: expected lane id string");
    a.route.push_back(r.get<std::string>());
  }
  get_to(j, path, "start_s", a.start_s);
  get_to(j, path, "initial_speed", a.initial_speed);
  get_to(j, path, "loop", a.loop);
  if (j.contains("box")) a.box = parse_box(j.at("box"), path + ".box");
  if (j.contains("speed_profile")) {
    const json& sp = j.at("speed_profile");
    if (!sp.is_array()) throw ScenarioError(path + ".speed_profile: expected array of [t, speed]");
    double prev_t = -1.0;
    for (size_t i = 0; i < sp.size(); ++i) {
      const std::string kp = path + ".speed_profile[" + std::to_string(i) + "]";
      if (!sp[i].is_array() || sp[i].size() != 2) throw ScenarioError(kp + ": expected [t, speed]");
      SpeedKnot k{sp[i][0].get<double>(), sp[i][1].get<double>()};
      if (k.t <= prev_t && i > 0) throw ScenarioError(kp + ": times must be strictly increasing");
      require_nonneg(k.t, kp + "[0] (t)");
      require_nonneg(k.speed, kp + "[1] (speed)");
      prev_t = k.t;
      a.speed_profile.push_back(k);
    }
  }
  require_nonneg(a.start_s, path + ".start_s");
  require_nonneg(a.initial_speed, path + ".initial_speed");
  if (is_ego && !a.speed_profile.empty())
    throw ScenarioError(path + ".speed_profile: ego speed comes from the controller");
  return a;
}

}  // namespace cfgdetail

// Parses and validates a scenario document. Unknown keys are rejected;
// semantic errors name the offending key path. Absent keys take defaults.
inline ScenarioConfig load_scenario_text(const std::string& text) {
  using namespace cfgdetail;
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("parse error: ") + e.what());
  }
  expect_object(j, "$");
  reject_unknown(j, "$", {"schema_version", "name", "seed", "sim_dt", "duration", "map", "ego",
                          "traffic", "clutter", "lidar", "perception", "tracker", "planner",
                          "control"});
  ScenarioConfig s;
  get_to(j, "$", "schema_version", s.schema_version);
  if (s.schema_version != 1)
    throw ScenarioError("$.schema_version: unsupported version " +
                        std::to_string(s.schema_version));
  get_to(j, "$", "name", s.name);
  get_to(j, "$", "seed", s.seed);
  get_to(j, "$", "sim_dt", s.sim_dt);
  get_to(j, "$", "duration", s.duration);
  require_positive(s.sim_dt, "$.sim_dt");
  require_positive(s.duration, "$.duration");

  if (!j.contains("map")) throw ScenarioError("$.map: required");
  {
    const json& m = j.at("map");
    expect_object(m, "$.map");
    reject_unknown(m, "$.map", {"lane_width", "ground_slope_deg", "lanes"});
    get_to(m, "$.map", "lane_width", s.map.lane_width);
    get_to(m, "$.map", "ground_slope_deg", s.map.ground_slope_deg);
    require_positive(s.map.lane_width, "$.map.lane_width");
    if (!m.contains("lanes") || !m.at("lanes").is_array() || m.at("lanes").empty())
      throw ScenarioError("$.map.lanes: required non-empty array");
    for (size_t i = 0; i < m.at("lanes").size(); ++i) {
      const json& l = m.at("lanes")[i];
      const std::string lp = "$.map.lanes[" + std::to_string(i) + "]";
      expect_object(l, lp);
      reject_unknown(l, lp, {"id", "centerline", "speed_limit", "fillet_radius"});
      LaneSpec lane;
      if (!l.contains("id") || !l.at("id").is_string())
        throw ScenarioError(lp + ".id: required string");
      lane.id = l.at("id").get<std::string>();
      get_to(l, lp, "speed_limit", lane.speed_limit);
      get_to(l, lp, "fillet_radius", lane.fillet_radius);
      require_positive(lane.speed_limit, lp + ".speed_limit");
      require_nonneg(lane.fillet_radius, lp + ".fillet_radius");
      if (!l.contains("centerline") || !l.at("centerline").is_array() ||
          l.at("centerline").size() < 2)
        throw ScenarioError(lp + ".centerline: required array of >= 2 points");
      for (size_t k = 0; k < l.at("centerline").size(); ++k)
        lane.centerline.push_back(
            parse_vec2(l.at("centerline")[k], lp + ".centerline[" + std::to_string(k) + "]"));
      for (const LaneSpec& prev : s.map.lanes)
        if (prev.id == lane.id) throw ScenarioError(lp + ".id: duplicate lane id " + lane.id);
      s.map.lanes.push_back(std::move(lane));
    }
  }

  auto check_route = [&](const AgentSpec& a, const std::string& path) {
    for (size_t i = 0; i < a.route.size(); ++i) {
      bool found = false;
      for (const LaneSpec& l : s.map.lanes)
        if (l.id == a.route[i]) {
          found = true;
          break;
        }
      if (!found)
        throw ScenarioError(path + ".route[" + std::to_string(i) + "]: unknown lane id \"" +
                            a.route[i] + "\"");
    }
  };

  if (!j.contains("ego")) throw ScenarioError("$.ego: required");
  s.ego = parse_agent(j.at("ego"), "$.ego", true);
  check_route(s.ego, "$.ego");

  if (j.contains("traffic")) {
    const json& t = j.at("traffic");
    if (!t.is_array()) throw ScenarioError("$.traffic: expected array");
    for (size_t i = 0; i < t.size(); ++i) {
      const std::string tp = "$.traffic[" + std::to_string(i) + "]";
      AgentSpec a = parse_agent(t[i], tp, false);
      check_route(a, tp);
      s.traffic.push_back(std::move(a));
    }
  }
  if (j.contains("clutter")) {
    const json& c = j.at("clutter");
    if (!c.is_array()) throw ScenarioError("$.clutter: expected array");
    for (size_t i = 0; i < c.size(); ++i) {
      const std::string cp = "$.clutter[" + std::to_string(i) + "]";
      expect_object(c[i], cp);
      reject_unknown(c[i], cp, {"position", "yaw", "box"});
      ClutterSpec cl;
      if (!c[i].contains("position")) throw ScenarioError(cp + ".position: required");
      cl.position = parse_vec2(c[i].at("position"), cp + ".position");
      get_to(c[i], cp, "yaw", cl.yaw);
      if (c[i].contains("box")) cl.box = parse_box(c[i].at("box"), cp + ".box");
      s.clutter.push_back(cl);
    }
  }

  if (j.contains("lidar")) s.lidar = parse_lidar(j.at("lidar"), "$.lidar");
  if (j.contains("perception")) s.perception = parse_perception(j.at("perception"), "$.perception");
  if (j.contains("tracker")) s.tracker = parse_tracker(j.at("tracker"), "$.tracker");
  if (j.contains("planner")) s.planner = parse_planner(j.at("planner"), "$.planner");
  if (j.contains("control")) s.control = parse_control(j.at("control"), "$.control");
  return s;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario_text(ss.str());
}

}  // namespace lidarplan
