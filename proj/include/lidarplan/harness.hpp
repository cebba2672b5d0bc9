#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarplan/control.hpp"
#include "lidarplan/lidar.hpp"
#include "lidarplan/metrics.hpp"
#include "lidarplan/perception.hpp"
#include "lidarplan/planner.hpp"
#include "lidarplan/rng.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/trace.hpp"
#include "lidarplan/tracking.hpp"
#include "lidarplan/world.hpp"

namespace lidarplan {

struct RunOptions {
  std::string mode = "lidar";  // "lidar" or "gt"
  std::optional<uint64_t> seed_override;
  std::optional<double> duration_override;
  bool save_clouds = false;
};

struct RunSummary {
  long ticks = 0;
  long frames = 0;
  long skipped_frames = 0;
  long collision_events = 0;
  long contact_ticks = 0;
  double min_following = -1.0;
  double mean_following = -1.0;
  double final_speed = 0.0;
  std::filesystem::path trace_dir;
};

namespace harness_detail {

inline std::array<Vec2, 4> vehicle_rect(const Vec2& center, double yaw, const BoxDims& box) {
  return rect_corners(center, yaw, box.length, box.width);
}

}  // namespace harness_detail

// Closed loop: per tick, record the world, sense (raycast scan -> detection
// -> tracking) or read ground-truth neighbors, plan, command, check the
// ground-truth collision oracle, then advance the world. Deterministic per
// (scenario, seed, mode); all wall-clock values go to timing.csv only.
inline RunSummary run_closed_loop(const ScenarioConfig& scenario_in,
                                  const std::string& scenario_text,
                                  const std::filesystem::path& out_dir, const RunOptions& opt) {
  using clock = std::chrono::steady_clock;
  if (opt.mode != "lidar" && opt.mode != "gt")
    throw ScenarioError("run: mode must be 'lidar' or 'gt'");

  ScenarioConfig scenario = scenario_in;
  if (opt.seed_override) scenario.seed = *opt.seed_override;
  if (opt.duration_override) scenario.duration = *opt.duration_override;
  const bool lidar_mode = opt.mode == "lidar";
  const double dt = scenario.sim_dt;
  const long n_ticks = std::lround(scenario.duration / dt);

  World world(scenario);
  Rng rng_lidar = Rng::stream(scenario.seed, "lidar");
  Rng rng_ransac = Rng::stream(scenario.seed, "ransac");
  Tracker tracker(scenario.tracker, dt);
  PlannerConfig pcfg = scenario.planner;

  TraceWriter trace(out_dir, scenario_text, opt.save_clouds && lidar_mode);

  RunSummary sum;
  sum.trace_dir = trace.dir();

  bool prev_contact = false;
  bool have_prev_pose = false;
  Pose2 prev_pose;
  double following_sum = 0.0;
  long following_count = 0;
  long free_ticks = 0, obstacle_ticks = 0, platoon_ticks = 0;

  for (long k = 0; k < n_ticks; ++k) {
    const auto tick_t0 = clock::now();
    const double t = world.time();
    const Pose2 ego_pose = world.ego_pose();
    const double ego_speed = world.ego().speed;

    // World records: state at the top of the tick, before any control.
    for (const VehicleState& v : world.vehicles()) {
      WorldRow r;
      r.tick = k;
      r.time = t;
      r.id = v.id;
      r.kind = v.kind == VehicleKind::Ego ? 0 : 1;
      r.x = v.position.x;
      r.y = v.position.y;
      r.yaw = v.yaw;
      r.speed = v.speed;
      r.length = v.box.length;
      r.width = v.box.width;
      r.height = v.box.height;
      trace.add_world_row(r);
    }
    {
      int cid = 1000;
      for (const ClutterSpec& c : world.clutter()) {
        WorldRow r;
        r.tick = k;
        r.time = t;
        r.id = cid++;
        r.kind = 2;
        r.x = c.position.x;
        r.y = c.position.y;
        r.yaw = c.yaw;
        r.speed = 0.0;
        r.length = c.box.length;
        r.width = c.box.width;
        r.height = c.box.height;
        trace.add_world_row(r);
      }
    }

    // Ego motion since the previous frame, in the compensation convention.
    EgoMotion ego_motion{0.0, 0.0, dt};
    if (have_prev_pose) {
      ego_motion.theta_ego = -wrap_angle(ego_pose.yaw - prev_pose.yaw);
      ego_motion.v_ego = (ego_pose.position - prev_pose.position).norm() / dt;
    }
    prev_pose = ego_pose;
    have_prev_pose = true;

    // Sense.
    TimingRow timing;
    timing.tick = k;
    std::vector<ObstacleInfo> obstacles;
    FrameDetections frame;
    std::vector<TrackSnapshot> tracks;
    if (lidar_mode) {
      const LidarScene scene = make_lidar_scene(world);
      const PointCloud cloud = scan(scene, ego_pose, scenario.lidar, rng_lidar, k, t);
      trace.add_cloud(k, cloud, ego_pose);

      frame = detect_frame(cloud, scenario.perception, rng_ransac);
      ++sum.frames;
      if (frame.skipped) ++sum.skipped_frames;

      const auto track_t0 = clock::now();
      tracker.update(frame.detections, ego_motion);
      tracks = tracker.snapshot();
      timing.track_us = std::llround(
          std::chrono::duration<double, std::micro>(clock::now() - track_t0).count());

      for (const TrackSnapshot& ts : tracks) {
        if (ts.status != TrackStatus::Confirmed) continue;
        ObstacleInfo obs;
        obs.index = ts.id;
        obs.center = ts.rep_center;
        obs.yaw = ts.rep_yaw;
        obs.speed = ts.rep_speed;
        obs.length = ts.rep_length;
        obs.width = ts.rep_width;
        obstacles.push_back(obs);
      }

      timing.crop_us = std::llround(frame.stage_us.crop);
      timing.voxel_us = std::llround(frame.stage_us.voxel);
      timing.ransac_us = std::llround(frame.stage_us.ransac);
      timing.dbscan_us = std::llround(frame.stage_us.dbscan);
      timing.fit_us = std::llround(frame.stage_us.fit);
      timing.detect_us = std::llround(frame.stage_us.total());
      timing.lidar_perception_us = timing.detect_us + timing.track_us;
    } else {
      for (const VehicleState& v : world.ground_truth_neighbors(scenario.perception.roi_radius)) {
        ObstacleInfo obs;
        obs.index = v.id;
        obs.center = v.position;  // already ego frame
        obs.yaw = v.yaw;
        obs.speed = v.speed;
        obs.length = v.box.length;
        obs.width = v.box.width;
        obstacles.push_back(obs);
      }
    }

    // Plan.
    pcfg.v_max = world.ego_speed_limit();
    const double d_horizon =
        std::max(braking_distance(ego_speed, pcfg), pcfg.horizon_floor_m);
    const WaypointCount wc = waypoint_count(d_horizon, pcfg.d_wp, pcfg.f_safe);
    const GlobalWaypointPath gw = world.global_waypoints(wc.m * pcfg.d_wp, pcfg.d_wp);
    const std::vector<Vec2> ego_wps = to_ego_frame(gw.points, ego_pose);

    PlanStageTimes plan_times;
    const PlanResult plan =
        plan_local(ego_wps, ego_speed, obstacles, pcfg, dt, gw.route_end, &plan_times);
    timing.path_generation_us = std::llround(plan_times.path_generation_us);
    timing.speed_planning_us = std::llround(plan_times.speed_planning_us);
    timing.local_planner_total_us = timing.path_generation_us + timing.speed_planning_us;

    const ControlCommand cmd = compute_control(plan, ego_speed, scenario.control, dt);

    // Ground-truth collision oracle, independent of perception: static SAT
    // overlap between the ego box and every traffic/clutter box.
    const auto ego_rect =
        harness_detail::vehicle_rect(ego_pose.position, ego_pose.yaw, world.ego().box);
    bool contact = false;
    for (const VehicleState& v : world.vehicles()) {
      if (v.kind == VehicleKind::Ego) continue;
      if (rects_overlap(ego_rect, harness_detail::vehicle_rect(v.position, v.yaw, v.box))) {
        contact = true;
        break;
      }
    }
    if (!contact) {
      for (const ClutterSpec& c : world.clutter()) {
        if (rects_overlap(ego_rect, harness_detail::vehicle_rect(c.position, c.yaw, c.box))) {
          contact = true;
          break;
        }
      }
    }
    if (contact) ++sum.contact_ticks;
    if (contact && !prev_contact) ++sum.collision_events;
    prev_contact = contact;

    // Following distance: nearest traffic vehicle ahead of the ego.
    double following = -1.0;
    for (const VehicleState& v : world.ground_truth_neighbors(1e9)) {
      if (v.position.x <= 0.0) continue;
      const double d = v.position.norm();
      if (following < 0.0 || d < following) following = d;
    }
    if (following >= 0.0) {
      following_sum += following;
      ++following_count;
      if (sum.min_following < 0.0 || following < sum.min_following) sum.min_following = following;
    }

    // Records.
    PlanRow pr;
    pr.tick = k;
    pr.time = t;
    pr.speed_case = speed_case_name(plan.speed.speed_case);
    pr.v_exc = plan.speed.v_exc;
    pr.v_pre = plan.speed.v_pre;
    pr.v_cmd = cmd.target_speed;
    pr.steer = cmd.steer;
    if (plan.blocking) {
      pr.blocking_id = plan.blocking->vehicle_index;
      pr.blocking_dist = plan.blocking->distance;
      pr.blocking_speed = plan.blocking->speed;
      pr.blocking_yaw = plan.blocking->yaw;
    }
    pr.d_safe = plan.speed.d_safe;
    pr.path_points = static_cast<int>(plan.trajectory.points.size());
    pr.cfw_points = static_cast<int>(plan.cfw.size());
    pr.path_arc = plan.trajectory.cum_arc.empty() ? 0.0 : plan.trajectory.cum_arc.back();
    pr.d_pose = plan.d_pose;
    pr.target_x = plan.target_pos.x;
    pr.target_y = plan.target_pos.y;
    pr.target_heading = plan.target_heading;
    pr.ego_x = ego_pose.position.x;
    pr.ego_y = ego_pose.position.y;
    pr.ego_yaw = ego_pose.yaw;
    pr.ego_speed = ego_speed;
    pr.following_distance = following;
    pr.collision_events = sum.collision_events;
    pr.in_contact = contact ? 1 : 0;
    pr.skipped_frame = frame.skipped ? 1 : 0;
    pr.n_detections = static_cast<int>(frame.detections.size());
    int confirmed = 0;
    for (const TrackSnapshot& ts : tracks)
      if (ts.status == TrackStatus::Confirmed) ++confirmed;
    pr.n_confirmed_tracks = confirmed;
    trace.add_plan_row(pr);

    switch (plan.speed.speed_case) {
      case SpeedCase::Free:
        ++free_ticks;
        break;
      case SpeedCase::Obstacle:
        ++obstacle_ticks;
        break;
      case SpeedCase::Platoon:
        ++platoon_ticks;
        break;
    }

    if (lidar_mode) {
      nlohmann::ordered_json dj;
      dj["frame"] = k;
      dj["time"] = t;
      dj["skipped"] = frame.skipped;
      nlohmann::ordered_json dets = nlohmann::ordered_json::array();
      for (size_t di = 0; di < frame.detections.size(); ++di) {
        const DetectedVehicle& d = frame.detections[di];
        const int tid = tracker.track_id_for_detection(di);
        nlohmann::ordered_json e;
        e["cx"] = d.center.x;
        e["cy"] = d.center.y;
        e["yaw"] = d.yaw;
        e["length"] = d.length;
        e["width"] = d.width;
        e["n_points"] = d.n_points;
        nlohmann::ordered_json corners = nlohmann::ordered_json::array();
        for (const Vec2& c : d.corners) corners.push_back({c.x, c.y});
        e["corners"] = corners;
        e["track_id"] = tid;
        // Reported box: the track-aligned form consumed by the planner and
        // the accuracy metrics; raw L-shape values kept alongside.
        double rep_cx = d.center.x, rep_cy = d.center.y, rep_yaw = d.yaw;
        double rep_len = d.length, rep_wid = d.width, rep_speed = 0.0;
        bool rep_static = true;
        for (const TrackSnapshot& ts : tracks)
          if (ts.id == tid) {
            rep_cx = ts.rep_center.x;
            rep_cy = ts.rep_center.y;
            rep_yaw = ts.rep_yaw;
            rep_len = ts.rep_length;
            rep_wid = ts.rep_width;
            rep_speed = ts.rep_speed;
            rep_static = ts.is_static;
            break;
          }
        e["rep_cx"] = rep_cx;
        e["rep_cy"] = rep_cy;
        e["rep_yaw"] = rep_yaw;
        e["rep_length"] = rep_len;
        e["rep_width"] = rep_wid;
        e["rep_speed"] = rep_speed;
        e["rep_static"] = rep_static;
        dets.push_back(e);
      }
      dj["detections"] = dets;
      trace.add_detections_line(dj);

      nlohmann::ordered_json tj;
      tj["frame"] = k;
      nlohmann::ordered_json tarr = nlohmann::ordered_json::array();
      for (const TrackSnapshot& ts : tracks) {
        nlohmann::ordered_json e;
        e["id"] = ts.id;
        e["status"] = ts.status == TrackStatus::Confirmed ? "confirmed" : "tentative";
        e["x"] = ts.position.x;
        e["y"] = ts.position.y;
        e["yaw"] = ts.yaw;
        e["speed"] = ts.speed;
        e["yaw_rate"] = ts.yaw_rate;
        e["length"] = ts.length;
        e["width"] = ts.width;
        e["rep_cx"] = ts.rep_center.x;
        e["rep_cy"] = ts.rep_center.y;
        e["rep_yaw"] = ts.rep_yaw;
        e["rep_speed"] = ts.rep_speed;
        e["static"] = ts.is_static;
        e["cov"] = ts.cov_diag;
        e["hits"] = ts.hits;
        e["misses"] = ts.misses;
        e["updated"] = ts.updated_this_frame;
        tarr.push_back(e);
      }
      tj["tracks"] = tarr;
      trace.add_tracks_line(tj);
    }

    // Advance.
    world.step(cmd, dt);
    timing.tick_us =
        std::llround(std::chrono::duration<double, std::micro>(clock::now() - tick_t0).count());
    trace.add_timing_row(timing);
  }

  sum.ticks = n_ticks;
  sum.final_speed = world.ego().speed;
  sum.mean_following =
      following_count > 0 ? following_sum / static_cast<double>(following_count) : -1.0;

  nlohmann::ordered_json report;
  report["schema_version"] = 1;
  report["kind"] = "run_report";
  report["scenario"] = scenario.name;
  report["mode"] = opt.mode;
  report["seed"] = scenario.seed;
  report["sim_dt"] = dt;
  report["duration_s"] = scenario.duration;
  report["ticks"] = sum.ticks;
  report["frames"] = sum.frames;
  report["skipped_frames"] = sum.skipped_frames;
  report["collision_events"] = sum.collision_events;
  report["contact_ticks"] = sum.contact_ticks;
  report["min_following_distance"] = sum.min_following;
  report["mean_following_distance"] = sum.mean_following;
  report["final_ego_speed"] = sum.final_speed;
  report["final_ego_x"] = world.ego().position.x;
  report["final_ego_y"] = world.ego().position.y;
  report["case_ticks"] = {{"free", free_ticks}, {"obstacle", obstacle_ticks},
                          {"platoon", platoon_ticks}};
  trace.finalize(report);
  return sum;
}

}  // namespace lidarplan
