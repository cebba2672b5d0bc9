#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarplan/geometry.hpp"
#include "lidarplan/trace.hpp"

namespace lidarplan {

// ---------------------------------------------------------------------------
// Detection accuracy against the recorded ground truth.

struct PerceptionMetrics {
  double recall = 0.0;
  double miou = 0.0;
  double e_theta_mean_deg = 0.0;
  double e_theta_std_deg = 0.0;
  double e_v_mean = 0.0;
  double e_v_std = 0.0;
  long n_gt = 0;
  long n_matched = 0;
  long n_frames = 0;
  long n_detections = 0;
};

namespace metrics_detail {

struct GtBox {
  Vec2 center;  // ego frame
  double yaw = 0.0;
  double length = 0.0, width = 0.0;
  double speed = 0.0;
};

struct DetBox {
  Vec2 center;
  double yaw = 0.0;
  double length = 0.0, width = 0.0;
  double speed = 0.0;
};

// Orientation error folded by the rectangle's 180-degree symmetry.
inline double yaw_error(double a, double b) {
  double e = std::abs(wrap_angle(a - b));
  if (e > M_PI / 2.0) e = M_PI - e;
  return e;
}

inline void mean_std(const std::vector<double>& xs, double& mean, double& std_out) {
  mean = 0.0;
  std_out = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  std_out = std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace metrics_detail

// Per frame, ground-truth vehicles within range are matched one-to-one to
// reported detection boxes greedily by descending BEV IoU (positive overlap
// required). Recall counts matched ground truth; mIoU, orientation error and
// speed error aggregate over the matched pairs.
inline PerceptionMetrics eval_perception(const std::filesystem::path& trace_dir, double range,
                                         bool dynamic_only, double static_threshold = 0.5) {
  using metrics_detail::DetBox;
  using metrics_detail::GtBox;

  const std::vector<WorldRow> world = read_world_csv(trace_dir);
  const std::vector<nlohmann::json> det_lines = read_jsonl(trace_dir / "detections.jsonl");
  if (det_lines.empty()) throw TraceError("eval: trace has no detection records");

  // Group ground truth by tick: ego pose + traffic boxes.
  std::map<long, WorldRow> ego_rows;
  std::map<long, std::vector<WorldRow>> traffic_rows;
  for (const WorldRow& r : world) {
    if (r.id == 0)
      ego_rows[r.tick] = r;
    else if (r.kind == 1)
      traffic_rows[r.tick].push_back(r);
  }

  PerceptionMetrics m;
  std::vector<double> ious, e_thetas, e_vs;

  for (const nlohmann::json& line : det_lines) {
    const long tick = line.at("frame").get<long>();
    const auto ego_it = ego_rows.find(tick);
    if (ego_it == ego_rows.end()) throw TraceError("eval: detections reference unknown tick");
    const WorldRow& ego = ego_it->second;
    const Pose2 ego_pose{{ego.x, ego.y}, ego.yaw};
    ++m.n_frames;

    std::vector<GtBox> gts;
    if (auto it = traffic_rows.find(tick); it != traffic_rows.end()) {
      for (const WorldRow& r : it->second) {
        GtBox gt;
        gt.center = map_to_frame(ego_pose, {r.x, r.y});
        gt.yaw = wrap_angle(r.yaw - ego.yaw);
        gt.length = r.length;
        gt.width = r.width;
        gt.speed = r.speed;
        if (gt.center.norm() > range) continue;
        if (dynamic_only && gt.speed <= static_threshold) continue;
        gts.push_back(gt);
      }
    }

    std::vector<DetBox> dets;
    for (const nlohmann::json& dj : line.at("detections")) {
      DetBox d;
      d.center = {dj.at("rep_cx").get<double>(), dj.at("rep_cy").get<double>()};
      d.yaw = dj.at("rep_yaw").get<double>();
      d.length = dj.at("rep_length").get<double>();
      d.width = dj.at("rep_width").get<double>();
      d.speed = dj.at("rep_speed").get<double>();
      dets.push_back(d);
    }
    m.n_gt += static_cast<long>(gts.size());
    m.n_detections += static_cast<long>(dets.size());
    if (gts.empty() || dets.empty()) continue;

    struct Pair {
      double iou;
      int gi, di;
    };
    std::vector<Pair> pairs;
    for (size_t gi = 0; gi < gts.size(); ++gi)
      for (size_t di = 0; di < dets.size(); ++di) {
        const double iou =
            rect_iou(rect_corners(gts[gi].center, gts[gi].yaw, gts[gi].length, gts[gi].width),
                     rect_corners(dets[di].center, dets[di].yaw, dets[di].length, dets[di].width));
        if (iou > 0.0) pairs.push_back({iou, static_cast<int>(gi), static_cast<int>(di)});
      }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.gi != b.gi) return a.gi < b.gi;
      return a.di < b.di;
    });
    std::vector<char> gt_used(gts.size(), false), det_used(dets.size(), false);
    for (const Pair& p : pairs) {
      if (gt_used[p.gi] || det_used[p.di]) continue;
      gt_used[p.gi] = true;
      det_used[p.di] = true;
      ++m.n_matched;
      ious.push_back(p.iou);
      e_thetas.push_back(metrics_detail::yaw_error(dets[p.di].yaw, gts[p.gi].yaw) * 180.0 / M_PI);
      e_vs.push_back(std::abs(dets[p.di].speed - gts[p.gi].speed));
    }
  }

  m.recall = m.n_gt > 0 ? static_cast<double>(m.n_matched) / static_cast<double>(m.n_gt) : 0.0;
  double iou_std = 0.0;
  metrics_detail::mean_std(ious, m.miou, iou_std);
  metrics_detail::mean_std(e_thetas, m.e_theta_mean_deg, m.e_theta_std_deg);
  metrics_detail::mean_std(e_vs, m.e_v_mean, m.e_v_std);
  return m;
}

inline nlohmann::ordered_json perception_metrics_json(const PerceptionMetrics& m, double range,
                                                      bool dynamic_only) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "perception_eval";
  j["range_m"] = range;
  j["dynamic_only"] = dynamic_only;
  j["recall"] = m.recall;
  j["miou"] = m.miou;
  j["e_theta_mean_deg"] = m.e_theta_mean_deg;
  j["e_theta_std_deg"] = m.e_theta_std_deg;
  j["e_v_mean"] = m.e_v_mean;
  j["e_v_std"] = m.e_v_std;
  j["n_gt"] = m.n_gt;
  j["n_matched"] = m.n_matched;
  j["n_frames"] = m.n_frames;
  j["n_detections"] = m.n_detections;
  return j;
}

// ---------------------------------------------------------------------------
// Latency aggregation.

struct StageStats {
  double avg_us = 0.0;
  double max_us = 0.0;
};

struct BenchReport {
  std::vector<std::pair<std::string, StageStats>> stages;
  long n_rows = 0;
  bool planner_within_50ms = false;
  bool perception_within_50ms = false;

  const StageStats* stage(const std::string& name) const {
    for (const auto& [n, s] : stages)
      if (n == name) return &s;
    return nullptr;
  }
};

inline BenchReport bench_latency(const std::filesystem::path& trace_dir) {
  const std::vector<TimingRow> rows = read_timing_csv(trace_dir);
  BenchReport rep;
  rep.n_rows = static_cast<long>(rows.size());
  if (rows.empty()) return rep;

  const std::vector<std::pair<std::string, long long TimingRow::*>> fields = {
      {"crop", &TimingRow::crop_us},
      {"voxel", &TimingRow::voxel_us},
      {"ransac", &TimingRow::ransac_us},
      {"dbscan", &TimingRow::dbscan_us},
      {"lshape_fit", &TimingRow::fit_us},
      {"detect", &TimingRow::detect_us},
      {"track", &TimingRow::track_us},
      {"lidar_perception", &TimingRow::lidar_perception_us},
      {"path_generation", &TimingRow::path_generation_us},
      {"speed_planning", &TimingRow::speed_planning_us},
      {"local_planner_total", &TimingRow::local_planner_total_us},
      {"tick_total", &TimingRow::tick_us},
  };
  for (const auto& [name, member] : fields) {
    StageStats s;
    double sum = 0.0;
    for (const TimingRow& r : rows) {
      const double v = static_cast<double>(r.*member);
      sum += v;
      s.max_us = std::max(s.max_us, v);
    }
    s.avg_us = sum / static_cast<double>(rows.size());
    rep.stages.emplace_back(name, s);
  }
  rep.planner_within_50ms = rep.stage("local_planner_total")->avg_us <= 50000.0;
  rep.perception_within_50ms = rep.stage("lidar_perception")->avg_us <= 50000.0;
  return rep;
}

inline nlohmann::ordered_json bench_json(const BenchReport& rep) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "latency_bench";
  j["n_rows"] = rep.n_rows;
  nlohmann::ordered_json stages;
  for (const auto& [name, s] : rep.stages) {
    stages[name] = {{"avg_ms", s.avg_us / 1000.0}, {"max_ms", s.max_us / 1000.0}};
  }
  j["stages"] = stages;
  j["planner_within_50ms"] = rep.planner_within_50ms;
  j["perception_within_50ms"] = rep.perception_within_50ms;
  return j;
}

}  // namespace lidarplan
