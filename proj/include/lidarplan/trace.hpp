#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarplan/geometry.hpp"
#include "lidarplan/lidar.hpp"

namespace lidarplan {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form; identical bits always serialize to the
// same bytes, which is what the byte-level trace comparison relies on.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw TraceError("bad number in trace: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// Row types shared by the writer and the readers.

struct WorldRow {
  long tick = 0;
  double time = 0.0;
  int id = 0;
  int kind = 0;  // 0 = ego, 1 = traffic, 2 = clutter
  double x = 0.0, y = 0.0, yaw = 0.0, speed = 0.0;
  double length = 0.0, width = 0.0, height = 0.0;
};

struct PlanRow {
  long tick = 0;
  double time = 0.0;
  std::string speed_case;
  double v_exc = 0.0, v_pre = 0.0, v_cmd = 0.0, steer = 0.0;
  int blocking_id = -1;
  double blocking_dist = 0.0, blocking_speed = 0.0, blocking_yaw = 0.0;
  double d_safe = 0.0;
  int path_points = 0, cfw_points = 0;
  double path_arc = 0.0, d_pose = 0.0;
  double target_x = 0.0, target_y = 0.0, target_heading = 0.0;
  double ego_x = 0.0, ego_y = 0.0, ego_yaw = 0.0, ego_speed = 0.0;
  double following_distance = -1.0;  // -1: no vehicle ahead
  long collision_events = 0;
  int in_contact = 0;
  int skipped_frame = 0;
  int n_detections = 0;
  int n_confirmed_tracks = 0;
};

struct TimingRow {
  long tick = 0;
  long long crop_us = 0, voxel_us = 0, ransac_us = 0, dbscan_us = 0, fit_us = 0;
  long long detect_us = 0, track_us = 0, lidar_perception_us = 0;
  long long path_generation_us = 0, speed_planning_us = 0, local_planner_total_us = 0;
  long long tick_us = 0;
};

inline const char* world_csv_header() {
  return "tick,time,id,kind,x,y,yaw,speed,length,width,height";
}
inline const char* plans_csv_header() {
  return "tick,time,case,v_exc,v_pre,v_cmd,steer,blocking_id,blocking_dist,blocking_speed,"
         "blocking_yaw,d_safe,path_points,cfw_points,path_arc,d_pose,target_x,target_y,"
         "target_heading,ego_x,ego_y,ego_yaw,ego_speed,following_distance,collision_events,"
         "in_contact,skipped_frame,n_detections,n_confirmed_tracks";
}
inline const char* timing_csv_header() {
  return "tick,crop_us,voxel_us,ransac_us,dbscan_us,fit_us,detect_us,track_us,"
         "lidar_perception_us,path_generation_us,speed_planning_us,local_planner_total_us,"
         "tick_us";
}

// ---------------------------------------------------------------------------
// Writer.

class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& dir, const std::string& scenario_text,
              bool save_clouds)
      : dir_(dir), save_clouds_(save_clouds) {
    std::filesystem::create_directories(dir_);
    if (save_clouds_) std::filesystem::create_directories(dir_ / "clouds");
    write_text(dir_ / "scenario.copy", scenario_text);
    world_.open(dir_ / "world.csv");
    plans_.open(dir_ / "plans.csv");
    timing_.open(dir_ / "timing.csv");
    detections_.open(dir_ / "detections.jsonl");
    tracks_.open(dir_ / "tracks.jsonl");
    if (!world_ || !plans_ || !timing_ || !detections_ || !tracks_)
      throw TraceError("cannot create trace files in " + dir_.string());
    world_ << world_csv_header() << "\n";
    plans_ << plans_csv_header() << "\n";
    timing_ << timing_csv_header() << "\n";
  }

  const std::filesystem::path& dir() const { return dir_; }
  bool save_clouds() const { return save_clouds_; }

  void add_world_row(const WorldRow& r) {
    world_ << r.tick << ',' << fmt_double(r.time) << ',' << r.id << ',' << r.kind << ','
           << fmt_double(r.x) << ',' << fmt_double(r.y) << ',' << fmt_double(r.yaw) << ','
           << fmt_double(r.speed) << ',' << fmt_double(r.length) << ',' << fmt_double(r.width)
           << ',' << fmt_double(r.height) << "\n";
  }

  void add_plan_row(const PlanRow& r) {
    plans_ << r.tick << ',' << fmt_double(r.time) << ',' << r.speed_case << ','
           << fmt_double(r.v_exc) << ',' << fmt_double(r.v_pre) << ',' << fmt_double(r.v_cmd)
           << ',' << fmt_double(r.steer) << ',' << r.blocking_id << ','
           << fmt_double(r.blocking_dist) << ',' << fmt_double(r.blocking_speed) << ','
           << fmt_double(r.blocking_yaw) << ',' << fmt_double(r.d_safe) << ',' << r.path_points
           << ',' << r.cfw_points << ',' << fmt_double(r.path_arc) << ',' << fmt_double(r.d_pose)
           << ',' << fmt_double(r.target_x) << ',' << fmt_double(r.target_y) << ','
           << fmt_double(r.target_heading) << ',' << fmt_double(r.ego_x) << ','
           << fmt_double(r.ego_y) << ',' << fmt_double(r.ego_yaw) << ',' << fmt_double(r.ego_speed)
           << ',' << fmt_double(r.following_distance) << ',' << r.collision_events << ','
           << r.in_contact << ',' << r.skipped_frame << ',' << r.n_detections << ','
           << r.n_confirmed_tracks << "\n";
  }

  void add_timing_row(const TimingRow& r) {
    timing_ << r.tick << ',' << r.crop_us << ',' << r.voxel_us << ',' << r.ransac_us << ','
            << r.dbscan_us << ',' << r.fit_us << ',' << r.detect_us << ',' << r.track_us << ','
            << r.lidar_perception_us << ',' << r.path_generation_us << ',' << r.speed_planning_us
            << ',' << r.local_planner_total_us << ',' << r.tick_us << "\n";
  }

  void add_detections_line(const nlohmann::ordered_json& j) { detections_ << j.dump() << "\n"; }
  void add_tracks_line(const nlohmann::ordered_json& j) { tracks_ << j.dump() << "\n"; }

  void add_cloud(long frame, const PointCloud& cloud, const Pose2& ego_pose) {
    if (!save_clouds_) return;
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06ld", frame);
    std::ofstream bin(dir_ / "clouds" / (std::string(name) + ".bin"), std::ios::binary);
    for (const Point3& p : cloud.points) {
      const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z)};
      bin.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    nlohmann::ordered_json side;
    side["frame"] = frame;
    side["timestamp"] = cloud.timestamp;
    side["n_points"] = cloud.points.size();
    side["ego"] = {{"x", ego_pose.position.x}, {"y", ego_pose.position.y}, {"yaw", ego_pose.yaw}};
    write_text(dir_ / "clouds" / (std::string(name) + ".json"), side.dump(2) + "\n");
  }

  void finalize(const nlohmann::ordered_json& report) {
    write_text(dir_ / "report.json", report.dump(2) + "\n");
    world_.close();
    plans_.close();
    timing_.close();
    detections_.close();
    tracks_.close();
  }

 private:
  static void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw TraceError("cannot write " + p.string());
    f << text;
  }

  std::filesystem::path dir_;
  bool save_clouds_;
  std::ofstream world_, plans_, timing_, detections_, tracks_;
};

// ---------------------------------------------------------------------------
// Readers.

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw TraceError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline std::vector<WorldRow> read_world_csv(const std::filesystem::path& trace_dir) {
  const auto lines = read_lines(trace_dir / "world.csv");
  if (lines.empty() || lines[0] != world_csv_header())
    throw TraceError("world.csv: unexpected header");
  std::vector<WorldRow> rows;
  rows.reserve(lines.size() - 1);
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 11) throw TraceError("world.csv: bad row " + std::to_string(i));
    WorldRow r;
    r.tick = std::stol(f[0]);
    r.time = parse_double(f[1]);
    r.id = std::stoi(f[2]);
    r.kind = std::stoi(f[3]);
    r.x = parse_double(f[4]);
    r.y = parse_double(f[5]);
    r.yaw = parse_double(f[6]);
    r.speed = parse_double(f[7]);
    r.length = parse_double(f[8]);
    r.width = parse_double(f[9]);
    r.height = parse_double(f[10]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<PlanRow> read_plans_csv(const std::filesystem::path& trace_dir) {
  const auto lines = read_lines(trace_dir / "plans.csv");
  if (lines.empty() || lines[0] != plans_csv_header())
    throw TraceError("plans.csv: unexpected header");
  std::vector<PlanRow> rows;
  rows.reserve(lines.size() - 1);
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 29) throw TraceError("plans.csv: bad row " + std::to_string(i));
    PlanRow r;
    r.tick = std::stol(f[0]);
    r.time = parse_double(f[1]);
    r.speed_case = f[2];
    r.v_exc = parse_double(f[3]);
    r.v_pre = parse_double(f[4]);
    r.v_cmd = parse_double(f[5]);
    r.steer = parse_double(f[6]);
    r.blocking_id = std::stoi(f[7]);
    r.blocking_dist = parse_double(f[8]);
    r.blocking_speed = parse_double(f[9]);
    r.blocking_yaw = parse_double(f[10]);
    r.d_safe = parse_double(f[11]);
    r.path_points = std::stoi(f[12]);
    r.cfw_points = std::stoi(f[13]);
    r.path_arc = parse_double(f[14]);
    r.d_pose = parse_double(f[15]);
    r.target_x = parse_double(f[16]);
    r.target_y = parse_double(f[17]);
    r.target_heading = parse_double(f[18]);
    r.ego_x = parse_double(f[19]);
    r.ego_y = parse_double(f[20]);
    r.ego_yaw = parse_double(f[21]);
    r.ego_speed = parse_double(f[22]);
    r.following_distance = parse_double(f[23]);
    r.collision_events = std::stol(f[24]);
    r.in_contact = std::stoi(f[25]);
    r.skipped_frame = std::stoi(f[26]);
    r.n_detections = std::stoi(f[27]);
    r.n_confirmed_tracks = std::stoi(f[28]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<TimingRow> read_timing_csv(const std::filesystem::path& trace_dir) {
  const auto lines = read_lines(trace_dir / "timing.csv");
  if (lines.empty() || lines[0] != timing_csv_header())
    throw TraceError("timing.csv: unexpected header");
  std::vector<TimingRow> rows;
  rows.reserve(lines.size() - 1);
  for (size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 13) throw TraceError("timing.csv: bad row " + std::to_string(i));
    TimingRow r;
    r.tick = std::stol(f[0]);
    r.crop_us = std::stoll(f[1]);
    r.voxel_us = std::stoll(f[2]);
    r.ransac_us = std::stoll(f[3]);
    r.dbscan_us = std::stoll(f[4]);
    r.fit_us = std::stoll(f[5]);
    r.detect_us = std::stoll(f[6]);
    r.track_us = std::stoll(f[7]);
    r.lidar_perception_us = std::stoll(f[8]);
    r.path_generation_us = std::stoll(f[9]);
    r.speed_planning_us = std::stoll(f[10]);
    r.local_planner_total_us = std::stoll(f[11]);
    r.tick_us = std::stoll(f[12]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& file) {
  const auto lines = read_lines(file);
  std::vector<nlohmann::json> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(nlohmann::json::parse(l));
  return out;
}

inline nlohmann::json read_report(const std::filesystem::path& trace_dir) {
  std::ifstream f(trace_dir / "report.json");
  if (!f) throw TraceError("cannot open " + (trace_dir / "report.json").string());
  return nlohmann::json::parse(f);
}

}  // namespace lidarplan
