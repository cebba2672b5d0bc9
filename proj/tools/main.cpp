// Command-line front end: run closed-loop scenarios, evaluate saved traces,
// aggregate latency, and replay single frames for debugging.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "lidarplan/harness.hpp"
#include "lidarplan/metrics.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/trace.hpp"

namespace fs = std::filesystem;
using namespace lidarplan;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_json_out(const nlohmann::ordered_json& j, const std::string& out_file) {
  std::cout << j.dump(2) << "\n";
  if (!out_file.empty()) {
    std::ofstream f(out_file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_file);
    f << j.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidarplan: synthetic-lidar perception + local planning simulator"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run a scenario closed-loop and write a trace directory");
  std::string run_scenario, run_mode = "lidar", run_out;
  uint64_t run_seed = 0;
  bool run_seed_set = false;
  double run_duration = 0.0;
  bool run_duration_set = false;
  bool run_save_clouds = false;
  run->add_option("--scenario", run_scenario, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--mode", run_mode, "Perception mode: lidar or gt")
      ->check(CLI::IsMember({"lidar", "gt"}));
  run->add_option("--seed", run_seed, "Override the scenario seed")
      ->each([&](const std::string&) { run_seed_set = true; });
  run->add_option("--out", run_out, "Trace output directory");
  run->add_option("--duration", run_duration, "Override run duration in seconds")
      ->check(CLI::PositiveNumber)
      ->each([&](const std::string&) { run_duration_set = true; });
  run->add_flag("--save-clouds", run_save_clouds, "Also store per-frame point clouds");

  // --- eval --------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate detection accuracy of a saved trace");
  std::string eval_trace, eval_out;
  double eval_range = 20.0;
  bool eval_dynamic = false;
  eval->add_option("--trace", eval_trace, "Trace directory")->required();
  eval->add_option("--range", eval_range, "Evaluation range in meters")
      ->check(CLI::PositiveNumber);
  eval->add_flag("--dynamic", eval_dynamic, "Restrict ground truth to moving vehicles");
  eval->add_option("--out", eval_out, "Also write the report to this file");

  // --- bench -------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Aggregate per-stage latency of a saved trace");
  std::string bench_trace, bench_out;
  bench->add_option("--trace", bench_trace, "Trace directory")->required();
  bench->add_option("--out", bench_out, "Also write the report to this file");

  // --- replay ------------------------------------------------------------
  auto* replay = app.add_subcommand("replay", "Dump one frame of a saved trace");
  std::string replay_trace;
  long replay_frame = 0;
  replay->add_option("--trace", replay_trace, "Trace directory")->required();
  replay->add_option("--frame", replay_frame, "Frame (tick) index")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const std::string text = read_file(run_scenario);
      const ScenarioConfig cfg = load_scenario_text(text);
      RunOptions opt;
      opt.mode = run_mode;
      if (run_seed_set) opt.seed_override = run_seed;
      if (run_duration_set) opt.duration_override = run_duration;
      opt.save_clouds = run_save_clouds;
      fs::path out = run_out;
      if (out.empty()) {
        const uint64_t seed = run_seed_set ? run_seed : cfg.seed;
        out = fs::path("traces") /
              (cfg.name + "_" + run_mode + "_seed" + std::to_string(seed));
      }
      const RunSummary s = run_closed_loop(cfg, text, out, opt);
      std::cout << "trace: " << s.trace_dir.string() << "\n"
                << "ticks: " << s.ticks << "\n"
                << "frames: " << s.frames << " (skipped " << s.skipped_frames << ")\n"
                << "collision_events: " << s.collision_events << "\n"
                << "final_ego_speed: " << fmt_double(s.final_speed) << "\n";
      return 0;
    }
    if (*eval) {
      const PerceptionMetrics m = eval_perception(eval_trace, eval_range, eval_dynamic);
      write_json_out(perception_metrics_json(m, eval_range, eval_dynamic), eval_out);
      return 0;
    }
    if (*bench) {
      const BenchReport rep = bench_latency(bench_trace);
      write_json_out(bench_json(rep), bench_out);
      return 0;
    }
    if (*replay) {
      const fs::path dir = replay_trace;
      nlohmann::ordered_json out;
      out["frame"] = replay_frame;
      nlohmann::ordered_json wj = nlohmann::ordered_json::array();
      for (const WorldRow& r : read_world_csv(dir)) {
        if (r.tick != replay_frame) continue;
        wj.push_back({{"id", r.id},
                      {"kind", r.kind},
                      {"x", r.x},
                      {"y", r.y},
                      {"yaw", r.yaw},
                      {"speed", r.speed}});
      }
      if (wj.empty()) throw TraceError("replay: frame not found in world.csv");
      out["world"] = wj;
      for (const PlanRow& r : read_plans_csv(dir)) {
        if (r.tick != replay_frame) continue;
        out["plan"] = {{"case", r.speed_case},     {"v_exc", r.v_exc},
                       {"v_cmd", r.v_cmd},         {"blocking_id", r.blocking_id},
                       {"blocking_dist", r.blocking_dist}, {"cfw_points", r.cfw_points},
                       {"path_arc", r.path_arc},   {"following", r.following_distance}};
        break;
      }
      const fs::path det_file = dir / "detections.jsonl";
      if (fs::exists(det_file)) {
        for (const nlohmann::json& line : read_jsonl(det_file)) {
          if (line.at("frame").get<long>() != replay_frame) continue;
          out["detections"] = line;
          break;
        }
      }
      const fs::path tracks_file = dir / "tracks.jsonl";
      if (fs::exists(tracks_file)) {
        for (const nlohmann::json& line : read_jsonl(tracks_file)) {
          if (line.at("frame").get<long>() != replay_frame) continue;
          out["tracks"] = line;
          break;
        }
      }
      char cloud_name[32];
      std::snprintf(cloud_name, sizeof(cloud_name), "frame_%06ld.bin", replay_frame);
      const fs::path cloud = dir / "clouds" / cloud_name;
      if (fs::exists(cloud))
        out["cloud"] = {{"file", cloud.string()},
                        {"n_points", fs::file_size(cloud) / (3 * sizeof(float))}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
