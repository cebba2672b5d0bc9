#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lidarplan/spline.hpp"

using namespace lidarplan;

TEST_CASE("collinear waypoints resample onto the exact grid") {
  std::vector<Vec2> wps;
  for (int i = 0; i <= 5; ++i) wps.push_back({2.0 * i, 0.0});
  const EgoTrajectory traj = bspline_resample(wps, 0.5);
  CHECK_FALSE(traj.passthrough);
  REQUIRE(traj.points.size() == 21);  // 0, 0.5, ..., 10
  for (size_t i = 0; i < traj.points.size(); ++i) {
    CHECK(traj.points[i].x == Catch::Approx(0.5 * i).margin(1e-9));
    CHECK(traj.points[i].y == Catch::Approx(0.0).margin(1e-9));
    CHECK(traj.cum_arc[i] == Catch::Approx(0.5 * i).margin(1e-12));
  }
}

TEST_CASE("a slanted straight line is reproduced exactly") {
  // Quadratic splines have linear precision: waypoints on y = 0.5 x stay on
  // that line at every sample.
  std::vector<Vec2> wps;
  for (int i = 0; i <= 8; ++i) wps.push_back({1.7 * i, 0.85 * i});
  const EgoTrajectory traj = bspline_resample(wps, 0.5);
  for (const Vec2& p : traj.points) CHECK(p.y == Catch::Approx(0.5 * p.x).margin(1e-9));
}

TEST_CASE("endpoints are interpolated") {
  const std::vector<Vec2> wps = {{0, 0}, {2, 0.3}, {4, -0.2}, {6, 0.4}, {8, 0.0}};
  const EgoTrajectory traj = bspline_resample(wps, 0.5);
  REQUIRE(traj.points.size() >= 2);
  CHECK((traj.points.front() - wps.front()).norm() < 1e-9);
  CHECK((traj.points.back() - wps.back()).norm() < 1e-9);
  CHECK(traj.cum_arc.front() == 0.0);
}

TEST_CASE("interior waypoints lie on the smoothed path") {
  const std::vector<Vec2> wps = {{0, 0}, {2, 0.4}, {4, 0.1}, {6, -0.3}, {8, 0.2}, {10, 0.0}};
  const EgoTrajectory traj = bspline_resample(wps, 0.25);
  for (const Vec2& w : wps) {
    double best = 1e9;
    for (size_t i = 1; i < traj.points.size(); ++i)
      best = std::min(best, point_segment_distance(w, {traj.points[i - 1], traj.points[i]}));
    CHECK(best < 0.02);  // the curve interpolates, it does not just approximate
  }
}

TEST_CASE("fewer than three distinct waypoints pass through unchanged") {
  const EgoTrajectory two = bspline_resample({{0, 0}, {3, 4}}, 0.5);
  CHECK(two.passthrough);
  REQUIRE(two.points.size() == 2);
  CHECK(two.points[1].x == 3.0);
  CHECK(two.cum_arc[1] == Catch::Approx(5.0));

  const EgoTrajectory one = bspline_resample({{1, 1}}, 0.5);
  CHECK(one.passthrough);
  CHECK(one.points.size() == 1);

  const EgoTrajectory none = bspline_resample({}, 0.5);
  CHECK(none.passthrough);
  CHECK(none.points.empty());
}

TEST_CASE("duplicate waypoints are collapsed before fitting") {
  const EgoTrajectory traj = bspline_resample({{0, 0}, {0, 0}, {2, 0}}, 0.5);
  CHECK(traj.passthrough);  // only two distinct points remain
  REQUIRE(traj.points.size() == 2);

  // Duplicates inside a longer list do not break the fit.
  const EgoTrajectory longer =
      bspline_resample({{0, 0}, {2, 0}, {2, 0}, {4, 0.5}, {6, 0.5}}, 0.5);
  CHECK_FALSE(longer.passthrough);
  CHECK((longer.points.front() - Vec2{0, 0}).norm() < 1e-9);
}

TEST_CASE("sample spacing follows the requested step") {
  const std::vector<Vec2> wps = {{0, 0}, {2, 0.4}, {4, 0.1}, {6, -0.3}, {8, 0.2}, {10, 0.0}};
  const EgoTrajectory traj = bspline_resample(wps, 0.5);
  for (size_t i = 1; i + 1 < traj.cum_arc.size(); ++i)
    CHECK(traj.cum_arc[i] - traj.cum_arc[i - 1] == Catch::Approx(0.5).margin(1e-12));
  // The path is gently curved, so chord lengths track the parameter step.
  // The final chord closes onto the last waypoint and may be shorter.
  for (size_t i = 1; i < traj.points.size(); ++i) {
    const double chord = (traj.points[i] - traj.points[i - 1]).norm();
    if (i + 1 < traj.points.size()) CHECK(chord > 0.3);
    CHECK(chord < 0.7);
  }
  // The terminal sample closes the path within one step of its neighbor.
  const double last_step = traj.cum_arc.back() - traj.cum_arc[traj.cum_arc.size() - 2];
  CHECK(last_step > 0.0);
  CHECK(last_step <= 0.5 + 1e-9);
  CHECK((traj.points.back() - wps.back()).norm() < 1e-9);
}

TEST_CASE("a right-angle corner is smoothed without large deviation") {
  // Waypoints at 2 m spacing around a 90-degree corner; the smoothed path
  // must stay within half a spacing of the corner polyline.
  std::vector<Vec2> wps;
  for (int i = 0; i <= 5; ++i) wps.push_back({2.0 * i, 0.0});
  for (int i = 1; i <= 5; ++i) wps.push_back({10.0, 2.0 * i});
  const EgoTrajectory traj = bspline_resample(wps, 0.5);
  REQUIRE_FALSE(traj.passthrough);
  auto dist_to_polyline = [&](const Vec2& p) {
    double best = 1e9;
    for (size_t i = 1; i < wps.size(); ++i)
      best = std::min(best, point_segment_distance(p, {wps[i - 1], wps[i]}));
    return best;
  };
  for (const Vec2& p : traj.points) CHECK(dist_to_polyline(p) < 1.0);
  // And it actually cuts the corner: some sample deviates from the polyline.
  double max_dev = 0.0;
  for (const Vec2& p : traj.points) max_dev = std::max(max_dev, dist_to_polyline(p));
  CHECK(max_dev > 0.05);
}

TEST_CASE("resampling is deterministic") {
  const std::vector<Vec2> wps = {{0, 0}, {2, 1}, {4, 0}, {6, -1}, {8, 0}};
  const EgoTrajectory a = bspline_resample(wps, 0.5);
  const EgoTrajectory b = bspline_resample(wps, 0.5);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
  }
}
