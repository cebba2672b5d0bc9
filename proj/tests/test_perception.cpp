#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lidarplan/lidar.hpp"
#include "lidarplan/perception.hpp"

using namespace lidarplan;

namespace {

PointCloud cloud_of(std::vector<Point3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

// Reference DBSCAN: textbook O(n^2) expansion, used as the oracle for the
// grid-accelerated implementation.
DbscanResult dbscan_reference(const PointCloud& cloud, double eps, int min_pts) {
  const int n = static_cast<int>(cloud.points.size());
  const double eps2 = eps * eps;
  auto neighbors_of = [&](int i) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
      const double dx = cloud.points[i].x - cloud.points[j].x;
      const double dy = cloud.points[i].y - cloud.points[j].y;
      const double dz = cloud.points[i].z - cloud.points[j].z;
      if (dx * dx + dy * dy + dz * dz <= eps2) out.push_back(j);
    }
    return out;
  };
  std::vector<int> label(n, -2);  // -2 unvisited, -1 noise, >=0 cluster
  DbscanResult res;
  for (int i = 0; i < n; ++i) {
    if (label[i] != -2) continue;
    std::vector<int> nb = neighbors_of(i);
    if (static_cast<int>(nb.size()) < min_pts) {
      label[i] = -1;
      continue;
    }
    const int cid = static_cast<int>(res.clusters.size());
    res.clusters.emplace_back();
    label[i] = cid;
    std::vector<int> frontier = nb;
    for (size_t k = 0; k < frontier.size(); ++k) {
      const int j = frontier[k];
      if (label[j] == -1) label[j] = cid;  // border point adopted
      if (label[j] != -2) continue;
      label[j] = cid;
      std::vector<int> nj = neighbors_of(j);
      if (static_cast<int>(nj.size()) >= min_pts)
        frontier.insert(frontier.end(), nj.begin(), nj.end());
    }
  }
  for (int i = 0; i < n; ++i) {
    if (label[i] < 0)
      res.noise.push_back(i);
    else
      res.clusters[label[i]].push_back(i);
  }
  return res;
}

// Canonical partition form: set of sorted index sets, ignoring cluster order.
std::set<std::vector<int>> partition_of(const DbscanResult& r) {
  std::set<std::vector<int>> out;
  for (auto c : r.clusters) {
    std::sort(c.begin(), c.end());
    out.insert(c);
  }
  return out;
}

}  // namespace

TEST_CASE("ROI crop keeps points by BEV radius and preserves order") {
  const PointCloud in = cloud_of({{5, 0, -2}, {19.9, 0, 5}, {20.1, 0, 0}, {0, 20.0, 1}, {3, 4, 9}});
  const PointCloud out = crop_roi(in, 20.0);
  REQUIRE(out.points.size() == 4);
  CHECK(out.points[0].x == 5.0);
  CHECK(out.points[1].x == 19.9);   // z plays no role
  CHECK(out.points[2].y == 20.0);   // boundary is inclusive
  CHECK(out.points[3].z == 9.0);
}

TEST_CASE("voxel downsample replaces a cube of points by its centroid") {
  // Eight corners of a 0.1 m cube centered at (1.05, 2.05, 0.05): one voxel
  // at size 0.15 if they share the cell; use a cube fully inside one cell.
  std::vector<Point3> pts;
  for (const double dx : {0.01, 0.04})
    for (const double dy : {0.01, 0.04})
      for (const double dz : {0.01, 0.04}) pts.push_back({1.5 + dx, 3.0 + dy, 0.0 + dz});
  const PointCloud out = voxel_downsample(cloud_of(pts), 0.15);
  REQUIRE(out.points.size() == 1);
  CHECK(out.points[0].x == Catch::Approx(1.525).margin(1e-12));
  CHECK(out.points[0].y == Catch::Approx(3.025).margin(1e-12));
  CHECK(out.points[0].z == Catch::Approx(0.025).margin(1e-12));
}

TEST_CASE("voxel downsample keeps well-separated points and first-seen order") {
  const PointCloud in = cloud_of({{10, 0, 0}, {-10, 0, 0}, {0, 10, 0}, {10.01, 0.01, 0.01}});
  const PointCloud out = voxel_downsample(in, 0.15);
  REQUIRE(out.points.size() == 3);
  CHECK(out.points[0].x == Catch::Approx(10.005));  // first-seen voxel first, averaged
  CHECK(out.points[1].x == -10.0);
  CHECK(out.points[2].y == 10.0);
  CHECK_THROWS_AS(voxel_downsample(in, 0.0), std::invalid_argument);
}

TEST_CASE("RANSAC recovers a noiseless plane exactly") {
  std::vector<Point3> pts;
  Rng gen(21);
  for (int i = 0; i < 400; ++i)
    pts.push_back({gen.uniform(-10.0, 10.0), gen.uniform(-10.0, 10.0), 0.0});
  Rng rng(1);
  const RansacResult res = ransac_ground(cloud_of(pts), RansacConfig{}, rng);
  CHECK(std::abs(res.plane.a) < 1e-6);
  CHECK(std::abs(res.plane.b) < 1e-6);
  CHECK(res.plane.c == Catch::Approx(1.0).margin(1e-6));
  CHECK(std::abs(res.plane.d) < 1e-6);
  CHECK(res.ground.points.size() == 400);
  CHECK(res.nonground.points.empty());
}

TEST_CASE("RANSAC splits ground from an object above it") {
  std::vector<Point3> pts;
  Rng gen(22);
  for (int i = 0; i < 1000; ++i)
    pts.push_back(
        {gen.uniform(-10.0, 10.0), gen.uniform(-10.0, 10.0), gen.normal(0.0, 0.02)});
  for (int i = 0; i < 120; ++i)
    pts.push_back({gen.uniform(4.0, 8.0), gen.uniform(-1.0, 1.0), gen.uniform(0.5, 1.5)});
  RansacConfig cfg;
  cfg.distance_threshold = 0.1;
  Rng rng(2);
  const RansacResult res = ransac_ground(cloud_of(pts), cfg, rng);
  // At sigma 0.02 a 0.1 m band holds ~5 sigma: >= 99% of ground survives, and
  // nothing 0.5 m up can be called ground.
  CHECK(res.ground.points.size() >= 990);
  CHECK(res.nonground.points.size() >= 120);
  for (const Point3& p : res.ground.points) CHECK(p.z < 0.5);
}

TEST_CASE("RANSAC throws on degenerate input") {
  CHECK_THROWS_AS(
      [] {
        Rng rng(3);
        return ransac_ground(cloud_of({{0, 0, 0}, {1, 0, 0}}), RansacConfig{}, rng);
      }(),
      DegenerateCloud);
  // All points collinear: no stable plane reaches the inlier fraction.
  std::vector<Point3> line;
  for (int i = 0; i < 50; ++i) line.push_back({double(i), 0.0, double(i)});
  bool threw = false;
  try {
    Rng rng(4);
    ransac_ground(cloud_of(line), RansacConfig{}, rng);
  } catch (const DegenerateCloud&) {
    threw = true;
  }
  CHECK(threw);
}

TEST_CASE("RANSAC is deterministic for a fixed stream") {
  std::vector<Point3> pts;
  Rng gen(23);
  for (int i = 0; i < 500; ++i)
    pts.push_back({gen.uniform(-10.0, 10.0), gen.uniform(-10.0, 10.0), gen.normal(0.0, 0.05)});
  Rng r1(9), r2(9);
  const RansacResult a = ransac_ground(cloud_of(pts), RansacConfig{}, r1);
  const RansacResult b = ransac_ground(cloud_of(pts), RansacConfig{}, r2);
  CHECK(a.plane.a == b.plane.a);
  CHECK(a.plane.d == b.plane.d);
  REQUIRE(a.ground.points.size() == b.ground.points.size());
}

TEST_CASE("DBSCAN separates two blobs with no noise") {
  std::vector<Point3> pts;
  Rng gen(24);
  for (int i = 0; i < 50; ++i) pts.push_back({gen.normal(0.0, 0.1), gen.normal(0.0, 0.1), 0.0});
  for (int i = 0; i < 50; ++i) pts.push_back({gen.normal(10.0, 0.1), gen.normal(0.0, 0.1), 0.0});
  const DbscanResult res = dbscan_cluster(cloud_of(pts), 0.5, 5);
  REQUIRE(res.clusters.size() == 2);
  CHECK(res.noise.empty());
  CHECK(res.clusters[0].size() + res.clusters[1].size() == 100);
  // Membership matches the generating blob.
  for (int i : res.clusters[0]) CHECK((i < 50) == (res.clusters[0][0] < 50));
}

TEST_CASE("DBSCAN labels sparse points as noise") {
  std::vector<Point3> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({i * 100.0, 0.0, 0.0});
  const DbscanResult res = dbscan_cluster(cloud_of(pts), 1.0, 3);
  CHECK(res.clusters.empty());
  CHECK(res.noise.size() == 20);
  const DbscanResult empty = dbscan_cluster(cloud_of({}), 1.0, 3);
  CHECK(empty.clusters.empty());
  CHECK(empty.noise.empty());
  CHECK_THROWS_AS(dbscan_cluster(cloud_of(pts), 0.0, 3), std::invalid_argument);
}

TEST_CASE("DBSCAN matches a quadratic reference implementation") {
  Rng gen(25);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point3> pts;
    const int blobs = 1 + static_cast<int>(gen.uniform_int(4));
    for (int b = 0; b < blobs; ++b) {
      const double cx = gen.uniform(-15.0, 15.0), cy = gen.uniform(-15.0, 15.0);
      const int m = 3 + static_cast<int>(gen.uniform_int(40));
      for (int i = 0; i < m; ++i)
        pts.push_back({cx + gen.normal(0.0, 0.4), cy + gen.normal(0.0, 0.4),
                       gen.normal(0.0, 0.2)});
    }
    for (int i = 0; i < 10; ++i)
      pts.push_back({gen.uniform(-30.0, 30.0), gen.uniform(-30.0, 30.0), 0.0});
    const PointCloud cloud = cloud_of(pts);
    const double eps = gen.uniform(0.5, 2.0);
    const int min_pts = 3 + static_cast<int>(gen.uniform_int(5));
    const DbscanResult fast = dbscan_cluster(cloud, eps, min_pts);
    const DbscanResult slow = dbscan_reference(cloud, eps, min_pts);
    // Core-point partitions are unique; border points may in principle attach
    // to different clusters, but both implementations assign them to the
    // first core that reaches them in index order, so the full partitions
    // must agree.
    CHECK(partition_of(fast) == partition_of(slow));
    std::vector<int> na = fast.noise, nb = slow.noise;
    std::sort(na.begin(), na.end());
    std::sort(nb.begin(), nb.end());
    CHECK(na == nb);
  }
}

TEST_CASE("L-shape fit recovers an axis-aligned rectangle") {
  // A 4.5 x 1.9 rectangle centered at (10, 4), yaw 0, seen from the origin:
  // the sensor looks at the rear face (x = 7.75) and the near side (y = 3.05),
  // which meet at the corner closest to the sensor.
  std::vector<Vec2> pts;
  for (int i = 0; i <= 45; ++i) pts.push_back({7.75 + 4.5 * i / 45.0, 3.05});  // near side
  for (int i = 0; i <= 19; ++i) pts.push_back({7.75, 3.05 + 1.9 * i / 19.0});  // rear face
  const DetectedVehicle d = l_shape_fit(pts, 1.0);
  CHECK(std::abs(wrap_angle(d.yaw)) < 1.5 * M_PI / 180.0);
  CHECK(d.length == Catch::Approx(4.5).margin(0.05));
  CHECK(d.width == Catch::Approx(1.9).margin(0.05));
  CHECK(d.center.x == Catch::Approx(10.0).margin(0.05));
  CHECK(d.center.y == Catch::Approx(4.0).margin(0.05));
  CHECK(d.length >= d.width);
  CHECK(d.yaw >= -M_PI / 2.0);
  CHECK(d.yaw < M_PI / 2.0);
}

TEST_CASE("L-shape fit recovers a rotated rectangle to grid resolution") {
  // Box at (12, 3), yaw 30 deg. From the origin the sensor sees the box's
  // local left face (x = -2.25) and top side (y = +0.95); sample those.
  const double alpha = 30.0 * M_PI / 180.0;
  std::vector<Vec2> pts;
  for (int i = 0; i <= 45; ++i) pts.push_back({-2.25 + 4.5 * i / 45.0, 0.95});
  for (int i = 0; i <= 19; ++i) pts.push_back({-2.25, -0.95 + 1.9 * i / 19.0});
  for (Vec2& p : pts) p = rotate(p, alpha) + Vec2{12.0, 3.0};
  const DetectedVehicle d = l_shape_fit(pts, 1.0);
  CHECK(std::abs(wrap_angle(d.yaw - alpha)) < 1.5 * M_PI / 180.0);
  CHECK(d.length == Catch::Approx(4.5).margin(0.06));
  CHECK(d.width == Catch::Approx(1.9).margin(0.06));
  CHECK((d.center - Vec2{12.0, 3.0}).norm() < 0.1);
}

TEST_CASE("L-shape fit is equivariant under rotations on its search grid") {
  // Rotating the input by an exact multiple of the angular step about the
  // origin shifts the fitted yaw by that multiple (mod pi/2) and preserves
  // the extents bit-for-bit up to numeric noise.
  std::vector<Vec2> pts;
  Rng gen(26);
  for (int i = 0; i < 80; ++i)
    pts.push_back(Vec2{gen.uniform(-2.0, 2.0), gen.uniform(-0.8, 0.8)} + Vec2{9.0, 2.0});
  const DetectedVehicle base = l_shape_fit(pts, 1.0);
  const double step = 17.0 * M_PI / 180.0;  // 17 grid steps
  std::vector<Vec2> rot;
  for (const Vec2& p : pts) rot.push_back(rotate(p, step));
  const DetectedVehicle turned = l_shape_fit(rot, 1.0);
  const double dy = wrap_angle(turned.yaw - base.yaw - step);
  const double folded = std::min({std::abs(dy), std::abs(dy - M_PI / 2.0),
                                  std::abs(dy + M_PI / 2.0), std::abs(std::abs(dy) - M_PI)});
  CHECK(folded < 1e-9);
  CHECK(std::abs(turned.length - base.length) < 1e-9);
  CHECK(std::abs(turned.width - base.width) < 1e-9);
  CHECK(std::abs(rotate(base.center, step).x - turned.center.x) < 1e-9);
  CHECK(std::abs(rotate(base.center, step).y - turned.center.y) < 1e-9);
}

TEST_CASE("L-shape fit rejects degenerate clusters") {
  CHECK_THROWS_AS(l_shape_fit({{0, 0}, {1, 1}}, 1.0), DegenerateCluster);
  CHECK_THROWS_AS(l_shape_fit({}, 1.0), DegenerateCluster);
}

TEST_CASE("rule classifier accepts car-like boxes and rejects rule violations") {
  const ClassifierConfig cfg;
  auto cand = [](double length, double width, int n) {
    DetectedVehicle d;
    d.length = length;
    d.width = width;
    d.n_points = n;
    return d;
  };
  CHECK(rule_classify(cand(4.5, 1.9, 300), cfg));
  CHECK(rule_classify(cand(4.5, 1.9, 8), cfg));          // at the point minimum
  CHECK_FALSE(rule_classify(cand(4.5, 1.9, 3), cfg));    // too few points
  CHECK_FALSE(rule_classify(cand(12.0, 3.0, 300), cfg)); // building-sized
  CHECK_FALSE(rule_classify(cand(0.2, 0.1, 300), cfg));  // below min length
  CHECK_FALSE(rule_classify(cand(4.5, 3.5, 300), cfg));  // too wide
  // Area rule alone: 7.5 x 3.0 passes length/width/ratio but 22.5 > 18 m^2.
  CHECK_FALSE(rule_classify(cand(7.5, 3.0, 300), cfg));
  // Ratio rule alone: 7 x 0.025 passes length/width/area but 0.0036 < 0.004.
  CHECK_FALSE(rule_classify(cand(7.0, 0.025, 300), cfg));
}

TEST_CASE("two clean cars in view produce two detections near truth") {
  LidarConfig lcfg;
  lcfg.range_noise_sigma = 0.0;
  lcfg.dropout_prob = 0.0;
  LidarScene scene;
  scene.boxes.push_back({{10.0, 2.0}, 0.0, 4.5, 1.9, 0.0, 1.55});
  scene.boxes.push_back({{12.0, -4.0}, 0.5, 4.5, 1.9, 0.0, 1.55});
  Rng lrng(31);
  const PointCloud cloud = scan(scene, {{0, 0}, 0.0}, lcfg, lrng);
  PerceptionConfig pcfg;
  Rng prng(32);
  const FrameDetections out = detect_frame(cloud, pcfg, prng);
  REQUIRE_FALSE(out.skipped);
  REQUIRE(out.detections.size() == 2);
  std::vector<double> d0, d1;
  for (const DetectedVehicle& d : out.detections) {
    d0.push_back((d.center - Vec2{10.0, 2.0}).norm());
    d1.push_back((d.center - Vec2{12.0, -4.0}).norm());
    CHECK(d.n_points >= 8);
  }
  CHECK(*std::min_element(d0.begin(), d0.end()) < 0.3);
  CHECK(*std::min_element(d1.begin(), d1.end()) < 0.3);
}

TEST_CASE("objects beyond the ROI are not detected") {
  LidarConfig lcfg;
  lcfg.range_noise_sigma = 0.0;
  lcfg.dropout_prob = 0.0;
  LidarScene scene;
  scene.boxes.push_back({{30.0, 0.0}, 0.0, 4.5, 1.9, 0.0, 1.55});  // outside 20 m ROI
  Rng lrng(33);
  const PointCloud cloud = scan(scene, {{0, 0}, 0.0}, lcfg, lrng);
  PerceptionConfig pcfg;
  Rng prng(34);
  const FrameDetections out = detect_frame(cloud, pcfg, prng);
  CHECK(out.detections.empty());
}

TEST_CASE("a frame with too few points is skipped, not fatal") {
  PerceptionConfig pcfg;
  Rng rng(35);
  const FrameDetections out = detect_frame(cloud_of({{1, 0, -2}, {2, 0, -2}}), pcfg, rng);
  CHECK(out.skipped);
  CHECK(out.detections.empty());
}

TEST_CASE("the detection pipeline is deterministic for a fixed stream") {
  LidarConfig lcfg;  // noisy
  LidarScene scene;
  scene.boxes.push_back({{9.0, 1.0}, 0.2, 4.5, 1.9, 0.0, 1.55});
  Rng lrng(36);
  const PointCloud cloud = scan(scene, {{0, 0}, 0.0}, lcfg, lrng);
  PerceptionConfig pcfg;
  Rng p1(37), p2(37);
  const FrameDetections a = detect_frame(cloud, pcfg, p1);
  const FrameDetections b = detect_frame(cloud, pcfg, p2);
  REQUIRE(a.detections.size() == b.detections.size());
  for (size_t i = 0; i < a.detections.size(); ++i) {
    CHECK(a.detections[i].center.x == b.detections[i].center.x);
    CHECK(a.detections[i].center.y == b.detections[i].center.y);
    CHECK(a.detections[i].yaw == b.detections[i].yaw);
    CHECK(a.detections[i].length == b.detections[i].length);
    CHECK(a.detections[i].width == b.detections[i].width);
  }
}
