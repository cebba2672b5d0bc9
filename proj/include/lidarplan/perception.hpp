#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lidarplan/geometry.hpp"
#include "lidarplan/lidar.hpp"
#include "lidarplan/rng.hpp"
#include "lidarplan/scenario.hpp"

namespace lidarplan {

struct DegenerateCloud : std::runtime_error {
  explicit DegenerateCloud(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateCluster : std::runtime_error {
  explicit DegenerateCluster(const std::string& msg) : std::runtime_error(msg) {}
};

struct DetectedVehicle {
  Vec2 center;  // ego frame
  double yaw = 0.0;  // [-pi/2, pi/2), defined modulo rectangle symmetry
  double length = 0.0;
  double width = 0.0;
  std::array<Vec2, 4> corners{};
  int n_points = 0;
  long frame_id = 0;
};

struct GroundPlane {
  double a = 0.0, b = 0.0, c = 1.0, d = 0.0;  // ax + by + cz + d = 0, |n| = 1, c > 0
};

struct RansacResult {
  PointCloud ground;
  PointCloud nonground;
  GroundPlane plane;
};

struct DbscanResult {
  std::vector<std::vector<int>> clusters;  // point indices per cluster
  std::vector<int> noise;
};

struct StageTimesUs {
  double crop = 0.0;
  double voxel = 0.0;
  double ransac = 0.0;
  double dbscan = 0.0;
  double fit = 0.0;
  double total() const { return crop + voxel + ransac + dbscan + fit; }
};

struct FrameDetections {
  std::vector<DetectedVehicle> detections;
  bool skipped = false;  // set when ground segmentation failed and the frame was dropped
  StageTimesUs stage_us;
};

// Keeps exactly the points with BEV radius <= roi_radius, order preserved.
inline PointCloud crop_roi(const PointCloud& cloud, double roi_radius) {
  PointCloud out;
  out.timestamp = cloud.timestamp;
  out.frame_id = cloud.frame_id;
  const double r2 = roi_radius * roi_radius;
  out.points.reserve(cloud.points.size());
  for (const Point3& p : cloud.points)
    if (p.x * p.x + p.y * p.y <= r2) out.points.push_back(p);
  return out;
}

namespace percdetail {
inline int64_t cell_key(int ix, int iy, int iz) {
  return ((static_cast<int64_t>(ix) + (1 << 20)) << 42) |
         ((static_cast<int64_t>(iy) + (1 << 20)) << 21) |
         (static_cast<int64_t>(iz) + (1 << 20));
}
}  // namespace percdetail

// One point per occupied voxel: the centroid of the voxel's points. Output
// voxels appear in first-seen order, which keeps the result deterministic.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_downsample: voxel_size must be > 0");
  PointCloud out;
  out.timestamp = cloud.timestamp;
  out.frame_id = cloud.frame_id;
  struct Accum {
    double x = 0.0, y = 0.0, z = 0.0;
    int n = 0;
  };
  std::unordered_map<int64_t, size_t> index;
  index.reserve(cloud.points.size());
  std::vector<Accum> accums;
  accums.reserve(cloud.points.size());
  const double inv = 1.0 / voxel_size;
  for (const Point3& p : cloud.points) {
    const int ix = static_cast<int>(std::floor(p.x * inv));
    const int iy = static_cast<int>(std::floor(p.y * inv));
    const int iz = static_cast<int>(std::floor(p.z * inv));
    const int64_t key = percdetail::cell_key(ix, iy, iz);
    auto [it, fresh] = index.try_emplace(key, accums.size());
    if (fresh) accums.push_back({});
    Accum& a = accums[it->second];
    a.x += p.x;
    a.y += p.y;
    a.z += p.z;
    ++a.n;
  }
  out.points.reserve(accums.size());
  for (const Accum& a : accums) out.points.push_back({a.x / a.n, a.y / a.n, a.z / a.n});
  return out;
}

// RANSAC plane fit with PCA refinement of the best consensus set. The
// returned plane is normalized with c > 0; inliers (within
// distance_threshold) are the ground, everything else nonground.
inline RansacResult ransac_ground(const PointCloud& cloud, const RansacConfig& cfg, Rng& rng) {
  const size_t n = cloud.points.size();
  if (n < 3) throw DegenerateCloud("ransac_ground: need at least 3 points, got " +
                                   std::to_string(n));

  auto count_inliers = [&](double a, double b, double c, double d) {
    size_t count = 0;
    for (const Point3& p : cloud.points)
      if (std::abs(a * p.x + b * p.y + c * p.z + d) <= cfg.distance_threshold) ++count;
    return count;
  };

  double best[4] = {0.0, 0.0, 1.0, 0.0};
  size_t best_count = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Point3& p0 = cloud.points[rng.uniform_int(n)];
    const Point3& p1 = cloud.points[rng.uniform_int(n)];
    const Point3& p2 = cloud.points[rng.uniform_int(n)];
    const double ux = p1.x - p0.x, uy = p1.y - p0.y, uz = p1.z - p0.z;
    const double vx = p2.x - p0.x, vy = p2.y - p0.y, vz = p2.z - p0.z;
    double a = uy * vz - uz * vy;
    double b = uz * vx - ux * vz;
    double c = ux * vy - uy * vx;
    const double norm = std::sqrt(a * a + b * b + c * c);
    if (norm < 1e-12) continue;
    a /= norm;
    b /= norm;
    c /= norm;
    const double d = -(a * p0.x + b * p0.y + c * p0.z);
    const size_t count = count_inliers(a, b, c, d);
    if (count > best_count) {
      best_count = count;
      best[0] = a;
      best[1] = b;
      best[2] = c;
      best[3] = d;
      if (best_count > 0.9 * n) break;
    }
  }
  if (best_count < static_cast<size_t>(cfg.min_inlier_fraction * n) || best_count < 3)
    throw DegenerateCloud("ransac_ground: no plane reached the inlier fraction");

  // PCA refinement on the consensus set, kept only if it does not lose
  // inliers.
  {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    std::vector<const Point3*> inliers;
    inliers.reserve(best_count);
    for (const Point3& p : cloud.points)
      if (std::abs(best[0] * p.x + best[1] * p.y + best[2] * p.z + best[3]) <=
          cfg.distance_threshold) {
        inliers.push_back(&p);
        centroid += Eigen::Vector3d(p.x, p.y, p.z);
      }
    centroid /= static_cast<double>(inliers.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Point3* p : inliers) {
      const Eigen::Vector3d q(p->x - centroid.x(), p->y - centroid.y(), p->z - centroid.z());
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d normal = eig.eigenvectors().col(0);
    const double d = -normal.dot(centroid);
    const size_t count = count_inliers(normal.x(), normal.y(), normal.z(), d);
    if (count >= best_count) {
      best[0] = normal.x();
      best[1] = normal.y();
      best[2] = normal.z();
      best[3] = d;
    }
  }

  if (best[2] < 0.0)
    for (double& v : best) v = -v;

  RansacResult res;
  res.plane = {best[0], best[1], best[2], best[3]};
  res.ground.timestamp = res.nonground.timestamp = cloud.timestamp;
  res.ground.frame_id = res.nonground.frame_id = cloud.frame_id;
  for (const Point3& p : cloud.points) {
    const double dist = std::abs(best[0] * p.x + best[1] * p.y + best[2] * p.z + best[3]);
    (dist <= cfg.distance_threshold ? res.ground : res.nonground).points.push_back(p);
  }
  return res;
}

// Standard DBSCAN on 3D Euclidean distance, grid-accelerated. Border points
// are claimed by the first-discovered core point's cluster (deterministic:
// points are visited in index order).
inline DbscanResult dbscan_cluster(const PointCloud& cloud, double epsilon, int min_points) {
  if (!(epsilon > 0.0) || min_points < 1)
    throw std::invalid_argument("dbscan_cluster: parameters must be positive");
  const int n = static_cast<int>(cloud.points.size());
  DbscanResult res;
  if (n == 0) return res;

  std::unordered_map<int64_t, std::vector<int>> grid;
  grid.reserve(static_cast<size_t>(n));
  const double inv = 1.0 / epsilon;
  auto cell_of = [&](const Point3& p) {
    return percdetail::cell_key(static_cast<int>(std::floor(p.x * inv)),
                                static_cast<int>(std::floor(p.y * inv)),
                                static_cast<int>(std::floor(p.z * inv)));
  };
  for (int i = 0; i < n; ++i) grid[cell_of(cloud.points[i])].push_back(i);

  const double eps2 = epsilon * epsilon;
  std::vector<int> neighbors;
  auto query = [&](int i) {
    neighbors.clear();
    const Point3& p = cloud.points[i];
    const int cx = static_cast<int>(std::floor(p.x * inv));
    const int cy = static_cast<int>(std::floor(p.y * inv));
    const int cz = static_cast<int>(std::floor(p.z * inv));
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(percdetail::cell_key(cx + dx, cy + dy, cz + dz));
          if (it == grid.end()) continue;
          for (int k : it->second) {
            const Point3& q = cloud.points[k];
            const double ddx = p.x - q.x, ddy = p.y - q.y, ddz = p.z - q.z;
            if (ddx * ddx + ddy * ddy + ddz * ddz <= eps2) neighbors.push_back(k);
          }
        }
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  for (int i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    query(i);
    if (static_cast<int>(neighbors.size()) < min_points) {
      label[i] = kNoise;
      continue;
    }
    const int cluster_id = static_cast<int>(res.clusters.size());
    res.clusters.emplace_back();
    label[i] = cluster_id;
    res.clusters.back().push_back(i);
    std::vector<int> frontier = neighbors;
    for (size_t f = 0; f < frontier.size(); ++f) {
      const int q = frontier[f];
      if (label[q] == kNoise) {
        label[q] = cluster_id;  // border point adopted by this cluster
        res.clusters.back().push_back(q);
        continue;
      }
      if (label[q] != kUnvisited) continue;
      label[q] = cluster_id;
      res.clusters.back().push_back(q);
      query(q);
      if (static_cast<int>(neighbors.size()) >= min_points)
        frontier.insert(frontier.end(), neighbors.begin(), neighbors.end());
    }
  }
  for (int i = 0; i < n; ++i)
    if (label[i] == kNoise) res.noise.push_back(i);
  return res;
}

// Search-based L-shape rectangle fit on the BEV convex hull. Headings in
// [0, 90) degrees are scored by the summed squared distance of each hull
// vertex to the nearer of the two rectangle edges that meet at the corner
// closest to the sensor; the tight bounding rectangle in the best heading
// frame is returned with yaw normalized so length >= width.
inline DetectedVehicle l_shape_fit(const std::vector<Vec2>& bev_points, double step_deg = 1.0) {
  const std::vector<Vec2> hull = convex_hull(bev_points);
  if (hull.size() < 3)
    throw DegenerateCluster("l_shape_fit: hull has " + std::to_string(hull.size()) +
                            " vertices, need 3");
  double best_theta = 0.0;
  double best_score = 1e300;
  for (double deg = 0.0; deg < 90.0; deg += step_deg) {
    const double theta = deg * M_PI / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
    for (const Vec2& p : bev_points) {
      const double rx = c * p.x + s * p.y;   // rotate by -theta
      const double ry = -s * p.x + c * p.y;
      minx = std::min(minx, rx);
      maxx = std::max(maxx, rx);
      miny = std::min(miny, ry);
      maxy = std::max(maxy, ry);
    }
    // Anchor corner: bounding-rectangle corner nearest the sensor origin.
    double ax = (minx * minx < maxx * maxx) ? minx : maxx;
    double ay = (miny * miny < maxy * maxy) ? miny : maxy;
    // Closeness score over every point: the dense visible faces should hug
    // the two rectangle edges meeting at the anchor corner.
    double score = 0.0;
    for (const Vec2& p : bev_points) {
      const double rx = c * p.x + s * p.y;
      const double ry = -s * p.x + c * p.y;
      const double d1 = rx - ax, d2 = ry - ay;
      score += std::min(d1 * d1, d2 * d2);
    }
    if (score < best_score) {
      best_score = score;
      best_theta = theta;
    }
  }

  const double c = std::cos(best_theta), s = std::sin(best_theta);
  double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
  for (const Vec2& p : bev_points) {
    const double rx = c * p.x + s * p.y;
    const double ry = -s * p.x + c * p.y;
    minx = std::min(minx, rx);
    maxx = std::max(maxx, rx);
    miny = std::min(miny, ry);
    maxy = std::max(maxy, ry);
  }
  DetectedVehicle det;
  const Vec2 center_rot{(minx + maxx) / 2.0, (miny + maxy) / 2.0};
  det.center = rotate(center_rot, best_theta);
  const double dx = maxx - minx, dy = maxy - miny;
  if (dx >= dy) {
    det.length = dx;
    det.width = dy;
    det.yaw = best_theta;
  } else {
    det.length = dy;
    det.width = dx;
    det.yaw = best_theta + M_PI / 2.0;
  }
  if (det.yaw >= M_PI / 2.0) det.yaw -= M_PI;  // normalize to [-pi/2, pi/2)
  det.corners = rect_corners(det.center, det.yaw, det.length, det.width);
  det.n_points = static_cast<int>(bev_points.size());
  return det;
}

// Pure conjunction of the per-candidate rules.
inline bool rule_classify(const DetectedVehicle& cand, const ClassifierConfig& cfg) {
  const double area = cand.length * cand.width;
  const double ratio = cand.length > 0.0 ? cand.width / cand.length : 0.0;
  return cand.n_points >= cfg.min_points && cand.n_points <= cfg.max_points &&
         cand.width >= cfg.min_width && cand.width <= cfg.max_width &&
         cand.length >= cfg.min_length && cand.length <= cfg.max_length &&
         area >= cfg.min_area && area <= cfg.max_area && ratio >= cfg.min_ratio &&
         ratio <= cfg.max_ratio;
}

// Full per-frame stack: crop -> voxel -> ground removal -> clustering ->
// per-cluster L-shape fit + rule classification. Ground-segmentation failure
// drops the frame (skipped flag) instead of raising; the tracker coasts on
// prediction for such frames.
inline FrameDetections detect_frame(const PointCloud& cloud, const PerceptionConfig& cfg,
                                    Rng& rng) {
  using clock = std::chrono::steady_clock;
  auto us_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::micro>(clock::now() - t0).count();
  };
  FrameDetections out;

  auto t0 = clock::now();
  const PointCloud roi = crop_roi(cloud, cfg.roi_radius);
  out.stage_us.crop = us_since(t0);

  t0 = clock::now();
  const PointCloud down = voxel_downsample(roi, cfg.voxel_size);
  out.stage_us.voxel = us_since(t0);

  t0 = clock::now();
  RansacResult ground;
  try {
    ground = ransac_ground(down, cfg.ransac, rng);
  } catch (const DegenerateCloud&) {
    out.skipped = true;
    out.stage_us.ransac = us_since(t0);
    return out;
  }
  out.stage_us.ransac = us_since(t0);

  t0 = clock::now();
  const DbscanResult clusters =
      dbscan_cluster(ground.nonground, cfg.dbscan.epsilon, cfg.dbscan.min_points);
  out.stage_us.dbscan = us_since(t0);

  t0 = clock::now();
  std::vector<Vec2> bev;
  for (const std::vector<int>& cluster : clusters.clusters) {
    bev.clear();
    bev.reserve(cluster.size());
    for (int i : cluster) bev.push_back({ground.nonground.points[i].x, ground.nonground.points[i].y});
    DetectedVehicle det;
    try {
      det = l_shape_fit(bev, cfg.lshape_step_deg);
    } catch (const DegenerateCluster&) {
      continue;
    }
    det.frame_id = cloud.frame_id;
    if (rule_classify(det, cfg.classifier)) out.detections.push_back(det);
  }
  out.stage_us.fit = us_since(t0);
  return out;
}

}  // namespace lidarplan
