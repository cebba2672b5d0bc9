#pragma once

#include <cmath>
#include <vector>

#include "lidarplan/geometry.hpp"
#include "lidarplan/rng.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/world.hpp"

namespace lidarplan {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// One frame of sensor-frame points (x forward, y left, z up, origin at the
// sensor). Intensity is constant 1.0 for every return and therefore not
// stored per point.
struct PointCloud {
  std::vector<Point3> points;
  double timestamp = 0.0;
  long frame_id = 0;
};

// An upright oriented box: BEV rectangle (center, yaw, length, width)
// extruded from z0 to z1.
struct ObbZ {
  Vec2 center;
  double yaw = 0.0;
  double length = 1.0;
  double width = 1.0;
  double z0 = 0.0;
  double z1 = 1.0;
};

struct LidarScene {
  std::vector<ObbZ> boxes;
  double ground_slope_rad = 0.0;  // ground plane z = tan(slope) * x
};

inline LidarScene make_lidar_scene(const World& world) {
  LidarScene scene;
  scene.ground_slope_rad = world.config().map.ground_slope_deg * M_PI / 180.0;
  for (const VehicleState& v : world.vehicles()) {
    if (v.kind == VehicleKind::Ego) continue;  // the sensor does not see its carrier
    scene.boxes.push_back(
        {v.position, v.yaw, v.box.length, v.box.width, v.z_base, v.z_base + v.box.height});
  }
  for (const ClutterSpec& c : world.clutter())
    scene.boxes.push_back({c.position, c.yaw, c.box.length, c.box.width, 0.0, c.box.height});
  return scene;
}

namespace lidardetail {

// Slab-method ray/box intersection in the box's own frame. Returns the
// nearest positive hit distance or a negative value on miss.
inline double ray_box(const ObbZ& b, const Vec2& origin_xy, double origin_z, const Vec2& dir_xy,
                      double dir_z) {
  const Vec2 o = rotate(origin_xy - b.center, -b.yaw);
  const Vec2 d = rotate(dir_xy, -b.yaw);
  double tmin = 0.0, tmax = 1e300;
  const double lo[3] = {-0.5 * b.length, -0.5 * b.width, b.z0};
  const double hi[3] = {0.5 * b.length, 0.5 * b.width, b.z1};
  const double ori[3] = {o.x, o.y, origin_z};
  const double dir[3] = {d.x, d.y, dir_z};
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-12) {
      if (ori[k] < lo[k] || ori[k] > hi[k]) return -1.0;
      continue;
    }
    double t1 = (lo[k] - ori[k]) / dir[k];
    double t2 = (hi[k] - ori[k]) / dir[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return -1.0;
  }
  return tmin > 1e-9 ? tmin : -1.0;
}

}  // namespace lidardetail

// Synthetic spinning-lidar frame: for every (channel, azimuth) ray the
// nearest hit among the ground plane and the scene boxes, with additive
// Gaussian range noise (clamped at 6 sigma) and Bernoulli dropout.
// Deterministic given the rng stream. Points come out in the sensor frame;
// the azimuth grid rotates with the vehicle.
inline PointCloud scan(const LidarScene& scene, const Pose2& ego_pose, const LidarConfig& cfg,
                       Rng& rng, long frame_id = 0, double timestamp = 0.0) {
  PointCloud cloud;
  cloud.frame_id = frame_id;
  cloud.timestamp = timestamp;

  const double slope = std::tan(scene.ground_slope_rad);
  const double inv_norm = 1.0 / std::sqrt(1.0 + slope * slope);
  const double ground_nx = -slope * inv_norm;
  const double ground_nz = inv_norm;

  const Vec2 origin_xy = ego_pose.position;
  const double origin_z =
      slope * ego_pose.position.x + cfg.mount_height;  // sensor rides the ground surface

  const int n_az = std::max(1, static_cast<int>(std::floor(360.0 / cfg.horizontal_resolution_deg +
                                                           1e-9)));
  const double az_step = 2.0 * M_PI / n_az;
  const int n_ch = cfg.channels;
  const double el_min = cfg.vertical_fov_min_deg * M_PI / 180.0;
  const double el_max = cfg.vertical_fov_max_deg * M_PI / 180.0;
  const double el_step = n_ch > 1 ? (el_max - el_min) / (n_ch - 1) : 0.0;

  // Azimuth window per box so each ray only tests boxes it can plausibly hit.
  struct BoxWindow {
    double az_center;
    double az_half;
    bool skip;
  };
  std::vector<BoxWindow> windows(scene.boxes.size());
  for (size_t b = 0; b < scene.boxes.size(); ++b) {
    const ObbZ& box = scene.boxes[b];
    const Vec2 rel = box.center - origin_xy;
    const double dist = rel.norm();
    const double radius = 0.5 * std::hypot(box.length, box.width);
    BoxWindow w{0.0, M_PI, false};
    if (dist - radius > cfg.max_range) {
      w.skip = true;
    } else if (dist > radius) {
      w.az_center = wrap_angle(std::atan2(rel.y, rel.x) - ego_pose.yaw);
      w.az_half = std::asin(std::min(1.0, radius / dist)) + 2.0 * az_step;
    }
    windows[b] = w;
  }

  std::vector<double> cos_el(n_ch), sin_el(n_ch);
  for (int i = 0; i < n_ch; ++i) {
    const double el = el_min + i * el_step;
    cos_el[i] = std::cos(el);
    sin_el[i] = std::sin(el);
  }

  const double noise_clamp = 6.0 * cfg.range_noise_sigma;
  std::vector<size_t> candidates;
  candidates.reserve(scene.boxes.size());

  for (int j = 0; j < n_az; ++j) {
    const double az = j * az_step;
    const double az_wrapped = wrap_angle(az);
    candidates.clear();
    for (size_t b = 0; b < windows.size(); ++b) {
      if (windows[b].skip) continue;
      const double diff = std::abs(wrap_angle(az_wrapped - windows[b].az_center));
      if (diff <= windows[b].az_half) candidates.push_back(b);
    }
    const double psi = ego_pose.yaw + az;
    const double cos_psi = std::cos(psi), sin_psi = std::sin(psi);
    const double cos_az = std::cos(az), sin_az = std::sin(az);

    for (int i = 0; i < n_ch; ++i) {
      const Vec2 dir_xy{cos_el[i] * cos_psi, cos_el[i] * sin_psi};
      const double dir_z = sin_el[i];

      double t_hit = cfg.max_range + 1.0;
      // Ground: n . (o + t d) = 0 with n = (ground_nx, 0, ground_nz).
      const double denom = ground_nx * dir_xy.x + ground_nz * dir_z;
      if (denom < -1e-12) {
        const double t = -(ground_nx * origin_xy.x + ground_nz * origin_z) / denom;
        if (t > 1e-9 && t < t_hit) t_hit = t;
      }
      for (size_t b : candidates) {
        const double t = lidardetail::ray_box(scene.boxes[b], origin_xy, origin_z, dir_xy, dir_z);
        if (t > 0.0 && t < t_hit) t_hit = t;
      }
      if (t_hit > cfg.max_range) continue;

      double range = t_hit;
      if (cfg.range_noise_sigma > 0.0) {
        const double n = std::clamp(rng.normal(0.0, cfg.range_noise_sigma), -noise_clamp,
                                    noise_clamp);
        range = std::max(1e-3, range + n);
      }
      if (cfg.dropout_prob > 0.0 && rng.bernoulli(cfg.dropout_prob)) continue;

      cloud.points.push_back(
          {range * cos_el[i] * cos_az, range * cos_el[i] * sin_az, range * sin_el[i]});
    }
  }
  return cloud;
}

}  // namespace lidarplan
