#pragma once

#include <algorithm>
#include <cmath>

#include "lidarplan/planner.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/world.hpp"

namespace lidarplan {

// Maps a plan to an actuation command: speed tracking under accel/brake rate
// limits plus pure-pursuit curvature toward the target pose.
inline ControlCommand compute_control(const PlanResult& plan, double v_current,
                                      const ControlConfig& cfg, double dt) {
  double v_des = plan.speed.v_exc;
  // Come to a full stop near static obstacles instead of creeping
  // asymptotically toward them.
  if (plan.speed.speed_case == SpeedCase::Obstacle && v_des < cfg.stop_speed_threshold)
    v_des = 0.0;
  const double dv = std::clamp(v_des - v_current, -cfg.brake_limit * dt, cfg.accel_limit * dt);
  ControlCommand cmd;
  cmd.target_speed = std::max(0.0, v_current + dv);

  const Vec2 t = plan.target_pos;
  const double d2 = t.x * t.x + t.y * t.y;
  if (d2 > 1e-6 && t.x > 0.0) {
    double curvature = 2.0 * t.y / d2;
    if (cmd.target_speed > 1e-6) {
      const double max_curv = cfg.max_yaw_rate / cmd.target_speed;
      curvature = std::clamp(curvature, -max_curv, max_curv);
    }
    cmd.steer = curvature;
  }
  return cmd;
}

}  // namespace lidarplan
