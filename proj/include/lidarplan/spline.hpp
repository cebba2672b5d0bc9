#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lidarplan/geometry.hpp"

namespace lidarplan {

// Resampled local path: points evaluated on a fixed arc-length grid of the
// chord-length-parameterized spline, plus the grid itself.
struct EgoTrajectory {
  std::vector<Vec2> points;
  std::vector<double> cum_arc;
  bool passthrough = false;  // < 3 distinct waypoints: raw polyline returned as-is
};

namespace spline_detail {

inline int find_span(const std::vector<double>& knots, int n_ctrl, double u) {
  constexpr int p = 2;
  if (u >= knots[n_ctrl]) return n_ctrl - 1;
  if (u <= knots[p]) return p;
  int lo = p, hi = n_ctrl, mid = (lo + hi) / 2;
  while (u < knots[mid] || u >= knots[mid + 1]) {
    if (u < knots[mid])
      hi = mid;
    else
      lo = mid;
    mid = (lo + hi) / 2;
  }
  return mid;
}

// Nonzero quadratic basis functions N[r] for control indices span-2+r.
inline std::array<double, 3> basis_funs(const std::vector<double>& knots, int span, double u) {
  std::array<double, 3> N{1.0, 0.0, 0.0};
  double left[3] = {0.0, 0.0, 0.0};
  double right[3] = {0.0, 0.0, 0.0};
  for (int j = 1; j <= 2; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  return N;
}

}  // namespace spline_detail

// Clamped quadratic spline through the waypoints, with x and y fitted
// independently against the cumulative Euclidean chord length. Knots follow
// the parameter-averaging rule, which keeps the collocation system
// nonsingular for strictly increasing parameters.
class QuadSpline {
 public:
  QuadSpline(const std::vector<Vec2>& waypoints, const std::vector<double>& params) {
    const int n = static_cast<int>(waypoints.size());
    if (n < 3) throw std::invalid_argument("QuadSpline needs at least 3 waypoints");
    params_ = params;
    knots_.assign(3, params.front());
    for (int j = 1; j <= n - 3; ++j) knots_.push_back(0.5 * (params[j] + params[j + 1]));
    for (int k = 0; k < 3; ++k) knots_.push_back(params.back());

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd bx(n), by(n);
    for (int k = 0; k < n; ++k) {
      const int span = spline_detail::find_span(knots_, n, params[k]);
      const auto N = spline_detail::basis_funs(knots_, span, params[k]);
      for (int r = 0; r < 3; ++r) A(k, span - 2 + r) = N[r];
      bx(k) = waypoints[k].x;
      by(k) = waypoints[k].y;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    cx_ = lu.solve(bx);
    cy_ = lu.solve(by);
  }

  Vec2 eval(double s) const {
    const int n = static_cast<int>(cx_.size());
    s = std::clamp(s, params_.front(), params_.back());
    const int span = spline_detail::find_span(knots_, n, s);
    const auto N = spline_detail::basis_funs(knots_, span, s);
    Vec2 out{0.0, 0.0};
    for (int r = 0; r < 3; ++r) {
      out.x += N[r] * cx_(span - 2 + r);
      out.y += N[r] * cy_(span - 2 + r);
    }
    return out;
  }

  double total_length_param() const { return params_.back(); }

 private:
  std::vector<double> knots_;
  std::vector<double> params_;
  Eigen::VectorXd cx_, cy_;
};

inline std::vector<Vec2> dedup_waypoints(const std::vector<Vec2>& wps) {
  std::vector<Vec2> out;
  out.reserve(wps.size());
  for (const Vec2& p : wps)
    if (out.empty() || (p - out.back()).norm() > 1e-9) out.push_back(p);
  return out;
}

// Smooths the waypoint polyline with independent quadratic splines in x and y
// over the chord-length axis and evaluates them every t_s meters (plus the
// final endpoint). Fewer than 3 distinct waypoints fall through unchanged
// with the passthrough flag set.
inline EgoTrajectory bspline_resample(const std::vector<Vec2>& waypoints, double t_s) {
  EgoTrajectory traj;
  const std::vector<Vec2> wps = dedup_waypoints(waypoints);
  if (wps.size() < 3) {
    traj.points = wps;
    traj.cum_arc.resize(wps.size(), 0.0);
    for (size_t i = 1; i < wps.size(); ++i)
      traj.cum_arc[i] = traj.cum_arc[i - 1] + (wps[i] - wps[i - 1]).norm();
    traj.passthrough = true;
    return traj;
  }
  std::vector<double> params(wps.size(), 0.0);
  for (size_t i = 1; i < wps.size(); ++i)
    params[i] = params[i - 1] + (wps[i] - wps[i - 1]).norm();

  const QuadSpline spline(wps, params);
  const double total = params.back();
  for (double s = 0.0;; s += t_s) {
    if (s > total + 1e-9) break;
    const double sc = std::min(s, total);
    traj.points.push_back(spline.eval(sc));
    traj.cum_arc.push_back(sc);
  }
  if (traj.cum_arc.empty() || traj.cum_arc.back() < total - 1e-9) {
    traj.points.push_back(spline.eval(total));
    traj.cum_arc.push_back(total);
  }
  return traj;
}

}  // namespace lidarplan
