#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "lidarplan/geometry.hpp"
#include "lidarplan/hungarian.hpp"
#include "lidarplan/perception.hpp"
#include "lidarplan/scenario.hpp"
#include "lidarplan/ukf.hpp"

namespace lidarplan {

// Ego motion between two consecutive frames as consumed by the observation
// compensation equations: theta_ego is the frame rotation angle, v_ego * dt
// the distance travelled.
struct EgoMotion {
  double theta_ego = 0.0;
  double v_ego = 0.0;
  double dt = 0.05;
};

// Maps one previous-frame observation into the current frame:
//   out = R(theta) * p + (dx, dy),  dx = -sin(theta) * d,  dy = -cos(theta) * d,
//   d = v_ego * dt.
// The convention is exact for a frame whose forward axis is +y. For the
// planner's x-forward frame the tracker rotates into this convention (see
// Tracker); theta_ego is the negated per-tick heading change.
inline Vec2 compensate_point(const Vec2& p, const EgoMotion& ego) {
  const double d = ego.v_ego * ego.dt;
  const double dx = -std::sin(ego.theta_ego) * d;
  const double dy = -std::cos(ego.theta_ego) * d;
  return rotate(p, ego.theta_ego) + Vec2{dx, dy};
}

inline std::vector<Vec2> compensate_ego_motion(const std::vector<Vec2>& prev_points,
                                               const EgoMotion& ego) {
  std::vector<Vec2> out;
  out.reserve(prev_points.size());
  for (const Vec2& p : prev_points) out.push_back(compensate_point(p, ego));
  return out;
}

// ---------------------------------------------------------------------------
// CTRV process model.

inline VecN<5> ctrv_step(const VecN<5>& s, double dt) {
  // state: x, y, yaw, v, yaw_rate
  VecN<5> out = s;
  const double yaw = s(2), v = s(3), w = s(4);
  if (std::abs(w) > 1e-5) {
    out(0) += v / w * (std::sin(yaw + w * dt) - std::sin(yaw));
    out(1) += v / w * (-std::cos(yaw + w * dt) + std::cos(yaw));
  } else {
    out(0) += v * std::cos(yaw) * dt;
    out(1) += v * std::sin(yaw) * dt;
  }
  out(2) = wrap_angle(yaw + w * dt);
  return out;
}

inline MatN<5> ctrv_process_noise(double yaw, double dt, double sigma_accel,
                                  double sigma_yaw_accel) {
  Eigen::Matrix<double, 5, 2> G = Eigen::Matrix<double, 5, 2>::Zero();
  G(0, 0) = 0.5 * dt * dt * std::cos(yaw);
  G(1, 0) = 0.5 * dt * dt * std::sin(yaw);
  G(3, 0) = dt;
  G(2, 1) = 0.5 * dt * dt;
  G(4, 1) = dt;
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  S(0, 0) = sigma_accel * sigma_accel;
  S(1, 1) = sigma_yaw_accel * sigma_yaw_accel;
  return G * S * G.transpose();
}

inline constexpr std::array<bool, 5> kCtrvAngular{false, false, true, false, false};

inline Gaussian<5> ukf_predict_ctrv(const Gaussian<5>& g, double dt, double sigma_accel,
                                    double sigma_yaw_accel) {
  return unscented_predict<5>(
      g, [dt](const VecN<5>& s) { return ctrv_step(s, dt); },
      ctrv_process_noise(g.mean(2), dt, sigma_accel, sigma_yaw_accel), kCtrvAngular);
}

// Position + yaw measurement update.
inline Gaussian<5> ukf_update_pose(const Gaussian<5>& g, const Vec2& z_xy, double z_yaw,
                                   double sigma_xy, double sigma_yaw,
                                   UpdateDiagnostics<3>* diag = nullptr) {
  VecN<3> z;
  z << z_xy.x, z_xy.y, z_yaw;
  MatN<3> R = MatN<3>::Zero();
  R(0, 0) = R(1, 1) = sigma_xy * sigma_xy;
  R(2, 2) = sigma_yaw * sigma_yaw;
  return unscented_update<5, 3>(
      g,
      [](const VecN<5>& s) {
        VecN<3> h;
        h << s(0), s(1), s(2);
        return h;
      },
      z, R, kCtrvAngular, {false, false, true}, diag);
}

inline Gaussian<5> ukf_update_speed(const Gaussian<5>& g, double v, double sigma_v) {
  VecN<1> z;
  z << v;
  MatN<1> R;
  R << sigma_v * sigma_v;
  return unscented_update<5, 1>(
      g,
      [](const VecN<5>& s) {
        VecN<1> h;
        h << s(3);
        return h;
      },
      z, R, kCtrvAngular, {false});
}

inline Gaussian<5> ukf_update_heading(const Gaussian<5>& g, double yaw, double sigma_yaw) {
  VecN<1> z;
  z << yaw;
  MatN<1> R;
  R << sigma_yaw * sigma_yaw;
  return unscented_update<5, 1>(
      g,
      [](const VecN<5>& s) {
        VecN<1> h;
        h << s(2);
        return h;
      },
      z, R, kCtrvAngular, {true});
}

// ---------------------------------------------------------------------------
// Association.

struct AssocResult {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

// Global nearest neighbor: optimal one-to-one assignment minimizing total
// Euclidean distance, pairs beyond the gate forbidden.
inline AssocResult gnn_associate(const std::vector<Vec2>& tracks, const std::vector<Vec2>& dets,
                                 double gate) {
  AssocResult res;
  if (tracks.empty() || dets.empty()) {
    for (size_t i = 0; i < tracks.size(); ++i) res.unmatched_tracks.push_back(static_cast<int>(i));
    for (size_t j = 0; j < dets.size(); ++j)
      res.unmatched_detections.push_back(static_cast<int>(j));
    return res;
  }
  constexpr double kForbidden = 1e9;
  std::vector<std::vector<double>> cost(tracks.size(), std::vector<double>(dets.size()));
  for (size_t i = 0; i < tracks.size(); ++i)
    for (size_t j = 0; j < dets.size(); ++j) {
      const double d = (tracks[i] - dets[j]).norm();
      cost[i][j] = d <= gate ? d : kForbidden;
    }
  const std::vector<int> assign = hungarian_solve(cost);
  std::vector<char> det_used(dets.size(), false);
  for (size_t i = 0; i < tracks.size(); ++i) {
    const int j = assign[i];
    if (j >= 0 && cost[i][j] < kForbidden) {
      res.matches.emplace_back(static_cast<int>(i), j);
      det_used[j] = true;
    } else {
      res.unmatched_tracks.push_back(static_cast<int>(i));
    }
  }
  for (size_t j = 0; j < dets.size(); ++j)
    if (!det_used[j]) res.unmatched_detections.push_back(static_cast<int>(j));
  return res;
}

// ---------------------------------------------------------------------------
// Velocity estimation from compensated history (the free-standing form used
// by tests; the tracker applies the same math incrementally).

struct VelocityEstimate {
  double speed = 0.0;
  double yaw = 0.0;
  bool is_static = true;
  bool insufficient_history = false;
};

// positions[i] is the observed center in the ego frame of frame i; motions[i]
// maps frame i-1 coordinates into frame i (so motions.size() ==
// positions.size() - 1). All positions are rolled forward into the last frame
// and the velocity is the first-to-last finite difference.
inline VelocityEstimate estimate_velocity(const std::vector<Vec2>& positions,
                                          const std::vector<EgoMotion>& motions, double dt,
                                          double static_threshold) {
  VelocityEstimate est;
  if (positions.size() < 2 || motions.size() + 1 != positions.size() || !(dt > 0.0)) {
    est.insufficient_history = true;
    return est;
  }
  std::vector<Vec2> current(positions);
  for (size_t m = 0; m < motions.size(); ++m)
    for (size_t i = 0; i <= m; ++i) current[i] = compensate_point(current[i], motions[m]);
  const Vec2 disp = current.back() - current.front();
  const double span = dt * static_cast<double>(positions.size() - 1);
  est.speed = disp.norm() / span;
  est.yaw = std::atan2(disp.y, disp.x);
  est.is_static = est.speed < static_threshold;
  return est;
}

// ---------------------------------------------------------------------------
// Tracker.

enum class TrackStatus { Tentative, Confirmed, Dead };

struct TrackSnapshot {
  int id = 0;
  TrackStatus status = TrackStatus::Tentative;
  Vec2 position;       // ego frame, x forward
  double yaw = 0.0;    // ego frame
  double speed = 0.0;  // >= 0
  double yaw_rate = 0.0;
  double length = 0.0;  // smoothed extent
  double width = 0.0;
  Vec2 rep_center;  // aligned box reported downstream (planner + metrics)
  double rep_yaw = 0.0;
  double rep_length = 0.0;
  double rep_width = 0.0;
  double rep_speed = 0.0;  // 0 when labeled static
  bool is_static = true;
  std::array<double, 5> cov_diag{};
  int hits = 0;
  int misses = 0;
  bool updated_this_frame = false;
};

// Multi-vehicle tracking-by-detection. Internally everything lives in the
// "compensation frame": the ego frame rotated so the heading axis is +y,
// which is the convention the observation-compensation equations assume.
// Inputs and snapshots use the planner's x-forward ego frame.
class Tracker {
 public:
  explicit Tracker(const TrackerConfig& cfg, double dt) : cfg_(cfg), dt_(dt) {}

  // One perception frame. Detections are in the current ego frame;
  // ego_motion describes the frame change since the previous call
  // (theta_ego = negated heading change, v_ego = distance / dt).
  void update(const std::vector<DetectedVehicle>& detections, const EgoMotion& ego_motion) {
    compensate_tracks(ego_motion);
    for (TrackState& t : tracks_) predict_track(t);

    std::vector<Vec2> det_pos(detections.size());
    for (size_t j = 0; j < detections.size(); ++j) det_pos[j] = to_comp(detections[j].center);
    std::vector<Vec2> track_pos(tracks_.size());
    for (size_t i = 0; i < tracks_.size(); ++i)
      track_pos[i] = {tracks_[i].state.mean(0), tracks_[i].state.mean(1)};

    const AssocResult assoc = gnn_associate(track_pos, det_pos, cfg_.gate);

    det_track_ids_.assign(detections.size(), -1);
    for (const auto& [ti, dj] : assoc.matches) {
      update_track(tracks_[ti], detections[dj], det_pos[dj]);
      det_track_ids_[dj] = tracks_[ti].id;
    }
    for (int ti : assoc.unmatched_tracks) miss_track(tracks_[ti]);
    for (int dj : assoc.unmatched_detections)
      det_track_ids_[dj] = spawn_track(detections[dj], det_pos[dj]);

    tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                                 [](const TrackState& t) { return t.status == TrackStatus::Dead; }),
                  tracks_.end());
  }

  std::vector<TrackSnapshot> snapshot() const {
    std::vector<TrackSnapshot> out;
    out.reserve(tracks_.size());
    for (const TrackState& t : tracks_) {
      TrackSnapshot s;
      s.id = t.id;
      s.status = t.status;
      s.position = from_comp({t.state.mean(0), t.state.mean(1)});
      s.yaw = from_comp_angle(t.state.mean(2));
      s.speed = std::abs(t.state.mean(3));
      s.yaw_rate = t.state.mean(4);
      s.length = t.length;
      s.width = t.width;
      s.is_static = s.speed < cfg_.static_speed_threshold;
      s.rep_speed = s.is_static ? 0.0 : s.speed;
      const Vec2 rep_c = Vec2{t.state.mean(0), t.state.mean(1)} + t.rep_offset;
      s.rep_center = from_comp(rep_c);
      s.rep_yaw = from_comp_angle(s.is_static ? t.static_yaw : t.state.mean(2));
      s.rep_length = t.length;
      s.rep_width = t.width;
      for (int k = 0; k < 5; ++k) s.cov_diag[k] = t.state.cov(k, k);
      s.hits = t.hits;
      s.misses = t.misses;
      s.updated_this_frame = t.updated_this_frame;
      out.push_back(s);
    }
    return out;
  }

  // Track id of the detection at the given index of the last update's
  // detection list, or -1. Used to join detections to tracks in the trace.
  int track_id_for_detection(size_t det_index) const {
    return det_index < det_track_ids_.size() ? det_track_ids_[det_index] : -1;
  }

 private:
  struct TrackState {
    int id = 0;
    TrackStatus status = TrackStatus::Tentative;
    Gaussian<5> state;  // comp frame
    double length = 0.0, width = 0.0;
    double static_yaw = 0.0;   // smoothed L-shape heading, comp frame (mod pi)
    double sy_c = 1.0, sy_s = 0.0;  // running (cos 2a, sin 2a) for static_yaw
    Vec2 rep_offset;           // state center -> aligned box center, comp frame
    int hits = 0, misses = 0, consec_misses = 0;
    std::deque<bool> window;  // last confirm_window hit/miss outcomes
    struct FdEntry {
      Vec2 pos;  // compensated into the current frame every tick
      int age = 0;
    };
    std::deque<FdEntry> fd;
    bool updated_this_frame = false;
  };

  static Vec2 to_comp(const Vec2& p) { return {-p.y, p.x}; }
  static Vec2 from_comp(const Vec2& p) { return {p.y, -p.x}; }
  static double to_comp_angle(double a) { return wrap_angle(a + M_PI / 2.0); }
  static double from_comp_angle(double a) { return wrap_angle(a - M_PI / 2.0); }

  void compensate_tracks(const EgoMotion& ego) {
    const double theta = ego.theta_ego;
    const double c = std::cos(theta), s = std::sin(theta);
    for (TrackState& t : tracks_) {
      const Vec2 p = compensate_point({t.state.mean(0), t.state.mean(1)}, ego);
      t.state.mean(0) = p.x;
      t.state.mean(1) = p.y;
      t.state.mean(2) = wrap_angle(t.state.mean(2) + theta);
      MatN<5> J = MatN<5>::Identity();
      J(0, 0) = c;
      J(0, 1) = -s;
      J(1, 0) = s;
      J(1, 1) = c;
      t.state.cov = (J * t.state.cov * J.transpose()).eval();
      t.rep_offset = rotate(t.rep_offset, theta);
      // static_yaw lives mod pi: rotate its doubled-angle vector.
      const double c2 = std::cos(2.0 * theta), s2 = std::sin(2.0 * theta);
      const double nc = c2 * t.sy_c - s2 * t.sy_s;
      const double ns = s2 * t.sy_c + c2 * t.sy_s;
      t.sy_c = nc;
      t.sy_s = ns;
      t.static_yaw = 0.5 * std::atan2(t.sy_s, t.sy_c);
      for (auto& e : t.fd) {
        e.pos = compensate_point(e.pos, ego);
        ++e.age;
      }
      while (!t.fd.empty() && t.fd.front().age > cfg_.fd_frames + 2) t.fd.pop_front();
      t.updated_this_frame = false;
    }
  }

  void predict_track(TrackState& t) {
    try {
      t.state = ukf_predict_ctrv(t.state, dt_, cfg_.sigma_accel, cfg_.sigma_yaw_accel);
    } catch (const SigmaPointFailure&) {
      t.status = TrackStatus::Dead;
    }
  }

  // Rectangle-symmetric yaw disambiguation: candidates differing by pi (and
  // by pi/2 for slab-like detections whose long axis may be the vehicle's
  // width) are resolved against the predicted yaw.
  double disambiguate_yaw(double meas_yaw, double pred_yaw, bool thin) const {
    double best = meas_yaw;
    double best_err = 1e300;
    const double steps[4] = {0.0, M_PI, M_PI / 2.0, -M_PI / 2.0};
    const int n = thin ? 4 : 2;
    for (int k = 0; k < n; ++k) {
      const double cand = wrap_angle(meas_yaw + steps[k]);
      const double err = std::abs(wrap_angle(cand - pred_yaw));
      if (err < best_err) {
        best_err = err;
        best = cand;
      }
    }
    return best;
  }

  void update_track(TrackState& t, const DetectedVehicle& det, const Vec2& z_comp) {
    const bool thin =
        det.width < 0.3 || (det.length > 0.0 && det.width / det.length < cfg_.thin_ratio);
    const double meas_yaw_raw = to_comp_angle(det.yaw);
    const double meas_yaw = disambiguate_yaw(meas_yaw_raw, t.state.mean(2), thin);
    const double sigma_yaw = thin ? cfg_.meas_sigma_yaw_thin : cfg_.meas_sigma_yaw;
    try {
      t.state = ukf_update_pose(t.state, z_comp, meas_yaw, cfg_.meas_sigma_xy, sigma_yaw);
      if (!t.fd.empty()) {
        const TrackState::FdEntry& oldest = t.fd.front();
        if (oldest.age >= 1 && oldest.age <= cfg_.fd_frames) {
          const Vec2 disp = z_comp - oldest.pos;
          const double v_fd = disp.norm() / (oldest.age * dt_);
          // Partial-visibility transitions can jump the measured center by
          // meters in one frame; accept the finite-difference speed only when
          // it is consistent with the filtered speed and its uncertainty.
          const double gate =
              2.0 + 3.0 * std::sqrt(t.state.cov(3, 3) + cfg_.fd_sigma_v * cfg_.fd_sigma_v);
          if (std::abs(v_fd - std::abs(t.state.mean(3))) < gate) {
            t.state = ukf_update_speed(t.state, v_fd, cfg_.fd_sigma_v);
            if (disp.norm() > 3.0 * cfg_.meas_sigma_xy && v_fd > cfg_.static_speed_threshold)
              t.state = ukf_update_heading(t.state, std::atan2(disp.y, disp.x), cfg_.fd_sigma_yaw);
          }
        }
      }
    } catch (const SigmaPointFailure&) {
      t.status = TrackStatus::Dead;
      return;
    }
    // Report speed >= 0: flip heading if the filter drove v negative.
    if (t.state.mean(3) < 0.0) {
      t.state.mean(3) = -t.state.mean(3);
      t.state.mean(2) = wrap_angle(t.state.mean(2) + M_PI);
    }

    t.fd.push_back({z_comp, 0});
    while (static_cast<int>(t.fd.size()) > cfg_.fd_frames + 1) t.fd.pop_front();

    // Smoothed L-shape heading (mod pi) for statically aligned boxes.
    const double alpha = 0.15;
    t.sy_c = (1.0 - alpha) * t.sy_c + alpha * std::cos(2.0 * meas_yaw);
    t.sy_s = (1.0 - alpha) * t.sy_s + alpha * std::sin(2.0 * meas_yaw);
    t.static_yaw = 0.5 * std::atan2(t.sy_s, t.sy_c);

    update_alignment(t, det);

    ++t.hits;
    t.consec_misses = 0;
    t.window.push_back(true);
    if (static_cast<int>(t.window.size()) > cfg_.confirm_window) t.window.pop_front();
    if (t.status == TrackStatus::Tentative) {
      int wins = 0;
      for (bool b : t.window) wins += b ? 1 : 0;
      if (wins >= cfg_.confirm_hits) t.status = TrackStatus::Confirmed;
    }
    t.updated_this_frame = true;
  }

  // Smoothed extent + anchored alignment. The raw cluster covers only the
  // visible faces, so the reported box keeps the raw near side (the side the
  // sensor actually measured) and grows the smoothed extent away from the
  // sensor.
  void update_alignment(TrackState& t, const DetectedVehicle& det) {
    const bool is_static = std::abs(t.state.mean(3)) < cfg_.static_speed_threshold;
    const double rep_yaw = is_static ? t.static_yaw : t.state.mean(2);
    const Vec2 u{std::cos(rep_yaw), std::sin(rep_yaw)};
    const Vec2 w = u.perp();
    double umin = 1e300, umax = -1e300, wmin = 1e300, wmax = -1e300;
    for (const Vec2& corner_p : det.corners) {
      const Vec2 c = to_comp(corner_p);
      const double pu = c.dot(u), pw = c.dot(w);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      wmin = std::min(wmin, pw);
      wmax = std::max(wmax, pw);
    }
    // Extents grow immediately to cover new evidence but shrink proportionally
    // toward the raw projection, so a transiently misaligned frame does not
    // latch an inflated box for the rest of the track's life.
    const double raw_len = umax - umin;
    const double raw_wid = wmax - wmin;
    t.length = std::max(
        raw_len, t.length - std::max(cfg_.extent_decay,
                                     cfg_.extent_shrink_rate * (t.length - raw_len)));
    t.width = std::max(
        raw_wid, t.width - std::max(cfg_.extent_decay,
                                    cfg_.extent_shrink_rate * (t.width - raw_wid)));

    const double cu = std::abs(umin) <= std::abs(umax) ? umin + 0.5 * t.length
                                                       : umax - 0.5 * t.length;
    const double cw = std::abs(wmin) <= std::abs(wmax) ? wmin + 0.5 * t.width
                                                       : wmax - 0.5 * t.width;
    const Vec2 rep_center = u * cu + w * cw;
    t.rep_offset = rep_center - Vec2{t.state.mean(0), t.state.mean(1)};
  }

  void miss_track(TrackState& t) {
    ++t.misses;
    ++t.consec_misses;
    t.window.push_back(false);
    if (static_cast<int>(t.window.size()) > cfg_.confirm_window) t.window.pop_front();
    const int limit = t.status == TrackStatus::Confirmed ? cfg_.confirmed_max_misses
                                                         : cfg_.tentative_max_misses;
    if (t.consec_misses >= limit) t.status = TrackStatus::Dead;
  }

  int spawn_track(const DetectedVehicle& det, const Vec2& z_comp) {
    TrackState t;
    t.id = next_id_++;
    t.status = TrackStatus::Tentative;
    t.state.mean << z_comp.x, z_comp.y, to_comp_angle(det.yaw), 0.0, 0.0;
    t.state.cov = MatN<5>::Zero();
    t.state.cov(0, 0) = t.state.cov(1, 1) = cfg_.meas_sigma_xy * cfg_.meas_sigma_xy * 4.0;
    t.state.cov(2, 2) = 1.0;
    t.state.cov(3, 3) = 16.0;
    t.state.cov(4, 4) = 0.25;
    t.length = det.length;
    t.width = det.width;
    t.sy_c = std::cos(2.0 * t.state.mean(2));
    t.sy_s = std::sin(2.0 * t.state.mean(2));
    t.static_yaw = 0.5 * std::atan2(t.sy_s, t.sy_c);
    t.hits = 1;
    t.window.push_back(true);
    t.fd.push_back({z_comp, 0});
    update_alignment(t, det);
    t.updated_this_frame = true;
    const int id = t.id;
    tracks_.push_back(std::move(t));
    return id;
  }

  TrackerConfig cfg_;
  double dt_;
  std::vector<TrackState> tracks_;
  std::vector<int> det_track_ids_;
  int next_id_ = 1;
};

}  // namespace lidarplan
