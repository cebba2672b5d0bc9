#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace lidarplan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Pose2 {
  Vec2 position;
  double yaw = 0.0;  // CCW from map +x, wrapped to [-pi, pi)
};

// Map frame -> pose frame (x along pose heading, right-handed).
inline Vec2 map_to_frame(const Pose2& pose, const Vec2& p_map) {
  return rotate(p_map - pose.position, -pose.yaw);
}

inline Vec2 frame_to_map(const Pose2& pose, const Vec2& p_frame) {
  return rotate(p_frame, pose.yaw) + pose.position;
}

struct Segment {
  Vec2 a;
  Vec2 b;
};

namespace detail {
inline int orientation(const Vec2& p, const Vec2& q, const Vec2& r) {
  const double v = (q - p).cross(r - p);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

inline bool on_segment(const Vec2& p, const Vec2& q, const Vec2& r) {
  return q.x <= std::max(p.x, r.x) && q.x >= std::min(p.x, r.x) &&
         q.y <= std::max(p.y, r.y) && q.y >= std::min(p.y, r.y);
}
}  // namespace detail

// Segment-segment intersection. Proper and touching intersections both
// report a point; collinear overlaps report the overlap endpoint nearest
// to a's start.
inline std::optional<Vec2> segment_intersect(const Segment& s1, const Segment& s2) {
  using detail::on_segment;
  using detail::orientation;
  const int o1 = orientation(s1.a, s1.b, s2.a);
  const int o2 = orientation(s1.a, s1.b, s2.b);
  const int o3 = orientation(s2.a, s2.b, s1.a);
  const int o4 = orientation(s2.a, s2.b, s1.b);

  if (o1 != o2 && o3 != o4) {
    const Vec2 r = s1.b - s1.a;
    const Vec2 s = s2.b - s2.a;
    const double denom = r.cross(s);
    if (denom != 0.0) {
      const double t = (s2.a - s1.a).cross(s) / denom;
      return s1.a + r * t;
    }
  }

  // Collinear / touching cases.
  std::optional<Vec2> best;
  auto consider = [&](const Vec2& p) {
    if (!best || (p - s1.a).squared_norm() < (*best - s1.a).squared_norm()) best = p;
  };
  if (o1 == 0 && on_segment(s1.a, s2.a, s1.b)) consider(s2.a);
  if (o2 == 0 && on_segment(s1.a, s2.b, s1.b)) consider(s2.b);
  if (o3 == 0 && on_segment(s2.a, s1.a, s2.b)) consider(s1.a);
  if (o4 == 0 && on_segment(s2.a, s1.b, s2.b)) consider(s1.b);
  return best;
}

inline bool segments_intersect(const Segment& s1, const Segment& s2) {
  return segment_intersect(s1, s2).has_value();
}

inline double point_segment_distance(const Vec2& p, const Segment& s) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.squared_norm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return (p - (s.a + d * t)).norm();
}

// Andrew's monotone chain. Returns hull vertices in CCW order without the
// closing point. Collinear points are dropped.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Corners of an oriented rectangle, CCW starting at front-left:
// [front-left, rear-left, rear-right, front-right].
inline std::array<Vec2, 4> rect_corners(const Vec2& center, double yaw, double length,
                                        double width) {
  const Vec2 fwd = {std::cos(yaw), std::sin(yaw)};
  const Vec2 left = {-fwd.y, fwd.x};
  const Vec2 f = fwd * (length * 0.5);
  const Vec2 l = left * (width * 0.5);
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.cross(q);
  }
  return 0.5 * std::abs(a);
}

// Sutherland-Hodgman clip of a convex polygon against another (CCW) convex polygon.
inline std::vector<Vec2> convex_clip(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
  for (size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Vec2 a = clip[i];
    const Vec2 b = clip[(i + 1) % clip.size()];
    const Vec2 edge = b - a;
    std::vector<Vec2> out;
    out.reserve(subject.size() + 2);
    for (size_t j = 0; j < subject.size(); ++j) {
      const Vec2 p = subject[j];
      const Vec2 q = subject[(j + 1) % subject.size()];
      const double dp = edge.cross(p - a);
      const double dq = edge.cross(q - a);
      if (dp >= 0.0) {
        out.push_back(p);
        if (dq < 0.0) out.push_back(p + (q - p) * (dp / (dp - dq)));
      } else if (dq >= 0.0) {
        out.push_back(p + (q - p) * (dp / (dp - dq)));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline double ccw_area2(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) a += poly[i].cross(poly[(i + 1) % poly.size()]);
  return a;
}

inline std::vector<Vec2> ensure_ccw(std::vector<Vec2> poly) {
  if (ccw_area2(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

// BEV intersection-over-union of two oriented rectangles.
inline double rect_iou(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  std::vector<Vec2> pa = ensure_ccw({a.begin(), a.end()});
  std::vector<Vec2> pb = ensure_ccw({b.begin(), b.end()});
  const double inter = polygon_area(convex_clip(pa, pb));
  const double area_a = polygon_area(pa);
  const double area_b = polygon_area(pb);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Separating-axis overlap test for two oriented rectangles.
inline bool rects_overlap(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  auto axes_separate = [](const std::array<Vec2, 4>& r1, const std::array<Vec2, 4>& r2) {
    for (int i = 0; i < 2; ++i) {
      const Vec2 axis = (r1[(i + 1) % 4] - r1[i]).perp();
      double min1 = 1e300, max1 = -1e300, min2 = 1e300, max2 = -1e300;
      for (const Vec2& p : r1) {
        const double d = p.dot(axis);
        min1 = std::min(min1, d);
        max1 = std::max(max1, d);
      }
      for (const Vec2& p : r2) {
        const double d = p.dot(axis);
        min2 = std::min(min2, d);
        max2 = std::max(max2, d);
      }
      if (max1 < min2 || max2 < min1) return true;
    }
    return false;
  };
  return !axes_separate(a, b) && !axes_separate(b, a);
}

}  // namespace lidarplan
