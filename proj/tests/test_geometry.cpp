#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lidarplan/geometry.hpp"
#include "lidarplan/rng.hpp"

using namespace lidarplan;

TEST_CASE("wrap_angle maps into [-pi, pi)") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(M_PI) == Catch::Approx(-M_PI));
  CHECK(wrap_angle(-M_PI) == Catch::Approx(-M_PI));
  CHECK(wrap_angle(3.0 * M_PI / 2.0) == Catch::Approx(-M_PI / 2.0));
  CHECK(wrap_angle(-3.0 * M_PI / 2.0) == Catch::Approx(M_PI / 2.0));
  CHECK(wrap_angle(7.0 * M_PI) == Catch::Approx(-M_PI));
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w >= -M_PI);
    CHECK(w < M_PI);
    // Same angle modulo 2*pi.
    CHECK(std::abs(std::sin(w) - std::sin(a)) < 1e-9);
    CHECK(std::abs(std::cos(w) - std::cos(a)) < 1e-9);
  }
}

TEST_CASE("frame transforms round-trip") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Pose2 pose{{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)},
                     rng.uniform(-M_PI, M_PI)};
    const Vec2 p{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)};
    const Vec2 back = frame_to_map(pose, map_to_frame(pose, p));
    CHECK((back - p).norm() < 1e-9);
  }
  // x axis of the frame is the pose heading.
  const Pose2 pose{{3.0, 4.0}, M_PI / 2.0};
  const Vec2 q = map_to_frame(pose, {3.0, 14.0});  // 10 m along heading
  CHECK(q.x == Catch::Approx(10.0).margin(1e-12));
  CHECK(q.y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("segment intersection: proper crossing") {
  const auto p = segment_intersect({{0, 0}, {2, 0}}, {{1, -1}, {1, 1}});
  REQUIRE(p.has_value());
  CHECK(p->x == Catch::Approx(1.0).margin(1e-12));
  CHECK(p->y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("segment intersection: parallel disjoint segments miss") {
  CHECK_FALSE(segment_intersect({{0, 0}, {2, 0}}, {{0, 1}, {2, 1}}).has_value());
  CHECK_FALSE(segment_intersect({{0, 0}, {1, 1}}, {{2, 0}, {3, 1}}).has_value());
}

TEST_CASE("segment intersection: touching endpoint counts") {
  const auto p = segment_intersect({{0, 0}, {2, 0}}, {{2, 0}, {2, 5}});
  REQUIRE(p.has_value());
  CHECK(p->x == Catch::Approx(2.0).margin(1e-12));
  CHECK(p->y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("segment intersection: collinear overlap reports point nearest first start") {
  const auto p = segment_intersect({{0, 0}, {2, 0}}, {{1, 0}, {3, 0}});
  REQUIRE(p.has_value());
  CHECK(p->x == Catch::Approx(1.0).margin(1e-12));
  CHECK(p->y == Catch::Approx(0.0).margin(1e-12));

  // Same rule when the overlap direction is reversed.
  const auto q = segment_intersect({{0, 0}, {2, 0}}, {{3, 0}, {1, 0}});
  REQUIRE(q.has_value());
  CHECK(q->x == Catch::Approx(1.0).margin(1e-12));

  // Brute-force check: the reported point lies on both segments and no point
  // of the overlap is closer to the first segment's start.
  const Segment a{{0, 0}, {2, 0}}, b{{1, 0}, {3, 0}};
  const Vec2 r = *segment_intersect(a, b);
  for (int k = 0; k <= 200; ++k) {
    const double t = k / 200.0;
    const Vec2 s = a.a + (a.b - a.a) * t;
    const bool on_b = s.x >= 1.0 - 1e-12 && s.x <= 3.0 + 1e-12;
    if (on_b) CHECK((s - a.a).norm() >= (r - a.a).norm() - 1e-12);
  }
}

TEST_CASE("segment intersection agrees with a parametric oracle on random pairs") {
  Rng rng(13);
  int crossings = 0;
  for (int i = 0; i < 2000; ++i) {
    auto rv = [&] { return Vec2{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)}; };
    const Segment s1{rv(), rv()}, s2{rv(), rv()};
    // Parametric solve, ignoring near-degenerate configurations.
    const Vec2 d1 = s1.b - s1.a, d2 = s2.b - s2.a;
    const double den = d1.cross(d2);
    if (std::abs(den) < 1e-9) continue;
    const double t = (s2.a - s1.a).cross(d2) / den;
    const double u = (s2.a - s1.a).cross(d1) / den;
    const bool hit = t > 1e-9 && t < 1.0 - 1e-9 && u > 1e-9 && u < 1.0 - 1e-9;
    const auto res = segment_intersect(s1, s2);
    if (hit) {
      ++crossings;
      REQUIRE(res.has_value());
      const Vec2 expect = s1.a + d1 * t;
      CHECK((*res - expect).norm() < 1e-9);
    } else if (t < -1e-6 || t > 1.0 + 1e-6 || u < -1e-6 || u > 1.0 + 1e-6) {
      CHECK_FALSE(res.has_value());
    }
  }
  CHECK(crossings > 100);  // the sample actually exercised the hit branch
}

TEST_CASE("point-segment distance") {
  CHECK(point_segment_distance({0, 1}, {{-1, 0}, {1, 0}}) == Catch::Approx(1.0));
  CHECK(point_segment_distance({3, 0}, {{-1, 0}, {1, 0}}) == Catch::Approx(2.0));
  CHECK(point_segment_distance({5, 5}, {{2, 2}, {2, 2}}) ==
        Catch::Approx(std::hypot(3.0, 3.0)));  // degenerate segment
}

TEST_CASE("convex hull contains all points and is convex") {
  Rng rng(14);
  std::vector<Vec2> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
  // Add known extreme corners so the expected hull frame is known.
  pts.push_back({-10, -10});
  pts.push_back({10, -10});
  pts.push_back({10, 10});
  pts.push_back({-10, 10});
  const std::vector<Vec2> hull = convex_hull(pts);
  CHECK(hull.size() == 4);
  // Convexity: every consecutive triple turns the same way.
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const Vec2& c = hull[(i + 2) % hull.size()];
    CHECK((b - a).cross(c - b) > 0.0);  // counter-clockwise
  }
  // Containment: all input points inside or on the hull.
  for (const Vec2& p : pts) {
    for (size_t i = 0; i < hull.size(); ++i) {
      const Vec2& a = hull[i];
      const Vec2& b = hull[(i + 1) % hull.size()];
      CHECK((b - a).cross(p - a) >= -1e-9);
    }
  }
}

TEST_CASE("rect_corners builds the oriented rectangle") {
  const auto c = rect_corners({0, 0}, 0.0, 4.0, 2.0);
  CHECK(c[0].x == Catch::Approx(2.0));   // front-left
  CHECK(c[0].y == Catch::Approx(1.0));
  CHECK(c[1].x == Catch::Approx(-2.0));  // rear-left
  CHECK(c[1].y == Catch::Approx(1.0));
  CHECK(c[2].x == Catch::Approx(-2.0));  // rear-right
  CHECK(c[2].y == Catch::Approx(-1.0));
  CHECK(c[3].x == Catch::Approx(2.0));   // front-right
  CHECK(c[3].y == Catch::Approx(-1.0));

  // Rotation by 90 degrees maps front to +y.
  const auto r = rect_corners({1, 1}, M_PI / 2.0, 4.0, 2.0);
  CHECK(r[0].x == Catch::Approx(0.0).margin(1e-12));
  CHECK(r[0].y == Catch::Approx(3.0));
}

TEST_CASE("polygon area of the unit square") {
  CHECK(polygon_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}}) == Catch::Approx(1.0));
  CHECK(polygon_area({{0, 0}, {0, 1}, {1, 1}, {1, 0}}) == Catch::Approx(1.0));  // clockwise too
}

TEST_CASE("rectangle IoU: identical, shifted, disjoint") {
  const auto a = rect_corners({10, 0}, 0.0, 4.0, 2.0);
  CHECK(rect_iou(a, a) == Catch::Approx(1.0).margin(1e-12));

  // 4x2 box shifted 1 m laterally: intersection 4x1, union 2*8 - 4 = 12.
  const auto b = rect_corners({10, 1}, 0.0, 4.0, 2.0);
  CHECK(rect_iou(a, b) == Catch::Approx(4.0 / 12.0).margin(1e-12));

  const auto c = rect_corners({30, 0}, 0.0, 4.0, 2.0);
  CHECK(rect_iou(a, c) == 0.0);
}

TEST_CASE("rect overlap test agrees with IoU positivity away from edge contact") {
  Rng rng(15);
  for (int i = 0; i < 500; ++i) {
    const auto a = rect_corners({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)},
                                rng.uniform(-M_PI, M_PI), rng.uniform(0.5, 5.0),
                                rng.uniform(0.5, 3.0));
    const auto b = rect_corners({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)},
                                rng.uniform(-M_PI, M_PI), rng.uniform(0.5, 5.0),
                                rng.uniform(0.5, 3.0));
    const double iou = rect_iou(a, b);
    const bool overlap = rects_overlap(a, b);
    if (iou > 1e-9) CHECK(overlap);
    if (!overlap) CHECK(iou < 1e-9);
  }
}
