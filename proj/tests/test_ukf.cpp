#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "lidarplan/rng.hpp"
#include "lidarplan/tracking.hpp"
#include "lidarplan/ukf.hpp"

using namespace lidarplan;

namespace {

constexpr std::array<bool, 4> kNoAngular4{false, false, false, false};
constexpr std::array<bool, 2> kNoAngular2{false, false};

// Hand-rolled linear Kalman filter for a 2D constant-velocity model with
// position measurements; the oracle the unscented filter must match exactly
// on this linear problem.
struct LinearKf {
  Eigen::Vector4d x;
  Eigen::Matrix4d P;

  void predict(const Eigen::Matrix4d& F, const Eigen::Matrix4d& Q) {
    x = F * x;
    P = F * P * F.transpose() + Q;
  }
  void update(const Eigen::Matrix<double, 2, 4>& H, const Eigen::Vector2d& z,
              const Eigen::Matrix2d& R) {
    const Eigen::Matrix2d S = H * P * H.transpose() + R;
    const Eigen::Matrix<double, 4, 2> K = P * H.transpose() * S.inverse();
    x = x + K * (z - H * x);
    P = (Eigen::Matrix4d::Identity() - K * H) * P;
  }
};

}  // namespace

TEST_CASE("unscented filter equals a Kalman filter on a linear model") {
  const double dt = 0.1;
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = F(1, 3) = dt;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(0, 0) = Q(1, 1) = 1e-4;
  Q(2, 2) = Q(3, 3) = 1e-2;
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 0) = H(1, 1) = 1.0;
  Eigen::Matrix2d R = 0.09 * Eigen::Matrix2d::Identity();

  LinearKf kf;
  kf.x << 0.0, 0.0, 1.0, -0.5;
  kf.P = Eigen::Matrix4d::Identity();

  Gaussian<4> g;
  g.mean = kf.x;
  g.cov = kf.P;

  Rng rng(55);
  double truth_x = 0.0, truth_y = 0.0;
  for (int step = 0; step < 200; ++step) {
    truth_x += 1.2 * dt;
    truth_y += -0.4 * dt;
    const Eigen::Vector2d z(truth_x + rng.normal(0.0, 0.3), truth_y + rng.normal(0.0, 0.3));

    kf.predict(F, Q);
    g = unscented_predict<4>(
        g, [&](const VecN<4>& s) { return VecN<4>(F * s); }, Q, kNoAngular4);

    kf.update(H, z, R);
    g = unscented_update<4, 2>(
        g, [&](const VecN<4>& s) { return VecN<2>(H * s); }, VecN<2>(z), R, kNoAngular4,
        kNoAngular2);

    REQUIRE((g.mean - kf.x).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE((g.cov - kf.P).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("constant-turn-rate step: straight-line branch is exact") {
  VecN<5> s;
  s << 2.0, 3.0, 0.0, 10.0, 0.0;  // x, y, yaw, v, yaw_rate
  const VecN<5> out = ctrv_step(s, 0.1);
  CHECK(out(0) == Catch::Approx(3.0).margin(1e-12));  // x + v dt
  CHECK(out(1) == Catch::Approx(3.0).margin(1e-12));
  CHECK(out(2) == 0.0);
  CHECK(out(3) == 10.0);
  CHECK(out(4) == 0.0);

  // Heading at 45 degrees splits the displacement evenly.
  s << 0.0, 0.0, M_PI / 4.0, 10.0, 0.0;
  const VecN<5> diag_out = ctrv_step(s, 0.1);
  CHECK(diag_out(0) == Catch::Approx(std::sqrt(0.5)).margin(1e-12));
  CHECK(diag_out(1) == Catch::Approx(std::sqrt(0.5)).margin(1e-12));

  // dt = 0 is the identity.
  const VecN<5> frozen = ctrv_step(s, 0.0);
  CHECK((frozen - s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant-turn-rate step matches a Runge-Kutta integration") {
  VecN<5> s;
  s << 1.0, -2.0, 0.3, 8.0, 0.4;
  const double dt = 0.5;
  // Integrate x' = v cos(yaw), y' = v sin(yaw), yaw' = w with RK4 substeps.
  Eigen::Vector3d q(s(0), s(1), s(2));
  const double v = s(3), w = s(4);
  const int substeps = 2000;
  const double h = dt / substeps;
  auto deriv = [&](const Eigen::Vector3d& u) {
    return Eigen::Vector3d(v * std::cos(u(2)), v * std::sin(u(2)), w);
  };
  for (int i = 0; i < substeps; ++i) {
    const Eigen::Vector3d k1 = deriv(q);
    const Eigen::Vector3d k2 = deriv(q + 0.5 * h * k1);
    const Eigen::Vector3d k3 = deriv(q + 0.5 * h * k2);
    const Eigen::Vector3d k4 = deriv(q + h * k3);
    q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const VecN<5> out = ctrv_step(s, dt);
  CHECK(out(0) == Catch::Approx(q(0)).margin(1e-9));
  CHECK(out(1) == Catch::Approx(q(1)).margin(1e-9));
  CHECK(out(2) == Catch::Approx(wrap_angle(q(2))).margin(1e-12));
  // The closed form and the straight approximation agree as w -> 0.
  VecN<5> s_small = s;
  s_small(4) = 2e-5;
  VecN<5> s_zero = s;
  s_zero(4) = 0.0;
  CHECK((ctrv_step(s_small, dt) - ctrv_step(s_zero, dt)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("predict with dt = 0 leaves the state untouched") {
  Gaussian<5> g;
  g.mean << 4.0, 5.0, 0.7, 3.0, 0.1;
  g.cov = 0.5 * MatN<5>::Identity();
  const Gaussian<5> out = ukf_predict_ctrv(g, 0.0, 2.0, 1.0);
  CHECK((out.mean - g.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((out.cov - g.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("a measurement equal to the prediction fixes the mean and shrinks the covariance") {
  Gaussian<5> g;
  g.mean << 4.0, 5.0, 0.7, 3.0, 0.1;
  g.cov = MatN<5>::Identity();
  const Gaussian<5> out = ukf_update_pose(g, {4.0, 5.0}, 0.7, 0.12, 0.2);
  CHECK((out.mean - g.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(out.cov.trace() < g.cov.trace());
  for (int i = 0; i < 5; ++i) CHECK(out.cov(i, i) <= g.cov(i, i) + 1e-12);
}

TEST_CASE("a stationary target's speed estimate converges within ten updates") {
  Gaussian<5> g;
  g.mean << 10.0, 0.0, 0.0, 4.0, 0.0;  // wrongly believes 4 m/s
  g.cov = MatN<5>::Identity();
  g.cov(3, 3) = 16.0;
  for (int i = 0; i < 10; ++i) {
    g = ukf_predict_ctrv(g, 0.05, 2.0, 1.0);
    g = ukf_update_pose(g, {10.0, 0.0}, 0.0, 0.12, 0.2);
  }
  CHECK(std::abs(g.mean(3)) < 0.05);
  CHECK((g.mean.head<2>() - Eigen::Vector2d(10.0, 0.0)).norm() < 0.05);
}

TEST_CASE("covariance stays positive definite over many cycles") {
  Gaussian<5> g;
  g.mean << 0.0, 0.0, 0.2, 6.0, 0.05;
  g.cov = MatN<5>::Identity();
  Rng rng(66);
  for (int i = 0; i < 10000; ++i) {
    g = ukf_predict_ctrv(g, 0.05, 2.0, 1.0);
    const Vec2 z{g.mean(0) + rng.normal(0.0, 0.1), g.mean(1) + rng.normal(0.0, 0.1)};
    g = ukf_update_pose(g, z, g.mean(2) + rng.normal(0.0, 0.05), 0.12, 0.2);
    if (i % 500 == 0 || i == 9999) {
      const Eigen::SelfAdjointEigenSolver<MatN<5>> es(g.cov);
      REQUIRE(es.eigenvalues().minCoeff() > 0.0);
      REQUIRE((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("sigma points reject a covariance that is not positive definite") {
  Gaussian<2> g;
  g.mean << 0.0, 0.0;
  g.cov << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(ukfdetail::sigma_points(g), SigmaPointFailure);
}

TEST_CASE("angular state rows update across the wrap boundary") {
  Gaussian<5> g;
  g.mean << 0.0, 0.0, M_PI - 0.05, 1.0, 0.0;
  g.cov = 0.04 * MatN<5>::Identity();
  // Measurement on the far side of the boundary: the blend must land near
  // +-pi, not near zero (which a naive average would produce).
  const Gaussian<5> out = ukf_update_heading(g, -M_PI + 0.05, 0.2);
  CHECK(std::abs(std::abs(out.mean(2)) - M_PI) < 0.06);
  // Prediction with a turn rate carries the heading through the boundary.
  Gaussian<5> h;
  h.mean << 0.0, 0.0, M_PI - 0.01, 2.0, 0.5;
  h.cov = 0.01 * MatN<5>::Identity();
  const Gaussian<5> spun = ukf_predict_ctrv(h, 0.1, 2.0, 1.0);
  CHECK(spun.mean(2) == Catch::Approx(wrap_angle(M_PI - 0.01 + 0.05)).margin(1e-3));
}
