#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lidarplan/geometry.hpp"

namespace lidarplan {

struct SigmaPointFailure : std::runtime_error {
  explicit SigmaPointFailure(const std::string& msg) : std::runtime_error(msg) {}
};

template <int N>
using VecN = Eigen::Matrix<double, N, 1>;
template <int N>
using MatN = Eigen::Matrix<double, N, N>;

template <int N>
struct Gaussian {
  VecN<N> mean = VecN<N>::Zero();
  MatN<N> cov = MatN<N>::Identity();
};

// Plain unscented transform with lambda = 0 (alpha = 1, beta = 0, kappa = 0):
// the center point carries zero weight, the 2N spread points carry 1/(2N)
// each. All weights are non-negative, so reconstructed covariances stay PSD,
// and the transform is exact for linear models.
namespace ukfdetail {

template <int N>
Eigen::Matrix<double, N, 2 * N + 1> sigma_points(const Gaussian<N>& g) {
  MatN<N> scaled = static_cast<double>(N) * g.cov;
  Eigen::LLT<MatN<N>> llt(scaled);
  if (llt.info() != Eigen::Success) {
    // One re-conditioning attempt: add jitter proportional to the trace.
    const double jitter = std::max(1e-12, 1e-9 * g.cov.trace() / N);
    scaled += static_cast<double>(N) * jitter * MatN<N>::Identity();
    llt.compute(scaled);
    if (llt.info() != Eigen::Success)
      throw SigmaPointFailure("sigma_points: covariance is not positive definite");
  }
  const MatN<N> sqrt = llt.matrixL();
  Eigen::Matrix<double, N, 2 * N + 1> X;
  X.col(0) = g.mean;
  for (int i = 0; i < N; ++i) {
    X.col(1 + i) = g.mean + sqrt.col(i);
    X.col(1 + N + i) = g.mean - sqrt.col(i);
  }
  return X;
}

constexpr double sigma_weight(int n) { return 1.0 / (2.0 * n); }

template <int M, int K>
VecN<M> weighted_mean(const Eigen::Matrix<double, M, K>& Y, const std::array<bool, M>& angular) {
  const double w = sigma_weight((K - 1) / 2);
  VecN<M> mean = VecN<M>::Zero();
  for (int r = 0; r < M; ++r) {
    if (angular[r]) {
      double s = 0.0, c = 0.0;
      for (int k = 1; k < K; ++k) {
        s += w * std::sin(Y(r, k));
        c += w * std::cos(Y(r, k));
      }
      mean(r) = std::atan2(s, c);
    } else {
      for (int k = 1; k < K; ++k) mean(r) += w * Y(r, k);
    }
  }
  return mean;
}

template <int M, int K>
Eigen::Matrix<double, M, K> residuals(const Eigen::Matrix<double, M, K>& Y, const VecN<M>& mean,
                                      const std::array<bool, M>& angular) {
  Eigen::Matrix<double, M, K> R;
  for (int k = 0; k < K; ++k)
    for (int r = 0; r < M; ++r) {
      const double d = Y(r, k) - mean(r);
      R(r, k) = angular[r] ? wrap_angle(d) : d;
    }
  return R;
}

}  // namespace ukfdetail

// Propagates the state through a process model f(state) -> state and adds Q.
template <int N, typename F>
Gaussian<N> unscented_predict(const Gaussian<N>& g, F&& f, const MatN<N>& Q,
                              const std::array<bool, N>& angular) {
  constexpr int K = 2 * N + 1;
  Eigen::Matrix<double, N, K> X = ukfdetail::sigma_points(g);
  for (int k = 0; k < K; ++k) X.col(k) = f(VecN<N>(X.col(k)));
  Gaussian<N> out;
  out.mean = ukfdetail::weighted_mean<N, K>(X, angular);
  const Eigen::Matrix<double, N, K> R = ukfdetail::residuals<N, K>(X, out.mean, angular);
  const double w = ukfdetail::sigma_weight(N);
  out.cov = w * (R * R.transpose()) + Q;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  for (int r = 0; r < N; ++r)
    if (angular[r]) out.mean(r) = wrap_angle(out.mean(r));
  return out;
}

template <int M>
struct UpdateDiagnostics {
  VecN<M> innovation = VecN<M>::Zero();
  double nis = 0.0;  // normalized innovation squared
};

// Measurement update through a model h(state) -> measurement with additive
// noise R_meas.
template <int N, int M, typename H>
Gaussian<N> unscented_update(const Gaussian<N>& g, H&& h, const VecN<M>& z, const MatN<M>& R_meas,
                             const std::array<bool, N>& state_angular,
                             const std::array<bool, M>& meas_angular,
                             UpdateDiagnostics<M>* diag = nullptr) {
  constexpr int K = 2 * N + 1;
  const Eigen::Matrix<double, N, K> X = ukfdetail::sigma_points(g);
  Eigen::Matrix<double, M, K> Z;
  for (int k = 0; k < K; ++k) Z.col(k) = h(VecN<N>(X.col(k)));

  const VecN<M> z_pred = ukfdetail::weighted_mean<M, K>(Z, meas_angular);
  const Eigen::Matrix<double, M, K> Zr = ukfdetail::residuals<M, K>(Z, z_pred, meas_angular);
  const Eigen::Matrix<double, N, K> Xr = ukfdetail::residuals<N, K>(X, g.mean, state_angular);

  const double w = ukfdetail::sigma_weight(N);
  const MatN<M> S = (w * (Zr * Zr.transpose()) + R_meas).eval();
  const Eigen::Matrix<double, N, M> T = w * (Xr * Zr.transpose());
  const Eigen::Matrix<double, N, M> K_gain = S.ldlt().solve(T.transpose()).transpose();

  VecN<M> innov = z - z_pred;
  for (int r = 0; r < M; ++r)
    if (meas_angular[r]) innov(r) = wrap_angle(innov(r));

  Gaussian<N> out;
  out.mean = g.mean + K_gain * innov;
  out.cov = g.cov - K_gain * S * K_gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  for (int r = 0; r < N; ++r)
    if (state_angular[r]) out.mean(r) = wrap_angle(out.mean(r));
  if (diag) {
    diag->innovation = innov;
    diag->nis = innov.dot(S.ldlt().solve(innov));
  }
  return out;
}

}  // namespace lidarplan
