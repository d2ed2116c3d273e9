#include "dcd/experiment.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dcd {

PlantModel generate_random_plant(const RandomPlantOptions& opt) {
  if (opt.n < 1 || opt.m < 1) throw std::invalid_argument("random plant: n, m >= 1");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd A(opt.n, opt.n);
  for (int j = 0; j < opt.n; ++j)
    for (int i = 0; i < opt.n; ++i) A(i, j) = g(rng);
  if (opt.spectral_radius > 0.0) {
    Eigen::EigenSolver<MatrixXd> es(A, false);
    const double rad = es.eigenvalues().cwiseAbs().maxCoeff();
    if (rad > 0.0) A *= opt.spectral_radius / rad;
  }
  MatrixXd B = MatrixXd::Identity(opt.n, opt.m);
  return PlantModel(A, B, MatrixXd::Identity(opt.n, opt.n),
                    MatrixXd::Identity(opt.n, opt.n),
                    MatrixXd::Identity(opt.m, opt.m));
}

MatrixXd solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  const MatrixXd S = B * R.llt().solve(B.transpose());
  MatrixXd H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  // matrix sign iteration with determinant scaling
  MatrixXd Z = H;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<MatrixXd> lu(Z);
    const MatrixXd Zi = lu.inverse();
    const double det = std::abs(lu.determinant());
    double mu = std::pow(det, -1.0 / (2 * n));
    if (!std::isfinite(mu) || mu <= 0.0) mu = 1.0;
    const MatrixXd Zn = 0.5 * (mu * Z + Zi / mu);
    const double change = (Zn - Z).norm() / std::max(1.0, Zn.norm());
    Z = Zn;
    if (change < 1e-13) break;
  }
  MatrixXd lhs(2 * n, n), rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + MatrixXd::Identity(n, n);
  rhs << -(Z.topLeftCorner(n, n) + MatrixXd::Identity(n, n)), -Z.bottomLeftCorner(n, n);
  MatrixXd X = lhs.colPivHouseholderQr().solve(rhs);
  X = 0.5 * (X + X.transpose());
  // Kleinman refinement
  for (int it = 0; it < 4; ++it) {
    const MatrixXd K = R.llt().solve(B.transpose() * X);
    const MatrixXd Acl = A - B * K;
    if (spectral_abscissa(Acl) >= 0.0) break;
    X = solve_lyapunov(Acl, Q + K.transpose() * R * K);
  }
  return X;
}

MatrixXd lqr_gain(const PlantModel& plant) {
  const MatrixXd X = solve_care(plant.A, plant.B, plant.Q, plant.R);
  const MatrixXd K = plant.R.llt().solve(plant.B.transpose() * X);
  if (spectral_abscissa(plant.A - plant.B * K) >= 0.0) {
    throw std::runtime_error("lqr_gain: Riccati solution is not stabilizing");
  }
  return K;
}

InitialTuple initial_tuple(const PlantModel& plant, const GainMasks& masks,
                           const SpectralBasis& basis, double tau_try, double c,
                           double safety) {
  InitialTuple t;
  t.K = lqr_gain(plant);
  t.c = c;
  auto stable = [&](double tau) {
    return loop_abscissa(plant, t.K, masks, tau, c, basis) < -kHurwitzMargin;
  };
  if (stable(tau_try)) {
    t.tau_o = tau_try;
    t.boundary = tau_try;
  } else {
    double lo = 0.0, hi = tau_try;
    // shrink until a stable point is seen, then bisect the boundary
    double probe = tau_try;
    for (int k = 0; k < 60 && !stable(probe); ++k) probe *= 0.5;
    if (!stable(probe)) throw std::runtime_error("initial_tuple: no stable tau_o");
    lo = probe;
    hi = std::min(tau_try, 2.0 * probe);
    for (int k = 0; k < 40; ++k) {
      const double mid = 0.5 * (lo + hi);
      (stable(mid) ? lo : hi) = mid;
    }
    t.boundary = lo;
    t.tau_o = safety * lo;
  }
  t.abscissa = loop_abscissa(plant, t.K, masks, t.tau_o, c, basis);
  return t;
}

}  // namespace dcd
