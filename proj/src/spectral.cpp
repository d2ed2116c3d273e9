#include "dcd/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

namespace dcd {

namespace {

constexpr double kPi = std::numbers::pi;

// 1/(theta_i - theta_k) for tau_o = 1, one based indices.
double inv_gap(int N, int i, int k) {
  const double h = kPi / (2.0 * (N - 1));
  return -1.0 / (std::sin((2 * N - i - k) * h) * std::sin((k - i) * h));
}

}  // namespace

VectorXd chebyshev_grid(int N, double tau_o) {
  if (N < 2) throw std::invalid_argument("chebyshev_grid: N must be >= 2");
  VectorXd th(N);
  for (int k = 0; k < N; ++k) {
    th(k) = 0.5 * tau_o * (std::cos((N - k - 1) * kPi / (N - 1)) - 1.0);
  }
  th(0) = -tau_o;
  th(N - 1) = 0.0;
  return th;
}

MatrixXd build_lambda(int N, int n) {
  if (N < 2) throw std::invalid_argument("build_lambda: N must be >= 2");
  MatrixXd D = MatrixXd::Zero(N, N);
  for (int i = 1; i < N; ++i) {
    for (int j = 1; j <= N; ++j) {
      if (i == j) {
        double s = 0.0;
        for (int k = 1; k <= N; ++k)
          if (k != i) s += inv_gap(N, i, k);
        D(i - 1, j - 1) = s;
      } else {
        double v = inv_gap(N, j, i);
        for (int m = 1; m <= N; ++m) {
          if (m == i || m == j) continue;
          v *= inv_gap(N, j, m) / inv_gap(N, i, m);
        }
        D(i - 1, j - 1) = v;
      }
    }
  }
  return Eigen::kroneckerProduct(D, MatrixXd::Identity(n, n)).eval();
}

MatrixXd build_gamma(int N) {
  if (N < 2) throw std::invalid_argument("build_gamma: N must be >= 2");
  const VectorXd s = chebyshev_grid(N, 1.0);
  MatrixXd G(N, N);
  for (int j = 0; j < N; ++j) {
    // ascending coefficients of prod_{m != j} (-c - s_m) / (s_j - s_m)
    std::vector<double> poly{1.0};
    for (int m = 0; m < N; ++m) {
      if (m == j) continue;
      const double den = s(j) - s(m);
      const double a1 = -1.0 / den, a0 = -s(m) / den;
      std::vector<double> next(poly.size() + 1, 0.0);
      for (std::size_t p = 0; p < poly.size(); ++p) {
        next[p] += a0 * poly[p];
        next[p + 1] += a1 * poly[p];
      }
      poly.swap(next);
    }
    for (int p = 0; p < N; ++p) G(j, N - 1 - p) = poly[p];
  }
  return G;
}

SpectralBasis make_basis(int N, int n) {
  SpectralBasis b;
  b.N = N;
  b.n = n;
  b.unit_grid = chebyshev_grid(N, 1.0);
  b.D = build_lambda(N, 1);
  b.Lambda = build_lambda(N, n);
  b.Gamma = build_gamma(N);
  return b;
}

VectorXd nu(double c, int N) {
  VectorXd v(N);
  double p = 1.0;
  for (int k = N - 1; k >= 0; --k) {
    v(k) = p;
    p *= c;
  }
  return v;
}

VectorXd dnu(double c, int N) {
  VectorXd v = VectorXd::Zero(N);
  for (int k = 0; k < N - 1; ++k) {
    const int power = N - 1 - k;
    v(k) = power * std::pow(c, power - 1);
  }
  return v;
}

VectorXd delay_weights(const SpectralBasis& basis, double c) {
  // Same values as Gamma * nu(c); the product form avoids the cancellation
  // of the monomial expansion for large N.
  const VectorXd& s = basis.unit_grid;
  const int N = basis.N;
  VectorXd w(N);
  for (int j = 0; j < N; ++j) {
    double v = 1.0;
    for (int m = 0; m < N; ++m)
      if (m != j) v *= (-c - s(m)) / (s(j) - s(m));
    w(j) = v;
  }
  return w;
}

VectorXd delay_weights_dc(const SpectralBasis& basis, double c) {
  const VectorXd& s = basis.unit_grid;
  const int N = basis.N;
  VectorXd w = VectorXd::Zero(N);
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k < N; ++k) {
      if (k == j) continue;
      double v = -1.0 / (s(j) - s(k));
      for (int m = 0; m < N; ++m)
        if (m != j && m != k) v *= (-c - s(m)) / (s(j) - s(m));
      w(j) += v;
    }
  }
  return w;
}

MatrixXd build_Nd(double c, const SpectralBasis& basis) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("build_Nd: c outside [0,1]");
  return Eigen::kroneckerProduct(delay_weights(basis, c),
                                 MatrixXd::Identity(basis.n, basis.n))
      .eval();
}

MatrixXd build_dNd(double c, const SpectralBasis& basis) {
  return Eigen::kroneckerProduct(delay_weights_dc(basis, c),
                                 MatrixXd::Identity(basis.n, basis.n))
      .eval();
}

MatrixXd first_block_selector(const SpectralBasis& basis) {
  MatrixXd S = MatrixXd::Zero(basis.dim(), basis.n);
  S.topRows(basis.n).setIdentity();
  return S;
}

MatrixXd last_block_selector(const SpectralBasis& basis) {
  MatrixXd S = MatrixXd::Zero(basis.dim(), basis.n);
  S.bottomRows(basis.n).setIdentity();
  return S;
}

DiscretizedLoop build_closed_loop(const PlantModel& plant, const MatrixXd& K,
                                  const GainMasks& masks, double tau_o,
                                  double c, const SpectralBasis& basis) {
  const int n = plant.n(), m = plant.m(), N = basis.N, Nn = basis.dim();
  if (basis.n != n || K.rows() != m || K.cols() != n) {
    throw std::invalid_argument("build_closed_loop: dimension mismatch");
  }
  if (!(tau_o > 0.0)) throw std::invalid_argument("build_closed_loop: tau_o <= 0");
  DiscretizedLoop L;
  L.tau_o = tau_o;
  L.c = c;
  const auto sg = split_gain(K, masks);
  L.K_d = sg.K_d;
  L.K_o = sg.K_o;
  L.N_d = build_Nd(c, basis);
  L.N_o = first_block_selector(basis);
  L.M = last_block_selector(basis);
  L.A_tilde = basis.Lambda / tau_o;
  L.A_tilde.bottomRightCorner(n, n) += plant.A;
  L.calB = L.M * plant.B;
  L.calB_w = L.M * plant.B_w;

  L.A_cl = L.A_tilde;
  const VectorXd w = delay_weights(basis, c);
  const MatrixXd BKd = plant.B * L.K_d;
  for (int j = 0; j < N; ++j) {
    L.A_cl.block(Nn - n, j * n, n, n) -= w(j) * BKd;
  }
  L.A_cl.block(Nn - n, 0, n, n) -= plant.B * L.K_o;

  L.Q_tilde = MatrixXd::Zero(Nn, Nn);
  L.Q_tilde.bottomRightCorner(n, n) = plant.Q;
  L.C_tilde = L.K_d * L.N_d.transpose() + L.K_o * L.N_o.transpose();
  return L;
}

MatrixXd performance_output(const DiscretizedLoop& loop,
                            const PlantModel& plant) {
  const int n = plant.n(), m = plant.m();
  const int Nn = static_cast<int>(loop.A_cl.rows());
  MatrixXd C = MatrixXd::Zero(n + m, Nn);
  C.topRightCorner(n, n) = sqrtm_psd(plant.Q);
  C.bottomRows(m) = sqrtm_psd(plant.R) * loop.C_tilde;
  return C;
}

int AffineNdApprox::interval_of(double c) const {
  for (int i = 0; i < k_c; ++i) {
    if (c <= breakpoints(i + 1)) return i;
  }
  return k_c - 1;
}

VectorXd AffineNdApprox::weights(double c) const {
  const MatrixXd& X = chi[interval_of(c)];
  return X.col(0) * c + X.col(1);
}

AffineNdApprox fit_affine_Nd(const SpectralBasis& basis, int k_c,
                             int samples) {
  if (k_c < 1) throw std::invalid_argument("fit_affine_Nd: k_c must be >= 1");
  AffineNdApprox ap;
  ap.k_c = k_c;
  ap.breakpoints = VectorXd::LinSpaced(k_c + 1, 0.0, 1.0);
  for (int i = 0; i < k_c; ++i) {
    const double a = ap.breakpoints(i), b = ap.breakpoints(i + 1);
    MatrixXd V(samples, 2);
    MatrixXd Y(samples, basis.N);
    for (int s = 0; s < samples; ++s) {
      const double c = a + (b - a) * s / (samples - 1);
      V(s, 0) = c;
      V(s, 1) = 1.0;
      Y.row(s) = delay_weights(basis, c).transpose();
    }
    const MatrixXd coef = V.colPivHouseholderQr().solve(Y);  // 2 x N
    ap.chi.push_back(coef.transpose());
    for (int s = 0; s < samples; ++s) {
      const double err =
          (coef.transpose() * V.row(s).transpose() - Y.row(s).transpose()).norm();
      ap.max_error = std::max(ap.max_error, err);
    }
  }
  return ap;
}

}  // namespace dcd
