#include "dcd/lyapunov.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include <lapacke.h>
#include <unsupported/Eigen/KroneckerProduct>

namespace dcd {

LyapunovSolver::LyapunovSolver(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("Lyapunov: A not square");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  T_ = A;
  U_.resize(n, n);
  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info =
      LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, T_.data(), n, &sdim,
                    wr.data(), wi.data(), U_.data(), n);
  if (info != 0) {
    throw std::runtime_error("Lyapunov: Schur decomposition did not converge");
  }
  abscissa_ = n > 0 ? *std::max_element(wr.begin(), wr.end())
                    : -std::numeric_limits<double>::infinity();
}

MatrixXd LyapunovSolver::to_schur(const MatrixXd& W) const {
  return U_.transpose() * W * U_;
}

namespace {

// T^T Y + Y T = -C (transposed = true) or T Y + Y T^T = -C.
MatrixXd quasi_triangular_solve(const MatrixXd& T, const MatrixXd& C,
                                bool transposed) {
  const lapack_int n = static_cast<lapack_int>(T.rows());
  MatrixXd Y = -C;
  double scale = 1.0;
  const lapack_int info = LAPACKE_dtrsyl(
      LAPACK_COL_MAJOR, transposed ? 'T' : 'N', transposed ? 'N' : 'T', 1, n, n,
      T.data(), n, T.data(), n, Y.data(), n, &scale);
  if (info < 0) throw std::invalid_argument("Lyapunov: bad argument to Sylvester solver");
  if (info == 1) {
    throw ResonantSpectrumError("Lyapunov operator is singular (resonant spectrum)");
  }
  if (scale != 1.0) Y /= scale;
  return Y;
}

}  // namespace

MatrixXd LyapunovSolver::solve_observability_schur(const MatrixXd& C) const {
  return quasi_triangular_solve(T_, C, true);
}

MatrixXd LyapunovSolver::solve_controllability_schur(const MatrixXd& C) const {
  return quasi_triangular_solve(T_, C, false);
}

MatrixXd LyapunovSolver::solve_observability(const MatrixXd& W) const {
  const MatrixXd X = U_ * solve_observability_schur(to_schur(W)) * U_.transpose();
  return 0.5 * (X + X.transpose());
}

MatrixXd LyapunovSolver::solve_controllability(const MatrixXd& W) const {
  const MatrixXd X = U_ * solve_controllability_schur(to_schur(W)) * U_.transpose();
  return 0.5 * (X + X.transpose());
}

MatrixXd solve_lyapunov(const MatrixXd& A, const MatrixXd& W) {
  return LyapunovSolver(A).solve_observability(W);
}

MatrixXd solve_lyapunov_kron(const MatrixXd& A, const MatrixXd& W) {
  const int n = static_cast<int>(A.rows());
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd op = Eigen::kroneckerProduct(I, A.transpose()).eval() +
                      Eigen::kroneckerProduct(A.transpose(), I).eval();
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(W.data(), n * n);
  Eigen::VectorXd x = op.fullPivLu().solve(rhs);
  return Eigen::Map<MatrixXd>(x.data(), n, n);
}

double spectral_abscissa(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("abscissa: A not square");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (n == 0) return -std::numeric_limits<double>::infinity();
  MatrixXd H = A;
  std::vector<double> wr(n), wi(n);
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, H.data(), n, wr.data(),
                    wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw std::runtime_error("abscissa: eigensolver did not converge");
  return *std::max_element(wr.begin(), wr.end());
}

}  // namespace dcd
