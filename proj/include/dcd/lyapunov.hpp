#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dcd {

using Eigen::MatrixXd;

class ResonantSpectrumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Real Schur form A = U T U^T reused across many right-hand sides.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const MatrixXd& A);

  // A^T X + X A + W = 0
  MatrixXd solve_observability(const MatrixXd& W) const;
  // A X + X A^T + W = 0
  MatrixXd solve_controllability(const MatrixXd& W) const;

  // Same solves with data and result in Schur coordinates (Y = U^T X U).
  MatrixXd to_schur(const MatrixXd& W) const;
  MatrixXd solve_observability_schur(const MatrixXd& C) const;
  MatrixXd solve_controllability_schur(const MatrixXd& C) const;
  const MatrixXd& schur_basis() const { return U_; }

  double abscissa() const { return abscissa_; }
  int dim() const { return static_cast<int>(T_.rows()); }

 private:
  MatrixXd U_;
  MatrixXd T_;
  double abscissa_ = 0.0;
};

MatrixXd solve_lyapunov(const MatrixXd& A, const MatrixXd& W);
MatrixXd solve_lyapunov_kron(const MatrixXd& A, const MatrixXd& W);

double spectral_abscissa(const MatrixXd& A);

}  // namespace dcd
