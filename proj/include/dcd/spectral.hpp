#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dcd/model.hpp"

namespace dcd {

struct SpectralBasis {
  int N = 0;
  int n = 0;
  VectorXd unit_grid;   // grid for tau_o = 1, from -1 to 0
  MatrixXd D;           // N x N differentiation rows for tau_o = 1, last row zero
  MatrixXd Lambda;      // D kron I_n
  MatrixXd Gamma;       // N x N Lagrange coefficient matrix

  VectorXd theta(double tau_o) const { return tau_o * unit_grid; }
  int dim() const { return N * n; }
};

VectorXd chebyshev_grid(int N, double tau_o);
MatrixXd build_lambda(int N, int n);
MatrixXd build_gamma(int N);
SpectralBasis make_basis(int N, int n);

// Monomial vectors [c^{N-1} ... c 1] and their derivative.
VectorXd nu(double c, int N);
VectorXd dnu(double c, int N);

// Interpolation weights of x(t - c tau_o) on the grid, equal to Gamma * nu(c).
VectorXd delay_weights(const SpectralBasis& basis, double c);
VectorXd delay_weights_dc(const SpectralBasis& basis, double c);

MatrixXd build_Nd(double c, const SpectralBasis& basis);
MatrixXd build_dNd(double c, const SpectralBasis& basis);
MatrixXd first_block_selector(const SpectralBasis& basis);  // N_o
MatrixXd last_block_selector(const SpectralBasis& basis);   // M

struct DiscretizedLoop {
  MatrixXd A_cl;
  MatrixXd A_tilde;
  MatrixXd calB;
  MatrixXd calB_w;
  MatrixXd N_d;
  MatrixXd N_o;
  MatrixXd M;
  MatrixXd Q_tilde;
  MatrixXd C_tilde;
  MatrixXd K_d;
  MatrixXd K_o;
  double tau_o = 0.0;
  double c = 0.0;
};

DiscretizedLoop build_closed_loop(const PlantModel& plant, const MatrixXd& K,
                                  const GainMasks& masks, double tau_o,
                                  double c, const SpectralBasis& basis);

// Stacked output map [Qt^{1/2}; R^{1/2} Ct] of the performance channel.
MatrixXd performance_output(const DiscretizedLoop& loop,
                            const PlantModel& plant);

struct AffineNdApprox {
  int k_c = 0;
  VectorXd breakpoints;
  std::vector<MatrixXd> chi;  // N x 2 per interval: [slope, intercept]
  double max_error = 0.0;

  int interval_of(double c) const;
  VectorXd weights(double c) const;           // affine weights for c
  VectorXd slope(int interval) const { return chi[interval].col(0); }
};

AffineNdApprox fit_affine_Nd(const SpectralBasis& basis, int k_c,
                             int samples_per_interval = 50);

}  // namespace dcd
