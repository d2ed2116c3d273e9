#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dcd/h2.hpp"
#include "dcd/model.hpp"
#include "dcd/spectral.hpp"

namespace dcd {

struct ArmijoConfig {
  double shrink = 0.5;
  double slope = 1e-4;
  int max_backtracks = 40;
};

struct AdmmConfig {
  double rho = 100.0;
  double gamma = 0.0;
  double epsilon_w = 1e-3;
  double eps_scale = 1e-4;       // eps_pri = eps_dual = eps_scale * sqrt(mn)
  int max_iter = 100;
  int kmin_max_iter = 50;
  double grad_tol_scale = 1e-4;  // |grad Phi1| <= scale (1 + |K|)
  int dense_limit = 2500;
  ArmijoConfig armijo;
};

// Fixed-delay evaluation context of the inner loop.
struct LoopContext {
  const PlantModel* plant = nullptr;
  GainMasks masks;
  double tau_o = 0.0;
  double c = 0.0;
  const SpectralBasis* basis = nullptr;

  DesignEval evaluate(const MatrixXd& K) const {
    return evaluate_design(*plant, K, masks, tau_o, c, *basis);
  }
};

struct KMinResult {
  MatrixXd K;
  double phi = 0.0;
  double J = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

double phi1(double J, const MatrixXd& K, const MatrixXd& U, double rho);

// Gradient of J + rho/2 |K - U|^2 at an evaluated design.
MatrixXd phi1_gradient(const DesignEval& e, const LoopContext& ctx,
                       const MatrixXd& K, const MatrixXd& U, double rho);

// Solves the masked normal equations H(K) = mu for the current P, L.
MatrixXd kmin_fixed_point(const DesignEval& e, const LoopContext& ctx,
                          const MatrixXd& U, double rho, int dense_limit);

KMinResult k_min(const MatrixXd& K0, const MatrixXd& U, const LoopContext& ctx,
                 const AdmmConfig& cfg);

MatrixXd f_min(const MatrixXd& V, const MatrixXd& W, double gamma, double rho);

// Group shrinkage over the blocks of the permuted gain. block_weights is
// N x N (rowgroup, colgroup).
MatrixXd f_min_block(const MatrixXd& V, const Topology& T, double gamma,
                     double rho, const MatrixXd& block_weights);

MatrixXd reweight(const MatrixXd& F, double epsilon_w);
MatrixXd reweight_blocks(const MatrixXd& F, const Topology& T, double epsilon_w);

struct AdmmState {
  MatrixXd K;
  MatrixXd F;
  MatrixXd Theta;
  MatrixXd W;
};

struct AdmmResult {
  AdmmState state;
  bool converged = false;
  int iterations = 0;
  double r_pri = 0.0;
  double r_dual = 0.0;
  double J = 0.0;  // at K
};

// When block_topology is set the F update uses group shrinkage with W read
// as N x N block weights.
AdmmResult admm_loop(const AdmmState& init, const LoopContext& ctx,
                     const AdmmConfig& cfg,
                     const Topology* block_topology = nullptr);

std::vector<double> gamma_path(int points = 40, double lo = 0.01,
                               double hi = 0.95, double gamma_max = 1.0);

}  // namespace dcd
