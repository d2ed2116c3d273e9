#include "dcd/h2.hpp"

#include <cmath>
#include <string>

namespace dcd {

StabilityError::StabilityError(double abscissa)
    : std::runtime_error("closed loop not Hurwitz, abscissa = " +
                         std::to_string(abscissa)),
      abscissa_(abscissa) {}

H2Solution h2_norm(const DiscretizedLoop& loop, const PlantModel& plant) {
  LyapunovSolver lyap(loop.A_cl);
  H2Solution s;
  s.abscissa = lyap.abscissa();
  if (!(s.abscissa < -kHurwitzMargin)) throw StabilityError(s.abscissa);
  const MatrixXd W_P =
      loop.Q_tilde + loop.C_tilde.transpose() * plant.R * loop.C_tilde;
  s.P = lyap.solve_observability(W_P);
  s.L = lyap.solve_controllability(loop.calB_w * loop.calB_w.transpose());
  s.J = (loop.calB_w.transpose() * s.P * loop.calB_w).trace();
  s.J_dual = (s.L * W_P).trace();
  s.G = plant.R * loop.C_tilde - loop.calB.transpose() * s.P;
  return s;
}

GradientBundle gradients(const DiscretizedLoop& loop, const PlantModel&,
                         const H2Solution& sol, const SpectralBasis& basis,
                         const GainMasks& masks) {
  GradientBundle g;
  const double t = loop.tau_o;
  g.dJ_dtau_o = -2.0 / (t * t) * (basis.Lambda.transpose() * sol.P * sol.L).trace();
  const MatrixXd dNd = build_dNd(loop.c, basis);
  const MatrixXd GL = sol.G * sol.L;
  g.dJ_dc = 2.0 * (dNd * loop.K_d.transpose() * GL).trace();
  g.dJ_dK = 2.0 * ((GL * loop.N_d).cwiseProduct(masks.I_d) +
                   (GL * loop.N_o).cwiseProduct(masks.I_o));
  return g;
}

DesignEval evaluate_design(const PlantModel& plant, const MatrixXd& K,
                           const GainMasks& masks, double tau_o, double c,
                           const SpectralBasis& basis) {
  DesignEval e;
  e.loop = build_closed_loop(plant, K, masks, tau_o, c, basis);
  e.sol = h2_norm(e.loop, plant);
  return e;
}

double loop_abscissa(const PlantModel& plant, const MatrixXd& K,
                     const GainMasks& masks, double tau_o, double c,
                     const SpectralBasis& basis) {
  return spectral_abscissa(
      build_closed_loop(plant, K, masks, tau_o, c, basis).A_cl);
}

}  // namespace dcd
