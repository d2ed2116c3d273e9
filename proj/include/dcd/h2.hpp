#pragma once

#include <stdexcept>

#include "dcd/lyapunov.hpp"
#include "dcd/model.hpp"
#include "dcd/spectral.hpp"

namespace dcd {

inline constexpr double kHurwitzMargin = 1e-9;

class StabilityError : public std::runtime_error {
 public:
  explicit StabilityError(double abscissa);
  double abscissa() const { return abscissa_; }

 private:
  double abscissa_;
};

struct H2Solution {
  MatrixXd P;
  MatrixXd L;
  double J = 0.0;
  double J_dual = 0.0;  // Tr(C L C^T)
  MatrixXd G;           // R Ct - calB^T P
  double abscissa = 0.0;
};

struct GradientBundle {
  double dJ_dtau_o = 0.0;
  double dJ_dc = 0.0;
  MatrixXd dJ_dK;
};

H2Solution h2_norm(const DiscretizedLoop& loop, const PlantModel& plant);

GradientBundle gradients(const DiscretizedLoop& loop, const PlantModel& plant,
                         const H2Solution& sol, const SpectralBasis& basis,
                         const GainMasks& masks);

// Builds the loop and evaluates J; throws StabilityError when unstable.
struct DesignEval {
  DiscretizedLoop loop;
  H2Solution sol;
};

DesignEval evaluate_design(const PlantModel& plant, const MatrixXd& K,
                           const GainMasks& masks, double tau_o, double c,
                           const SpectralBasis& basis);

// Abscissa of the discretized loop, without Gramians.
double loop_abscissa(const PlantModel& plant, const MatrixXd& K,
                     const GainMasks& masks, double tau_o, double c,
                     const SpectralBasis& basis);

}  // namespace dcd
