#pragma once

#include <cstdint>

#include "dcd/h2.hpp"
#include "dcd/model.hpp"
#include "dcd/netcost.hpp"
#include "dcd/spectral.hpp"

namespace dcd {

struct RandomPlantOptions {
  int n = 5;
  int m = 5;
  std::uint64_t seed = 1;
  double spectral_radius = 1.0;  // A rescaled to this radius; <= 0 keeps the draw
};

// A with i.i.d. normal entries; B the leading columns of I, B_w = Q = I,
// R = I.
PlantModel generate_random_plant(const RandomPlantOptions& opt);

// Stabilizing solution of A^T X + X A - X B R^-1 B^T X + Q = 0.
MatrixXd solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R);

// K = R^-1 B^T X for the delay-free loop u = -K x.
MatrixXd lqr_gain(const PlantModel& plant);

struct InitialTuple {
  MatrixXd K;
  double tau_o = 0.0;
  double c = 0.0;
  double abscissa = 0.0;
  double boundary = 0.0;  // largest stable tau_o found by bisection
};

// LQR gain, then tau_o shrunk by bisection until the delayed loop is
// stable; the returned tau_o is safety * boundary when tau_try is unstable.
InitialTuple initial_tuple(const PlantModel& plant, const GainMasks& masks,
                           const SpectralBasis& basis, double tau_try, double c,
                           double safety = 0.5);

}  // namespace dcd
