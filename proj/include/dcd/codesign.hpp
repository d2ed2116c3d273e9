#pragma once

#include <string>
#include <vector>

#include "dcd/conic.hpp"
#include "dcd/h2.hpp"
#include "dcd/model.hpp"
#include "dcd/netcost.hpp"
#include "dcd/sparseadmm.hpp"
#include "dcd/spectral.hpp"

namespace dcd {

// How the delay variables are constrained in the outer SDPs.
enum class DelayConstraint {
  kBandwidth,     // dS_BW <= 0 around the baseline
  kEpsilonBall,   // |(tau_d - tau_d*) + (tau_o - tau_o*)| <= epsilon
};

struct SdpConfigKTau {
  double zeta1 = 0.0;      // 0: 0.1 * omega*
  double zeta2 = 0.0;      // 0: 0.1 * |P*|_F
  // Caps zeta1 so that the alpha bound leaves a nonempty interior.
  bool cap_zeta1 = true;
  double trust_scale = 1.0;  // multiplies zeta1, zeta2
  int ladder = 5;            // trust constants tried: scale * ratio^k
  double ladder_ratio = 0.25;
  int max_retries = 5;
  ConicOptions solver;
  bool full_lmi = false;   // explicit dP with a PSD block (small problems)
  int inject_verification_failures = 0;  // test hook
};

struct SdpConfigKC {
  double beta = 0.0;       // 0: 0.1 * |L*|_F
  double S_bound = 0.0;    // 0: (1 + margin) * max endpoint norm
  double margin = 0.05;
  int interval = -1;       // -1: the sub-interval containing c*
  double trust_scale = 1.0;  // multiplies beta and the c step radius
  int ladder = 5;
  double ladder_ratio = 0.25;
  int max_retries = 5;
  bool allow_shortcut = true;
  ConicOptions solver;
  int inject_verification_failures = 0;
};

// Fixed problem data shared by the outer-loop stages.
struct CodesignContext {
  const PlantModel* plant = nullptr;
  const SpectralBasis* basis = nullptr;
  Topology topology;
  GainMasks masks;
  BandwidthModel bw;
  double rho = 100.0;
  DelayConstraint constraint = DelayConstraint::kBandwidth;
  double epsilon = 0.0;

  static CodesignContext make(const PlantModel& plant, const SpectralBasis& basis,
                              const Topology& topology, const BandwidthModel& bw);
  LoopContext loop_context(double tau_o, double c) const;
};

struct OuterState {
  MatrixXd K;
  double tau_o = 0.0;
  double c = 0.0;
  MatrixXd P;
  MatrixXd L;
  double J = 0.0;
  double S_BW = 0.0;
  ChannelCounts counts;
  double abscissa = 0.0;
  DiscretizedLoop loop;
  H2Solution sol;
};

// Throws StabilityError if the tuple is not stabilizing.
OuterState make_outer_state(const CodesignContext& ctx, const MatrixXd& K,
                            double tau_o, double c);

enum class SdpStatus { kAccepted, kInfeasible, kVerificationFailed };

struct SdpResult {
  SdpStatus status = SdpStatus::kInfeasible;
  MatrixXd K;
  double tau_o = 0.0;
  double c = 0.0;
  double J = 0.0;            // true H2 cost at the returned tuple
  double predicted = 0.0;    // SDP objective
  double abscissa = 0.0;
  double delta_S = 0.0;      // S_BW(new) - S_BW* or constraint residual
  int attempts = 0;
  int verification_failures = 0;
  double trust1 = 0.0;       // zeta1 or beta actually used last
  double trust2 = 0.0;       // zeta2 or S_bound
  bool shortcut = false;
  std::string message;
};

// Direct checks on a candidate tuple: abscissa and the delay constraint.
struct Verification {
  bool ok = false;
  double abscissa = 0.0;
  double delta_S = 0.0;
  std::string reason;
};

Verification verify_tuple(const CodesignContext& ctx, const OuterState& base,
                          const MatrixXd& K, double tau_o, double c);

// Admissible tau_o interval for the delay constraint with c fixed at c*.
std::pair<double, double> tau_interval(const CodesignContext& ctx,
                                       const OuterState& base);
// Admissible c interval with tau_o fixed at tau_o*.
std::pair<double, double> c_interval(const CodesignContext& ctx,
                                     const OuterState& base);

SdpResult sdp_ktau(const OuterState& state, const MatrixXd& U,
                   const CodesignContext& ctx, const SdpConfigKTau& cfg = {});

SdpResult sdp_kc(const OuterState& state, const MatrixXd& U,
                 const CodesignContext& ctx, const AffineNdApprox& affine,
                 const SdpConfigKC& cfg = {});

enum class OuterMode { kDelayDesign, kConstantDelay };

struct Algorithm1Config {
  OuterMode mode = OuterMode::kDelayDesign;
  std::vector<double> gammas = gamma_path();
  int rounds = 3;
  int k_c = 4;
  AdmmConfig admm;
  SdpConfigKTau ktau;
  SdpConfigKC kc;
};

struct TraceRow {
  double gamma = 0.0;
  int round = 0;
  int nnz = 0;
  double J = 0.0;
  double tau_o = 0.0;
  double c = 0.0;
  double tau_d = 0.0;
  double S_BW = 0.0;
  int n_cp = 0;
  int n_cc = 0;
  double abscissa = 0.0;
  std::string status;
};

struct DesignTrace {
  std::vector<TraceRow> rows;
  OuterState final_state;
};

std::string trace_header();
std::string trace_line(const TraceRow& r);

DesignTrace algorithm1(const CodesignContext& ctx, const MatrixXd& K0,
                       double tau_o0, double c0, const Algorithm1Config& cfg);

struct CaseAConfig {
  double epsilon = 0.0;    // 0: 0.05 * tau_o0
  int iterations = 15;
  int k_c = 4;
  int max_shrinks = 5;
  SdpConfigKTau ktau;
  SdpConfigKC kc;
};

struct CaseARow {
  int iteration = 0;
  double J = 0.0;
  double total_delay = 0.0;  // tau_o + tau_d
  double tau_o = 0.0;
  double c = 0.0;
  double constraint = 0.0;   // |d tau_d + d tau_o| of the accepted step
  std::string status;
};

struct CaseATrace {
  std::vector<CaseARow> rows;
  OuterState final_state;
};

// Outer loop alone with the epsilon-ball in place of the bandwidth
// constraints; K stays on its initial support.
CaseATrace case_a_mode(CodesignContext ctx, const MatrixXd& K0, double tau_o0,
                       double c0, const CaseAConfig& cfg);

}  // namespace dcd
