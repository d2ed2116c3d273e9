#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "dcd/model.hpp"

namespace dcd {

inline constexpr double kZeroThreshold = 1e-9;

class InfeasibleDelayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BandwidthModel {
  double m_cp = 1.0;
  double m_cc = 1.0;
  double kappa = 1.0;
  double tau_dpr = 1e-4;
  double tau_cpr = 1e-4;
  double S_b = 0.0;
};

struct ChannelCounts {
  int n_cp = 0;
  int n_cc = 0;          // channel count n^T n_off
  int links = 0;         // sum of n_off
  std::vector<int> n_off;
};

// Block (p, q) of the permuted gain is nonzero.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> block_support(
    const MatrixXd& K, const Topology& T);

int count_nonzero(const MatrixXd& K);
ChannelCounts channel_counts(const MatrixXd& K, const Topology& T);

// tau_d = 2 kappa n_cp / b_cp + tau_dpr, tau_c = kappa n_cc / b_cc + tau_cpr
std::pair<double, double> delays_from_bandwidth(const ChannelCounts& counts,
                                                const BandwidthModel& model,
                                                double b_cp, double b_cc);

double sbw(double tau_d, double tau_o, const ChannelCounts& counts,
           const BandwidthModel& model);

struct CostBreakdown {
  int n_cp = 0;
  int n_cc = 0;
  double tau_dtr = 0.0;
  double tau_ctr = 0.0;
  double S_BW = 0.0;
};

CostBreakdown cost_breakdown(double tau_d, double tau_o,
                             const ChannelCounts& counts,
                             const BandwidthModel& model);

struct Quadratic {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(double x) const { return (a * x + b) * x + c; }
};

// Baseline around which the bandwidth change is expanded.
struct SbwBaseline {
  double tau_o = 0.0;
  double c = 0.0;
  int n_cp = 0;
  int n_cc = 0;
  double S_ref = 0.0;  // reference cost S_BW*
};

// dS = numerator / denominator; denominator > 0 on the feasible domain.
// difference = numerator - denominator, the combined form with the
// (S*+1) leading coefficient.
struct SbwQuadraticForm {
  Quadratic numerator;
  Quadratic denominator;
  Quadratic difference;
  double delta(double x) const { return numerator(x) / denominator(x); }
};

SbwBaseline make_baseline(double tau_o, double c, const ChannelCounts& counts,
                          const BandwidthModel& model);

SbwQuadraticForm delta_sbw_c_coeffs(const SbwBaseline& base,
                                    const BandwidthModel& model);
SbwQuadraticForm delta_sbw_tau_coeffs(const SbwBaseline& base,
                                      const BandwidthModel& model);

// Vertex of a convex quadratic clipped into the open interval (lo, hi).
double c_min(const Quadratic& q, double lo, double hi);

// Open interval of admissible c for a given tau_o.
std::pair<double, double> c_domain(double tau_o, const BandwidthModel& model);

// Exact minimizer of S_BW over c at fixed tau_o and counts.
double sbw_minimizing_ratio(double tau_o, const ChannelCounts& counts,
                            const BandwidthModel& model);

// {x in [lo, hi] : q(x) <= 0} as an interval containing x0; q(x0) <= 0
// required. Works for either sign of the leading coefficient.
std::pair<double, double> sublevel_interval(const Quadratic& q, double x0,
                                            double lo, double hi);

}  // namespace dcd
