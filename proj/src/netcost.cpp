#include "dcd/netcost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dcd {

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> block_support(
    const MatrixXd& K, const Topology& T) {
  const int N = T.N_cn();
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> S(N, N);
  S.setConstant(false);
  for (int p = 0; p < N; ++p)
    for (int a = ro[p]; a < ro[p + 1]; ++a)
      for (int q = 0; q < N; ++q)
        for (int b = co[q]; b < co[q + 1] && !S(p, q); ++b)
          if (std::abs(K(T.U_order[a], T.X_order[b])) >= kZeroThreshold) S(p, q) = true;
  return S;
}

int count_nonzero(const MatrixXd& K) {
  return static_cast<int>((K.array().abs() >= kZeroThreshold).count());
}

ChannelCounts channel_counts(const MatrixXd& K, const Topology& T) {
  if (K.rows() != T.m() || K.cols() != T.n()) {
    throw std::invalid_argument("channel_counts: dimension mismatch");
  }
  ChannelCounts cc;
  const auto nz = (K.array().abs() >= kZeroThreshold).eval();
  cc.n_cp = static_cast<int>(nz.rowwise().any().count() + nz.colwise().any().count());
  const auto S = block_support(K, T);
  const int N = T.N_cn();
  cc.n_off.assign(N, 0);
  for (int q = 0; q < N; ++q) {
    for (int p = 0; p < N; ++p)
      if (p != q && S(p, q)) ++cc.n_off[q];
    cc.links += cc.n_off[q];
    cc.n_cc += T.n_sizes[q] * cc.n_off[q];
  }
  return cc;
}

std::pair<double, double> delays_from_bandwidth(const ChannelCounts& counts,
                                                const BandwidthModel& model,
                                                double b_cp, double b_cc) {
  if (!(b_cp > 0.0) || !(b_cc > 0.0)) {
    throw std::invalid_argument("delays_from_bandwidth: bandwidth must be positive");
  }
  const double tau_d = 2.0 * model.kappa * counts.n_cp / b_cp + model.tau_dpr;
  const double tau_c = model.kappa * counts.n_cc / b_cc + model.tau_cpr;
  return {tau_d, tau_c};
}

CostBreakdown cost_breakdown(double tau_d, double tau_o,
                             const ChannelCounts& counts,
                             const BandwidthModel& model) {
  CostBreakdown cb;
  cb.n_cp = counts.n_cp;
  cb.n_cc = counts.n_cc;
  cb.tau_dtr = tau_d - model.tau_dpr;
  cb.tau_ctr = tau_o - tau_d - model.tau_cpr;
  if (!(cb.tau_dtr > 0.0) || !(cb.tau_ctr > 0.0)) {
    std::ostringstream os;
    os << "delay at or below propagation floor (tau_dtr=" << cb.tau_dtr
       << ", tau_ctr=" << cb.tau_ctr << ")";
    throw InfeasibleDelayError(os.str());
  }
  cb.S_BW = 2.0 * model.m_cp * counts.n_cp / cb.tau_dtr +
            model.m_cc * counts.n_cc / cb.tau_ctr;
  return cb;
}

double sbw(double tau_d, double tau_o, const ChannelCounts& counts,
           const BandwidthModel& model) {
  return cost_breakdown(tau_d, tau_o, counts, model).S_BW;
}

SbwBaseline make_baseline(double tau_o, double c, const ChannelCounts& counts,
                          const BandwidthModel& model) {
  return {tau_o, c, counts.n_cp, counts.n_cc,
          sbw(c * tau_o, tau_o, counts, model)};
}

namespace {

Quadratic minus(const Quadratic& x, const Quadratic& y) {
  return {x.a - y.a, x.b - y.b, x.c - y.c};
}

}  // namespace

SbwQuadraticForm delta_sbw_c_coeffs(const SbwBaseline& s,
                                    const BandwidthModel& model) {
  const double t = s.tau_o, a = model.tau_dpr, b = model.tau_cpr, S = s.S_ref;
  const double cp = 2.0 * model.m_cp * s.n_cp, cc = model.m_cc * s.n_cc;
  if (!(s.c * t > a) || !((1.0 - s.c) * t > b)) {
    throw InfeasibleDelayError("delta_sbw_c_coeffs: baseline infeasible");
  }
  SbwQuadraticForm f;
  f.numerator = {S * t * t, t * (-S * (t + a - b) - cp + cc),
                 (S * a + cp) * (t - b) - cc * a};
  f.denominator = {-t * t, t * (t + a - b), -a * (t - b)};
  f.difference = minus(f.numerator, f.denominator);
  return f;
}

SbwQuadraticForm delta_sbw_tau_coeffs(const SbwBaseline& s,
                                      const BandwidthModel& model) {
  const double c = s.c, cb = 1.0 - c, a = model.tau_dpr, b = model.tau_cpr;
  const double S = s.S_ref;
  const double cp = 2.0 * model.m_cp * s.n_cp, cc = model.m_cc * s.n_cc;
  if (!(c * s.tau_o > a) || !(cb * s.tau_o > b)) {
    throw InfeasibleDelayError("delta_sbw_tau_coeffs: baseline infeasible");
  }
  SbwQuadraticForm f;
  f.numerator = {-S * c * cb, cp * cb + cc * c + S * (c * b + cb * a),
                 -(S * a * b + cp * b + cc * a)};
  f.denominator = {c * cb, -(c * b + cb * a), a * b};
  f.difference = minus(f.numerator, f.denominator);
  return f;
}

std::pair<double, double> c_domain(double tau_o, const BandwidthModel& model) {
  return {model.tau_dpr / tau_o, 1.0 - model.tau_cpr / tau_o};
}

double c_min(const Quadratic& q, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("c_min: empty feasible interval");
  if (!(q.a > 0.0)) throw std::invalid_argument("c_min: quadratic not convex");
  const double v = -q.b / (2.0 * q.a);
  const double pad = 1e-9 * (hi - lo);
  return std::clamp(v, lo + pad, hi - pad);
}

double sbw_minimizing_ratio(double tau_o, const ChannelCounts& counts,
                            const BandwidthModel& model) {
  const double a = model.tau_dpr, b = model.tau_cpr;
  const double sp = std::sqrt(2.0 * model.m_cp * counts.n_cp);
  const double sc = std::sqrt(model.m_cc * counts.n_cc);
  const auto [lo, hi] = c_domain(tau_o, model);
  if (!(hi > lo)) throw std::invalid_argument("sbw_minimizing_ratio: empty domain");
  const double pad = 1e-9 * (hi - lo);
  if (sp + sc == 0.0) return 0.5 * (lo + hi);
  // stationarity: sp ((1-c) tau - b) = sc (c tau - a)
  const double c = (sp * (tau_o - b) + sc * a) / (tau_o * (sp + sc));
  return std::clamp(c, lo + pad, hi - pad);
}

std::pair<double, double> sublevel_interval(const Quadratic& q, double x0,
                                            double lo, double hi) {
  double left = lo, right = hi;
  const double disc = q.b * q.b - 4.0 * q.a * q.c;
  if (q.a == 0.0) {
    if (q.b > 0.0) right = std::min(right, -q.c / q.b);
    else if (q.b < 0.0) left = std::max(left, -q.c / q.b);
  } else if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    // numerically stable roots
    const double t = -0.5 * (q.b + std::copysign(sq, q.b));
    double r1 = t / q.a, r2 = (t != 0.0) ? q.c / t : r1;
    if (r1 > r2) std::swap(r1, r2);
    if (q.a > 0.0) {
      left = std::max(left, r1);
      right = std::min(right, r2);
    } else if (x0 >= r2) {
      left = std::max(left, r2);
    } else {
      right = std::min(right, r1);
    }
  } else if (q.a > 0.0) {
    return {x0, x0};  // no sublevel points
  }
  left = std::min(left, x0);
  right = std::max(right, x0);
  return {left, right};
}

}  // namespace dcd
