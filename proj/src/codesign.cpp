#include "dcd/codesign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

namespace dcd {


namespace {

constexpr double kVerifyTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SupportVar {
  int i = 0;
  int j = 0;
  bool delayed = false;  // routed through the tau_d path
};

std::vector<SupportVar> support_vars(const MatrixXd& K, const GainMasks& masks) {
  std::vector<SupportVar> v;
  for (int j = 0; j < K.cols(); ++j)
    for (int i = 0; i < K.rows(); ++i)
      if (std::abs(K(i, j)) >= kZeroThreshold) v.push_back({i, j, masks.I_d(i, j) > 0.5});
  return v;
}

// R with R^T R = G, null directions dropped.
MatrixXd gram_factor(const MatrixXd& G) {
  const int n = static_cast<int>(G.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (G + G.transpose()));
  const VectorXd& ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int k = 0; k < n; ++k)
    if (ev(k) > 1e-13 * top) keep.push_back(k);
  if (keep.empty()) return MatrixXd::Zero(1, n);
  MatrixXd R(keep.size(), n);
  for (std::size_t r = 0; r < keep.size(); ++r)
    R.row(r) = std::sqrt(ev(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
  return R;
}

// Places the columns of R at the given offset of an nv-wide matrix.
MatrixXd embed(const MatrixXd& R, int offset, int nv) {
  MatrixXd A = MatrixXd::Zero(R.rows(), nv);
  A.middleCols(offset, R.cols()) = R;
  return A;
}

VectorXd unit(int nv, int k) {
  VectorXd e = VectorXd::Zero(nv);
  e(k) = 1.0;
  return e;
}

void add_norm_bound(ConicProblem& p, const MatrixXd& A, int t_index,
                    double rhs_const) {
  SocConstraint s;
  s.A = A;
  s.b = VectorXd::Zero(A.rows());
  s.c = t_index >= 0 ? unit(p.nv, t_index) : VectorXd::Zero(p.nv);
  s.d = rhs_const;
  p.socs.push_back(std::move(s));
}

double spectral_norm(const MatrixXd& X) {
  if (X.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(X);
  return svd.singularValues()(0);
}

// Moves the endpoints of [lo, hi] toward x0 by a relative hair so that
// roots of the constraint quadratic are not hit exactly.
std::pair<double, double> pull_in(std::pair<double, double> iv, double x0) {
  const double eps = 1e-9;
  if (std::isfinite(iv.first)) iv.first += eps * (x0 - iv.first);
  if (std::isfinite(iv.second)) iv.second -= eps * (iv.second - x0);
  return iv;
}

std::pair<double, double> tau_domain(double c, const BandwidthModel& bw) {
  const double lo = std::max(bw.tau_dpr / c, bw.tau_cpr / (1.0 - c));
  return {lo * (1.0 + 1e-9), kInf};
}

// Columns of Z are vectorized matrices; real Frobenius Gram.
MatrixXd real_gram(const MatrixXd& Z) { return Z.transpose() * Z; }

SdpResult finish(SdpResult r, const CodesignContext& ctx) {
  try {
    const DesignEval e = evaluate_design(*ctx.plant, r.K, ctx.masks, r.tau_o,
                                         r.c, *ctx.basis);
    r.J = e.sol.J;
  } catch (const StabilityError&) {
    r.J = kInf;
  }
  return r;
}

}  // namespace

CodesignContext CodesignContext::make(const PlantModel& plant,
                                      const SpectralBasis& basis,
                                      const Topology& topology,
                                      const BandwidthModel& bw) {
  CodesignContext ctx;
  ctx.plant = &plant;
  ctx.basis = &basis;
  ctx.topology = topology;
  ctx.masks = build_masks(topology);
  ctx.bw = bw;
  return ctx;
}

LoopContext CodesignContext::loop_context(double tau_o, double c) const {
  LoopContext lc;
  lc.plant = plant;
  lc.masks = masks;
  lc.tau_o = tau_o;
  lc.c = c;
  lc.basis = basis;
  return lc;
}

OuterState make_outer_state(const CodesignContext& ctx, const MatrixXd& K,
                            double tau_o, double c) {
  OuterState s;
  s.K = K;
  s.tau_o = tau_o;
  s.c = c;
  s.loop = build_closed_loop(*ctx.plant, K, ctx.masks, tau_o, c, *ctx.basis);
  s.sol = h2_norm(s.loop, *ctx.plant);
  s.P = s.sol.P;
  s.L = s.sol.L;
  s.J = s.sol.J;
  s.abscissa = s.sol.abscissa;
  s.counts = channel_counts(K, ctx.topology);
  s.S_BW = sbw(c * tau_o, tau_o, s.counts, ctx.bw);
  return s;
}

Verification verify_tuple(const CodesignContext& ctx, const OuterState& base,
                          const MatrixXd& K, double tau_o, double c) {
  Verification v;
  if (!(tau_o > 0.0) || !(c > 0.0) || !(c < 1.0)) {
    v.reason = "delay tuple outside (0, 1) ratio range";
    return v;
  }
  try {
    v.abscissa = loop_abscissa(*ctx.plant, K, ctx.masks, tau_o, c, *ctx.basis);
  } catch (const std::exception& e) {
    v.reason = e.what();
    return v;
  }
  if (!(v.abscissa < -kHurwitzMargin)) {
    v.reason = "abscissa " + std::to_string(v.abscissa);
    return v;
  }
  if (ctx.constraint == DelayConstraint::kBandwidth) {
    const ChannelCounts cnt = channel_counts(K, ctx.topology);
    double S = 0.0;
    try {
      S = sbw(c * tau_o, tau_o, cnt, ctx.bw);
    } catch (const std::exception& e) {
      v.reason = e.what();
      return v;
    }
    v.delta_S = S - base.S_BW;
    if (v.delta_S > kVerifyTol) {
      v.reason = "bandwidth cost increased by " + std::to_string(v.delta_S);
      return v;
    }
    if (ctx.bw.S_b > 0.0 && S > ctx.bw.S_b + kVerifyTol) {
      v.reason = "bandwidth budget exceeded";
      return v;
    }
  } else {
    const double moved =
        std::abs((c * tau_o - base.c * base.tau_o) + (tau_o - base.tau_o));
    v.delta_S = moved - ctx.epsilon;
    if (v.delta_S > kVerifyTol) {
      v.reason = "epsilon ball violated by " + std::to_string(v.delta_S);
      return v;
    }
  }
  v.ok = true;
  return v;
}

std::pair<double, double> tau_interval(const CodesignContext& ctx,
                                       const OuterState& base) {
  auto dom = tau_domain(base.c, ctx.bw);
  if (ctx.constraint == DelayConstraint::kEpsilonBall) {
    const double r = ctx.epsilon / (1.0 + base.c);
    return {std::max(dom.first, base.tau_o - r), base.tau_o + r};
  }
  SbwBaseline b = make_baseline(base.tau_o, base.c, base.counts, ctx.bw);
  b.S_ref = base.S_BW;
  const SbwQuadraticForm q = delta_sbw_tau_coeffs(b, ctx.bw);
  dom.first = std::min(dom.first, base.tau_o);
  return pull_in(sublevel_interval(q.numerator, base.tau_o, dom.first, dom.second),
                 base.tau_o);
}

std::pair<double, double> c_interval(const CodesignContext& ctx,
                                     const OuterState& base) {
  auto dom = c_domain(base.tau_o, ctx.bw);
  const double pad = 1e-9 * (dom.second - dom.first);
  dom.first = std::min(dom.first + pad, base.c);
  dom.second = std::max(dom.second - pad, base.c);
  if (ctx.constraint == DelayConstraint::kEpsilonBall) {
    const double r = ctx.epsilon / base.tau_o;
    return {std::max(dom.first, base.c - r), std::min(dom.second, base.c + r)};
  }
  SbwBaseline b = make_baseline(base.tau_o, base.c, base.counts, ctx.bw);
  b.S_ref = base.S_BW;
  const SbwQuadraticForm q = delta_sbw_c_coeffs(b, ctx.bw);
  return pull_in(sublevel_interval(q.numerator, base.c, dom.first, dom.second),
                 base.c);
}

// ---------------------------------------------------------------- (K, tau_o)

SdpResult sdp_ktau(const OuterState& state, const MatrixXd& U,
                   const CodesignContext& ctx, const SdpConfigKTau& cfg) {
  const PlantModel& plant = *ctx.plant;
  const SpectralBasis& basis = *ctx.basis;
  const DiscretizedLoop& lp = state.loop;
  const int nd = basis.dim();
  const auto vars = support_vars(state.K, ctx.masks);
  const int ns = static_cast<int>(vars.size());

  const double w0 = 1.0 / state.tau_o;
  const auto [tlo, thi] = tau_interval(ctx, state);
  const double dw_lo = (std::isfinite(thi) ? 1.0 / thi : 0.0) - w0;
  const double dw_hi = 1.0 / tlo - w0;
  const bool omega_free = dw_hi - dw_lo > 1e-12 * w0;

  // dP = sum_k z_k Psi_k with A*^T Psi_k + Psi_k A* + E_k = 0
  const LyapunovSolver lyap(lp.A_cl);
  const MatrixXd& Us = lyap.schur_basis();
  MatrixXd V(nd, ns);
  for (int k = 0; k < ns; ++k)
    V.col(k) = vars[k].delayed ? lp.N_d.col(vars[k].j) : lp.N_o.col(vars[k].j);
  const MatrixXd& G = state.sol.G;
  const MatrixXd LV = state.L * V;

  const int nb = ns + (omega_free ? 1 : 0) + 1;
  const int iw = omega_free ? ns : -1;
  const int ia = nb - 1;
  MatrixXd Z(static_cast<Eigen::Index>(nd) * nd, nb);
  VectorXd lin(nb);
  {
    const MatrixXd Ua = Us.transpose() * V;
    const MatrixXd Ug = Us.transpose() * G.transpose();
    for (int k = 0; k < ns; ++k) {
      const VectorXd a = Ua.col(k);
      const VectorXd g = Ug.col(vars[k].i);
      const MatrixXd C = a * g.transpose() + g * a.transpose();
      const MatrixXd Y = lyap.solve_observability_schur(C);
      Z.col(k) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
      lin(k) = 2.0 * G.row(vars[k].i).dot(LV.col(k));
    }
    if (omega_free) {
      const MatrixXd Ew = basis.Lambda.transpose() * state.P + state.P * basis.Lambda;
      const MatrixXd Y = lyap.solve_observability_schur(lyap.to_schur(Ew));
      Z.col(iw) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
      lin(iw) = (state.L * Ew).trace();
    }
    const MatrixXd Y = lyap.solve_observability_schur(
        MatrixXd::Identity(nd, nd));
    Z.col(ia) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
    lin(ia) = state.L.trace();
  }
  const MatrixXd gram = real_gram(Z);
  const MatrixXd Rp = gram_factor(gram);
  const double psi_alpha = std::sqrt(gram(ia, ia));
  const double lam = spectral_norm(basis.D);

  const MatrixXd VtV = V.transpose() * V;
  const MatrixXd BtB = plant.B.transpose() * plant.B;
  MatrixXd gB(ns, ns), gR(ns, ns);
  for (int k = 0; k < ns; ++k)
    for (int l = 0; l < ns; ++l) {
      gB(k, l) = BtB(vars[k].i, vars[l].i) * VtV(k, l);
      gR(k, l) = plant.R(vars[k].i, vars[l].i) * VtV(k, l);
    }
  const MatrixXd RB = ns > 0 ? gram_factor(gB) : MatrixXd::Zero(1, 0);
  const MatrixXd RR = ns > 0 ? gram_factor(gR) : MatrixXd::Zero(1, 0);

  double zeta1 = (cfg.zeta1 > 0.0 ? cfg.zeta1 : 0.1 * w0) * cfg.trust_scale;
  double zeta2 = (cfg.zeta2 > 0.0 ? cfg.zeta2 : 0.1 * state.P.norm()) * cfg.trust_scale;
  if (cfg.cap_zeta1) zeta1 = std::min(zeta1, 0.25 / (lam * psi_alpha));

  SdpResult res;
  res.status = SdpStatus::kInfeasible;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    res.attempts = attempt + 1;

    VectorXd z;
    double predicted = 0.0;
    bool solved = false;
    // every rung gives a certified bound; keep the lowest
    for (int rung = 0; rung < std::max(1, cfg.ladder); ++rung) {
      const double z1 = zeta1 * std::pow(cfg.ladder_ratio, rung);
      const double z2 = zeta2 * std::pow(cfg.ladder_ratio, rung);
      if (!cfg.full_lmi) {
        const int it1 = nb, it2 = nb + 1, is = nb + 2, nv = nb + 3;
        ConicProblem p(nv);
        for (int k = 0; k < ns; ++k) {
          p.H(k, k) = ctx.rho;
          p.f(k) = lin(k) + ctx.rho * (state.K(vars[k].i, vars[k].j) - U(vars[k].i, vars[k].j));
        }
        if (omega_free) {
          p.f(iw) = lin(iw);
          p.add_bounds(iw, std::max(dw_lo, -z1), std::min(dw_hi, z1));
        }
        p.f(ia) = lin(ia);
        add_norm_bound(p, embed(Rp, 0, nv), -1, z2);
        add_norm_bound(p, embed(lam * Rp, 0, nv), it1, 0.0);
        add_norm_bound(p, embed(RB, 0, nv), it2, 0.0);
        p.add_squared_norm(embed(RR, 0, nv), VectorXd::Zero(RR.rows()), unit(nv, is));
        VectorXd g = VectorXd::Zero(nv);
        g(ia) = -1.0;
        g(it1) = 2.0 * z1;
        g(it2) = 2.0 * z2;
        g(is) = 1.0;
        p.add_linear(g, 0.0);

        VectorXd z0 = VectorXd::Zero(nv);
        const double a0 = 0.5 * z2 / psi_alpha;
        z0(ia) = a0;
        z0(it1) = 1.1 * lam * a0 * psi_alpha + 1e-12;
        const double left = a0 - 2.0 * z1 * z0(it1);
        z0(it2) = std::max(left, 1e-12) / (8.0 * z2);
        z0(is) = std::max(left, 1e-12) / 4.0;
        const ConicResult cr = solve_conic(p, &z0, cfg.solver);
        if (cr.status != ConicStatus::kInfeasible) {
          if (!solved || state.J + cr.objective < predicted) {
            z = cr.z;
            predicted = state.J + cr.objective;
            res.trust1 = z1;
            res.trust2 = z2;
          }
          solved = true;
        } else {
          res.message = cr.message;
        }
      } else {
        // explicit symmetric dP with the Lyapunov inequality as a PSD block
        const int np = nd * (nd + 1) / 2;
        const int ip = nb, it1 = nb + np, it2 = it1 + 1, is = it1 + 2, nv = it1 + 3;
        ConicProblem p(nv);
        LmiConstraint lmi;
        lmi.F0 = MatrixXd::Zero(nd, nd);
        lmi.F.assign(nv, MatrixXd::Zero(nd, nd));
        for (int k = 0; k < ns; ++k) {
          const VectorXd g = G.row(vars[k].i).transpose();
          lmi.F[k] = V.col(k) * g.transpose() + g * V.col(k).transpose();
          p.H(k, k) = ctx.rho;
          p.f(k) = ctx.rho * (state.K(vars[k].i, vars[k].j) - U(vars[k].i, vars[k].j));
        }
        if (omega_free) {
          lmi.F[iw] = basis.Lambda.transpose() * state.P + state.P * basis.Lambda;
          p.add_bounds(iw, std::max(dw_lo, -z1), std::min(dw_hi, z1));
        }
        lmi.F[ia] = MatrixXd::Identity(nd, nd);
        const MatrixXd BBw = lp.calB_w * lp.calB_w.transpose();
        MatrixXd Pvec = MatrixXd::Zero(np, nv);
        int q = 0;
        for (int b = 0; b < nd; ++b)
          for (int a = b; a < nd; ++a, ++q) {
            MatrixXd S = MatrixXd::Zero(nd, nd);
            S(a, b) = 1.0;
            S(b, a) = 1.0;
            lmi.F[ip + q] = lp.A_cl.transpose() * S + S * lp.A_cl;
            p.f(ip + q) = (BBw.cwiseProduct(S)).sum();
            Pvec(q, ip + q) = a == b ? 1.0 : std::sqrt(2.0);
          }
        p.lmis.push_back(std::move(lmi));
        add_norm_bound(p, Pvec, -1, z2);
        add_norm_bound(p, lam * Pvec, it1, 0.0);
        add_norm_bound(p, embed(RB, 0, nv), it2, 0.0);
        p.add_squared_norm(embed(RR, 0, nv), VectorXd::Zero(RR.rows()), unit(nv, is));
        VectorXd g = VectorXd::Zero(nv);
        g(ia) = -1.0;
        g(it1) = 2.0 * z1;
        g(it2) = 2.0 * z2;
        g(is) = 1.0;
        p.add_linear(g, 0.0);
        // start from the eliminated solution for alpha alone
        VectorXd z0 = VectorXd::Zero(nv);
        const double a0 = 0.5 * z2 / psi_alpha;
        z0(ia) = a0;
        const MatrixXd Pa = lyap.solve_observability(0.999 * a0 * MatrixXd::Identity(nd, nd));
        q = 0;
        for (int b = 0; b < nd; ++b)
          for (int a = b; a < nd; ++a, ++q) z0(ip + q) = Pa(a, b);
        z0(it1) = 1.1 * lam * Pa.norm() + 1e-12;
        const double left = a0 - 2.0 * z1 * z0(it1);
        z0(it2) = std::max(left, 1e-12) / (8.0 * z2);
        z0(is) = std::max(left, 1e-12) / 4.0;
        const ConicResult cr = solve_conic(p, &z0, cfg.solver);
        if (cr.status != ConicStatus::kInfeasible) {
          if (!solved || state.J + cr.objective < predicted) {
            z = cr.z;
            predicted = state.J + cr.objective;
            res.trust1 = z1;
            res.trust2 = z2;
          }
          solved = true;
        } else {
          res.message = cr.message;
        }
      }

    }

    if (solved) {
      res.K = state.K;
      for (int k = 0; k < ns; ++k) res.K(vars[k].i, vars[k].j) += z(k);
      res.tau_o = omega_free ? 1.0 / (w0 + z(iw)) : state.tau_o;
      res.c = state.c;
      res.predicted = predicted;
      const Verification v = verify_tuple(ctx, state, res.K, res.tau_o, res.c);
      res.abscissa = v.abscissa;
      res.delta_S = v.delta_S;
      const bool injected = attempt < cfg.inject_verification_failures;
      if (v.ok && !injected) {
        res.status = SdpStatus::kAccepted;
        res.message.clear();
        return finish(res, ctx);
      }
      ++res.verification_failures;
      res.status = SdpStatus::kVerificationFailed;
      res.message = injected ? "injected verification failure" : v.reason;
    } else {
      res.status = SdpStatus::kInfeasible;
    }
    zeta1 *= 0.5;
    zeta2 *= 0.5;
  }
  return res;
}

// ---------------------------------------------------------------- (K, c)

SdpResult sdp_kc(const OuterState& state, const MatrixXd& U,
                 const CodesignContext& ctx, const AffineNdApprox& affine,
                 const SdpConfigKC& cfg) {
  const PlantModel& plant = *ctx.plant;
  const SpectralBasis& basis = *ctx.basis;
  const DiscretizedLoop& lp = state.loop;
  const int nd = basis.dim();
  const int n = basis.n;

  auto [clo, chi] = c_interval(ctx, state);
  SdpResult res;

  if (cfg.allow_shortcut && ctx.constraint == DelayConstraint::kBandwidth) {
    const double cm = sbw_minimizing_ratio(state.tau_o, state.counts, ctx.bw);
    if (cm >= clo && cm <= chi) {
      const Verification v = verify_tuple(ctx, state, state.K, state.tau_o, cm);
      if (v.ok) {
        res.status = SdpStatus::kAccepted;
        res.shortcut = true;
        res.K = state.K;
        res.tau_o = state.tau_o;
        res.c = cm;
        res.abscissa = v.abscissa;
        res.delta_S = v.delta_S;
        res.attempts = 0;
        return finish(res, ctx);
      }
    }
  }

  const int iv = cfg.interval >= 0 ? cfg.interval : affine.interval_of(state.c);
  const double ci = affine.breakpoints(iv), ci1 = affine.breakpoints(iv + 1);
  clo = std::max(clo, std::min(ci, state.c));
  chi = std::min(chi, std::max(ci1, state.c));
  const bool c_free = chi - clo > 1e-12;

  const auto vars = support_vars(state.K, ctx.masks);
  const int ns = static_cast<int>(vars.size());
  MatrixXd V(nd, ns);
  for (int k = 0; k < ns; ++k)
    V.col(k) = vars[k].delayed ? lp.N_d.col(vars[k].j) : lp.N_o.col(vars[k].j);

  const MatrixXd Sn = Eigen::kroneckerProduct(affine.slope(iv),
                                              MatrixXd::Identity(n, n)).eval();
  const MatrixXd A1c = -lp.calB * lp.K_d * Sn.transpose();

  const LyapunovSolver lyap(lp.A_cl);
  const MatrixXd& Us = lyap.schur_basis();
  const int nb = ns + (c_free ? 1 : 0) + 1;
  const int ic = c_free ? ns : -1;
  const int ia = nb - 1;
  MatrixXd Z(static_cast<Eigen::Index>(nd) * nd, nb);
  VectorXd lin(nb);
  {
    const MatrixXd LV = state.L * V;
    const MatrixXd Ub = Us.transpose() * lp.calB;
    const MatrixXd Ul = Us.transpose() * LV;
    const MatrixXd PB = state.P * lp.calB;
    for (int k = 0; k < ns; ++k) {
      const VectorXd a = Ub.col(vars[k].i);
      const VectorXd l = Ul.col(k);
      const MatrixXd C = -(a * l.transpose() + l * a.transpose());
      const MatrixXd Y = lyap.solve_controllability_schur(C);
      Z.col(k) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
      lin(k) = -2.0 * PB.col(vars[k].i).dot(LV.col(k));
    }
    if (c_free) {
      const MatrixXd Ec = A1c * state.L + state.L * A1c.transpose();
      const MatrixXd Y = lyap.solve_controllability_schur(lyap.to_schur(Ec));
      Z.col(ic) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
      lin(ic) = (state.P * Ec).trace();
    }
    const MatrixXd Y = lyap.solve_controllability_schur(MatrixXd::Identity(nd, nd));
    Z.col(ia) = Eigen::Map<const VectorXd>(Y.data(), Y.size());
    lin(ia) = state.P.trace();
  }
  const MatrixXd gram = real_gram(Z);
  const MatrixXd Rl = gram_factor(gram);
  const double omega_alpha = std::sqrt(gram(ia, ia));

  const MatrixXd VtV = V.transpose() * V;
  const MatrixXd BtB = plant.B.transpose() * plant.B;
  MatrixXd gB(ns, ns), gD(ns, ns);
  for (int k = 0; k < ns; ++k)
    for (int l = 0; l < ns; ++l) {
      gB(k, l) = BtB(vars[k].i, vars[l].i) * VtV(k, l);
      gD(k, l) = (vars[k].delayed && vars[l].delayed && vars[k].j == vars[l].j)
                     ? BtB(vars[k].i, vars[l].i) : 0.0;
    }
  const MatrixXd RB = ns > 0 ? gram_factor(gB) : MatrixXd::Zero(1, 0);
  const MatrixXd RD = ns > 0 ? gram_factor(gD) : MatrixXd::Zero(1, 0);
  const double kappa_c = A1c.norm();
  const double L_norm = spectral_norm(state.L);

  double S_bound = cfg.S_bound;
  if (!(S_bound > 0.0)) {
    S_bound = (1.0 + cfg.margin) * std::max(delay_weights(basis, ci).norm(),
                                            delay_weights(basis, ci1).norm());
  }
  double beta = (cfg.beta > 0.0 ? cfg.beta : 0.1 * state.L.norm()) * cfg.trust_scale;
  double c_radius = (chi - clo) * cfg.trust_scale;

  res.status = SdpStatus::kInfeasible;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    res.attempts = attempt + 1;
    res.trust2 = S_bound;
    VectorXd z;
    double predicted = 0.0;
    bool solved = false;
    for (int rung = 0; rung < std::max(1, cfg.ladder); ++rung) {
      const double bt = beta * std::pow(cfg.ladder_ratio, rung);
      const double cr_rad = c_radius;
      const int it1 = nb, it2 = nb + 1, it3 = nb + 2, nv = nb + 3;
      ConicProblem p(nv);
      for (int k = 0; k < ns; ++k) {
        p.H(k, k) = ctx.rho;
        p.f(k) = lin(k) + ctx.rho * (state.K(vars[k].i, vars[k].j) - U(vars[k].i, vars[k].j));
      }
      if (c_free) {
        p.f(ic) = lin(ic);
        p.add_bounds(ic, std::max(clo - state.c, -cr_rad),
                     std::min(chi - state.c, cr_rad));
        VectorXd g = VectorXd::Zero(nv);
        g(ic) = kappa_c;
        g(it3) = -1.0;
        p.add_linear(g, 0.0);
        g(ic) = -kappa_c;
        p.add_linear(g, 0.0);
      } else {
        p.add_bounds(it3, -1.0, 1.0);
      }
      p.f(ia) = lin(ia);
      add_norm_bound(p, embed(Rl, 0, nv), -1, bt);
      add_norm_bound(p, embed(RB, 0, nv), it1, 0.0);
      add_norm_bound(p, embed(RD, 0, nv), it2, 0.0);
      const double w2 = 2.0 * bt * S_bound + 2.0 * S_bound * L_norm;
      VectorXd g = VectorXd::Zero(nv);
      g(ia) = -1.0;
      g(it1) = 2.0 * bt;
      g(it2) = w2;
      g(it3) = 2.0 * bt;
      p.add_linear(g, 0.0);

      VectorXd z0 = VectorXd::Zero(nv);
      const double a0 = 0.5 * bt / omega_alpha;
      z0(ia) = a0;
      z0(it1) = a0 / (8.0 * bt);
      z0(it2) = a0 / (4.0 * w2);
      z0(it3) = c_free ? a0 / (8.0 * bt) : 0.0;
      const ConicResult cr = solve_conic(p, &z0, cfg.solver);
      if (cr.status != ConicStatus::kInfeasible) {
        if (!solved || state.J + cr.objective < predicted) {
          z = cr.z;
          predicted = state.J + cr.objective;
          res.trust1 = bt;
        }
        solved = true;
      } else {
        res.message = cr.message;
      }
    }
    if (solved) {
      res.K = state.K;
      for (int k = 0; k < ns; ++k) res.K(vars[k].i, vars[k].j) += z(k);
      res.tau_o = state.tau_o;
      res.c = c_free ? state.c + z(ic) : state.c;
      res.predicted = predicted;
      const Verification v = verify_tuple(ctx, state, res.K, res.tau_o, res.c);
      res.abscissa = v.abscissa;
      res.delta_S = v.delta_S;
      const bool injected = attempt < cfg.inject_verification_failures;
      if (v.ok && !injected) {
        res.status = SdpStatus::kAccepted;
        res.message.clear();
        return finish(res, ctx);
      }
      ++res.verification_failures;
      res.status = SdpStatus::kVerificationFailed;
      res.message = injected ? "injected verification failure" : v.reason;
    } else {
      res.status = SdpStatus::kInfeasible;
    }
    beta *= 0.5;
    c_radius *= 0.5;
  }
  return res;
}

// ---------------------------------------------------------------- drivers

std::string trace_header() {
  return "gamma,round,nnz_K,J,tau_o,c,tau_d,S_BW,n_cp,n_cc,abscissa,status";
}

std::string trace_line(const TraceRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.10g,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%d,%.6g,",
                r.gamma, r.round, r.nnz, r.J, r.tau_o, r.c, r.tau_d, r.S_BW,
                r.n_cp, r.n_cc, r.abscissa);
  return std::string(buf) + r.status;
}

namespace {

TraceRow row_of(const OuterState& s, double gamma, int round,
                const std::string& status) {
  TraceRow r;
  r.gamma = gamma;
  r.round = round;
  r.nnz = count_nonzero(s.K);
  r.J = s.J;
  r.tau_o = s.tau_o;
  r.c = s.c;
  r.tau_d = s.c * s.tau_o;
  r.S_BW = s.S_BW;
  r.n_cp = s.counts.n_cp;
  r.n_cc = s.counts.n_cc;
  r.abscissa = s.abscissa;
  r.status = status;
  return r;
}

bool try_state(const CodesignContext& ctx, const MatrixXd& K, double tau_o,
               double c, OuterState& out) {
  try {
    out = make_outer_state(ctx, K, tau_o, c);
    return out.abscissa < -kHurwitzMargin;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

DesignTrace algorithm1(const CodesignContext& ctx, const MatrixXd& K0,
                       double tau_o0, double c0, const Algorithm1Config& cfg) {
  DesignTrace trace;
  OuterState st = make_outer_state(ctx, K0, tau_o0, c0);
  if (ctx.bw.S_b > 0.0 && st.S_BW > ctx.bw.S_b + kVerifyTol) {
    throw std::invalid_argument("algorithm1: initial design exceeds the bandwidth budget");
  }
  const AffineNdApprox affine = fit_affine_Nd(*ctx.basis, cfg.k_c);
  AdmmState adm;
  adm.K = K0;
  adm.F = K0;
  adm.Theta = MatrixXd::Zero(K0.rows(), K0.cols());
  adm.W = MatrixXd::Ones(K0.rows(), K0.cols());

  for (double gamma : cfg.gammas) {
    for (int round = 0; round < cfg.rounds; ++round) {
      std::string status;
      const MatrixXd U = adm.F - adm.Theta / ctx.rho;
      OuterState cand = st;
      if (cfg.mode == OuterMode::kDelayDesign) {
        const SdpResult a = sdp_ktau(cand, U, ctx, cfg.ktau);
        if (a.status == SdpStatus::kAccepted &&
            try_state(ctx, a.K, a.tau_o, cand.c, cand)) {
        } else {
          status += "ktau_soft_fail;";
        }
        const SdpResult b = sdp_kc(cand, U, ctx, affine, cfg.kc);
        OuterState next;
        if (b.status == SdpStatus::kAccepted &&
            try_state(ctx, b.K, cand.tau_o, b.c, next)) {
          cand = next;
          if (b.shortcut) status += "c_min;";
        } else {
          status += "kc_soft_fail;";
        }
      }

      AdmmConfig ac = cfg.admm;
      ac.gamma = gamma;
      ac.rho = ctx.rho;
      AdmmState init = adm;
      init.K = cand.K;
      const LoopContext lc = ctx.loop_context(cand.tau_o, cand.c);
      const AdmmResult ar = admm_loop(init, lc, ac);
      adm = ar.state;

      OuterState next;
      bool have = try_state(ctx, adm.F, cand.tau_o, cand.c, next);
      if (!have) {
        have = try_state(ctx, adm.K, cand.tau_o, cand.c, next);
        if (have) status += "K_not_F;";
      }
      bool accept = have;
      if (!have) status += "admm_unstable;";
      if (accept && ctx.constraint == DelayConstraint::kBandwidth) {
        if (next.counts.n_cp > st.counts.n_cp || next.counts.n_cc > st.counts.n_cc ||
            next.S_BW > st.S_BW + kVerifyTol) {
          accept = false;
          status += "counts_increase;";
        }
      }
      if (accept) {
        st = next;
      } else if (cand.K.size() > 0 && cfg.mode == OuterMode::kDelayDesign &&
                 cand.S_BW <= st.S_BW + kVerifyTol) {
        // keep the verified SDP step even if the sparse update is rejected
        st = cand;
      }
      adm.W = reweight(adm.F, ac.epsilon_w);
      if (status.empty()) status = "ok";
      trace.rows.push_back(row_of(st, gamma, round, status));
    }
  }
  trace.final_state = st;
  return trace;
}

CaseATrace case_a_mode(CodesignContext ctx, const MatrixXd& K0, double tau_o0,
                       double c0, const CaseAConfig& cfg) {
  ctx.constraint = DelayConstraint::kEpsilonBall;
  ctx.epsilon = cfg.epsilon > 0.0 ? cfg.epsilon : 0.05 * tau_o0;
  CaseATrace trace;
  OuterState st = make_outer_state(ctx, K0, tau_o0, c0);
  const AffineNdApprox affine = fit_affine_Nd(*ctx.basis, cfg.k_c);
  auto push = [&](int it, double moved, const std::string& status) {
    CaseARow r;
    r.iteration = it;
    r.J = st.J;
    r.tau_o = st.tau_o;
    r.c = st.c;
    r.total_delay = st.tau_o * (1.0 + st.c);
    r.constraint = moved;
    r.status = status;
    trace.rows.push_back(r);
  };
  push(0, 0.0, "initial");
  for (int it = 1; it <= cfg.iterations; ++it) {
    std::string status;
    double moved = 0.0;
    bool step_ok = false;
    SdpConfigKTau kt = cfg.ktau;
    for (int s = 0; s <= cfg.max_shrinks && !step_ok; ++s) {
      const SdpResult a = sdp_ktau(st, st.K, ctx, kt);
      OuterState next;
      if (a.status == SdpStatus::kAccepted && a.J <= st.J &&
          try_state(ctx, a.K, a.tau_o, st.c, next)) {
        moved = std::max(moved, std::abs((next.c * next.tau_o - st.c * st.tau_o) +
                                         (next.tau_o - st.tau_o)));
        st = next;
        step_ok = true;
      }
      kt.trust_scale *= 0.5;
    }
    status += step_ok ? "ktau;" : "ktau_hold;";
    step_ok = false;
    SdpConfigKC kc = cfg.kc;
    kc.allow_shortcut = false;
    for (int s = 0; s <= cfg.max_shrinks && !step_ok; ++s) {
      const SdpResult b = sdp_kc(st, st.K, ctx, affine, kc);
      OuterState next;
      if (b.status == SdpStatus::kAccepted && b.J <= st.J &&
          try_state(ctx, b.K, st.tau_o, b.c, next)) {
        moved = std::max(moved, std::abs((next.c * next.tau_o - st.c * st.tau_o) +
                                         (next.tau_o - st.tau_o)));
        st = next;
        step_ok = true;
      }
      kc.trust_scale *= 0.5;
    }
    status += step_ok ? "kc" : "kc_hold";
    push(it, moved, status);
  }
  trace.final_state = st;
  return trace;
}

}  // namespace dcd
