#include "dcd/sparseadmm.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/KroneckerProduct>

#include "dcd/netcost.hpp"

namespace dcd {

double phi1(double J, const MatrixXd& K, const MatrixXd& U, double rho) {
  return J + 0.5 * rho * (K - U).squaredNorm();
}

MatrixXd phi1_gradient(const DesignEval& e, const LoopContext& ctx,
                       const MatrixXd& K, const MatrixXd& U, double rho) {
  const auto g = gradients(e.loop, *ctx.plant, e.sol, *ctx.basis, ctx.masks);
  return g.dJ_dK + rho * (K - U);
}

namespace {

struct NormalOperator {
  MatrixXd R, Ld, Lo, Ldo;  // Ldo = N_d^T L N_o
  MatrixXd Id, Io;
  double rho;

  MatrixXd apply(const MatrixXd& K) const {
    const MatrixXd Kd = K.cwiseProduct(Id), Ko = K.cwiseProduct(Io);
    const MatrixXd RKd = R * Kd, RKo = R * Ko;
    return 2.0 * (RKd * Ld + RKo * Ldo.transpose()).cwiseProduct(Id) +
           2.0 * (RKd * Ldo + RKo * Lo).cwiseProduct(Io) + rho * K;
  }

  MatrixXd dense() const {
    const auto vd = Eigen::Map<const Eigen::VectorXd>(Id.data(), Id.size()).asDiagonal();
    const auto vo = Eigen::Map<const Eigen::VectorXd>(Io.data(), Io.size()).asDiagonal();
    const long nm = Id.size();
    MatrixXd H = rho * MatrixXd::Identity(nm, nm);
    H += 2.0 * (vd * Eigen::kroneckerProduct(Ld, R).eval() * vd);
    H += 2.0 * (vd * Eigen::kroneckerProduct(Ldo, R).eval() * vo);
    H += 2.0 * (vo * Eigen::kroneckerProduct(MatrixXd(Ldo.transpose()), R).eval() * vd);
    H += 2.0 * (vo * Eigen::kroneckerProduct(Lo, R).eval() * vo);
    return H;
  }
};

MatrixXd conjugate_gradient(const NormalOperator& op, const MatrixXd& rhs,
                            const MatrixXd& x0) {
  MatrixXd x = x0;
  MatrixXd r = rhs - op.apply(x);
  MatrixXd p = r;
  double rs = r.squaredNorm();
  const double stop = 1e-24 * std::max(1.0, rhs.squaredNorm());
  for (long it = 0; it < 10 * rhs.size() && rs > stop; ++it) {
    const MatrixXd Ap = op.apply(p);
    const double alpha = rs / p.cwiseProduct(Ap).sum();
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;
}

}  // namespace

MatrixXd kmin_fixed_point(const DesignEval& e, const LoopContext& ctx,
                          const MatrixXd& U, double rho, int dense_limit) {
  const auto& L = e.sol.L;
  const auto& loop = e.loop;
  NormalOperator op;
  op.R = ctx.plant->R;
  const MatrixXd LNd = L * loop.N_d, LNo = L * loop.N_o;
  op.Ld = loop.N_d.transpose() * LNd;
  op.Lo = loop.N_o.transpose() * LNo;
  op.Ldo = loop.N_d.transpose() * LNo;
  op.Id = ctx.masks.I_d;
  op.Io = ctx.masks.I_o;
  op.rho = rho;
  const MatrixXd BP = loop.calB.transpose() * e.sol.P;
  const MatrixXd mu = 2.0 * (BP * LNd).cwiseProduct(op.Id) +
                      2.0 * (BP * LNo).cwiseProduct(op.Io) + rho * U;
  const long m = U.rows(), n = U.cols();
  if (m * n <= dense_limit) {
    const MatrixXd H = op.dense();
    Eigen::VectorXd x = H.llt().solve(Eigen::Map<const Eigen::VectorXd>(mu.data(), m * n));
    return Eigen::Map<MatrixXd>(x.data(), m, n);
  }
  return conjugate_gradient(op, mu, loop.K_d + loop.K_o);
}

KMinResult k_min(const MatrixXd& K0, const MatrixXd& U, const LoopContext& ctx,
                 const AdmmConfig& cfg) {
  KMinResult res;
  res.K = K0;
  DesignEval cur = ctx.evaluate(K0);  // throws on a non-stabilizing start
  double phi = phi1(cur.sol.J, K0, U, cfg.rho);
  for (int it = 0; it < cfg.kmin_max_iter; ++it) {
    const MatrixXd grad = phi1_gradient(cur, ctx, res.K, U, cfg.rho);
    res.grad_norm = grad.norm();
    if (res.grad_norm <= cfg.grad_tol_scale * (1.0 + res.K.norm())) {
      res.converged = true;
      break;
    }
    MatrixXd dir = kmin_fixed_point(cur, ctx, U, cfg.rho, cfg.dense_limit) - res.K;
    double slope = grad.cwiseProduct(dir).sum();
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = -grad.squaredNorm();
    }
    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.armijo.max_backtracks; ++bt, s *= cfg.armijo.shrink) {
      const MatrixXd Kt = res.K + s * dir;
      try {
        DesignEval trial = ctx.evaluate(Kt);
        const double pt = phi1(trial.sol.J, Kt, U, cfg.rho);
        if (pt <= phi + cfg.armijo.slope * s * slope) {
          res.K = Kt;
          cur = std::move(trial);
          phi = pt;
          accepted = true;
          break;
        }
      } catch (const StabilityError&) {
      }
    }
    res.iterations = it + 1;
    if (!accepted) break;
  }
  res.phi = phi;
  res.J = cur.sol.J;
  if (!res.converged) {
    const MatrixXd grad = phi1_gradient(cur, ctx, res.K, U, cfg.rho);
    res.grad_norm = grad.norm();
    res.converged = res.grad_norm <= cfg.grad_tol_scale * (1.0 + res.K.norm());
  }
  return res;
}

MatrixXd f_min(const MatrixXd& V, const MatrixXd& W, double gamma, double rho) {
  MatrixXd F = MatrixXd::Zero(V.rows(), V.cols());
  for (long j = 0; j < V.cols(); ++j) {
    for (long i = 0; i < V.rows(); ++i) {
      const double a = gamma / rho * W(i, j);
      const double v = V(i, j);
      if (std::abs(v) > a) F(i, j) = (1.0 - a / std::abs(v)) * v;
    }
  }
  return F;
}

MatrixXd f_min_block(const MatrixXd& V, const Topology& T, double gamma,
                     double rho, const MatrixXd& block_weights) {
  MatrixXd F = MatrixXd::Zero(V.rows(), V.cols());
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  const int N = T.N_cn();
  for (int p = 0; p < N; ++p) {
    for (int q = 0; q < N; ++q) {
      double nrm2 = 0.0;
      for (int a = ro[p]; a < ro[p + 1]; ++a)
        for (int b = co[q]; b < co[q + 1]; ++b)
          nrm2 += V(T.U_order[a], T.X_order[b]) * V(T.U_order[a], T.X_order[b]);
      const double nrm = std::sqrt(nrm2);
      const double thr = gamma / rho * block_weights(p, q);
      if (nrm <= thr) continue;
      const double scale = 1.0 - thr / nrm;
      for (int a = ro[p]; a < ro[p + 1]; ++a)
        for (int b = co[q]; b < co[q + 1]; ++b)
          F(T.U_order[a], T.X_order[b]) = scale * V(T.U_order[a], T.X_order[b]);
    }
  }
  return F;
}

MatrixXd reweight(const MatrixXd& F, double epsilon_w) {
  return (F.array().abs() + epsilon_w).inverse().matrix();
}

MatrixXd reweight_blocks(const MatrixXd& F, const Topology& T, double epsilon_w) {
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  const int N = T.N_cn();
  MatrixXd W(N, N);
  for (int p = 0; p < N; ++p) {
    for (int q = 0; q < N; ++q) {
      double nrm2 = 0.0;
      for (int a = ro[p]; a < ro[p + 1]; ++a)
        for (int b = co[q]; b < co[q + 1]; ++b)
          nrm2 += std::pow(F(T.U_order[a], T.X_order[b]), 2);
      const double size = (ro[p + 1] - ro[p]) * (co[q + 1] - co[q]);
      W(p, q) = std::sqrt(size) / (std::sqrt(nrm2) + epsilon_w);
    }
  }
  return W;
}

AdmmResult admm_loop(const AdmmState& init, const LoopContext& ctx,
                     const AdmmConfig& cfg, const Topology* block_topology) {
  AdmmResult res;
  res.state = init;
  auto& st = res.state;
  const double eps = cfg.eps_scale * std::sqrt(double(st.K.size()));
  for (int it = 0; it < cfg.max_iter; ++it) {
    const MatrixXd U = st.F - st.Theta / cfg.rho;
    const KMinResult km = k_min(st.K, U, ctx, cfg);
    st.K = km.K;
    res.J = km.J;
    const MatrixXd V = st.K + st.Theta / cfg.rho;
    const MatrixXd F_new = block_topology
                               ? f_min_block(V, *block_topology, cfg.gamma, cfg.rho, st.W)
                               : f_min(V, st.W, cfg.gamma, cfg.rho);
    st.Theta += cfg.rho * (st.K - F_new);
    res.r_pri = (st.K - F_new).norm();
    res.r_dual = cfg.rho * (F_new - st.F).norm();
    st.F = F_new;
    res.iterations = it + 1;
    if (res.r_pri <= eps && res.r_dual <= eps) {
      res.converged = true;
      break;
    }
  }
  return res;
}

std::vector<double> gamma_path(int points, double lo, double hi,
                               double gamma_max) {
  std::vector<double> g(points);
  for (int k = 0; k < points; ++k) {
    const double t = points > 1 ? double(k) / (points - 1) : 0.0;
    g[k] = gamma_max * std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return g;
}

}  // namespace dcd
