#include "dcd/conic.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace dcd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(const ConicProblem& p, const VectorXd& z) {
  return 0.5 * z.dot(p.H * z) + p.f.dot(z);
}

// Constant Gram data of each cone.
struct SocCache {
  MatrixXd AtA;
  VectorXd Atb;
  double btb = 0.0;
};

std::vector<SocCache> prepare(const ConicProblem& p) {
  std::vector<SocCache> out;
  out.reserve(p.socs.size());
  for (const auto& s : p.socs) {
    SocCache c;
    c.AtA = s.A.transpose() * s.A;
    c.Atb = s.A.transpose() * s.b;
    c.btb = s.b.squaredNorm();
    out.push_back(std::move(c));
  }
  return out;
}

double barrier_weight(const ConicProblem& p) {
  double th = static_cast<double>(p.G.rows()) + 2.0 * p.socs.size();
  for (const auto& l : p.lmis) th += static_cast<double>(l.F0.rows());
  return th;
}

MatrixXd lmi_value(const LmiConstraint& l, const VectorXd& z) {
  MatrixXd S = l.F0;
  for (std::size_t k = 0; k < l.F.size(); ++k)
    if (z(k) != 0.0) S += z(k) * l.F[k];
  return S;
}

// Barrier value, +inf outside the domain.
double barrier(const ConicProblem& p, const std::vector<SocCache>& sc,
               const VectorXd& z) {
  double phi = 0.0;
  if (p.G.rows() > 0) {
    const VectorXd r = p.h - p.G * z;
    if ((r.array() <= 0.0).any()) return kInf;
    phi -= r.array().log().sum();
  }
  for (std::size_t k = 0; k < p.socs.size(); ++k) {
    const auto& s = p.socs[k];
    const double w = s.c.dot(z) + s.d;
    const double u2 = z.dot(sc[k].AtA * z) + 2.0 * sc[k].Atb.dot(z) + sc[k].btb;
    const double psi = w * w - u2;
    if (w <= 0.0 || psi <= 0.0) return kInf;
    phi -= std::log(psi);
  }
  for (const auto& l : p.lmis) {
    Eigen::LLT<MatrixXd> llt(-lmi_value(l, z));
    if (llt.info() != Eigen::Success) return kInf;
    phi -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  return phi;
}

void barrier_derivatives(const ConicProblem& p, const std::vector<SocCache>& sc,
                         const VectorXd& z, VectorXd& g, MatrixXd& Hs) {
  const int n = p.nv;
  g = VectorXd::Zero(n);
  Hs = MatrixXd::Zero(n, n);
  if (p.G.rows() > 0) {
    const VectorXd r = p.h - p.G * z;
    const VectorXd inv = r.cwiseInverse();
    g += p.G.transpose() * inv;
    Hs += p.G.transpose() * inv.cwiseAbs2().asDiagonal() * p.G;
  }
  for (std::size_t k = 0; k < p.socs.size(); ++k) {
    const auto& s = p.socs[k];
    const VectorXd Atu = sc[k].AtA * z + sc[k].Atb;
    const double u2 = z.dot(Atu) + sc[k].Atb.dot(z) + sc[k].btb;
    const double w = s.c.dot(z) + s.d;
    const double psi = w * w - u2;
    const VectorXd dpsi = 2.0 * w * s.c - 2.0 * Atu;
    g -= dpsi / psi;
    Hs.noalias() += dpsi * dpsi.transpose() / (psi * psi);
    Hs.noalias() -= (2.0 / psi) * s.c * s.c.transpose();
    Hs += (2.0 / psi) * sc[k].AtA;
  }
  for (const auto& l : p.lmis) {
    const MatrixXd S = -lmi_value(l, z);
    Eigen::LLT<MatrixXd> llt(S);
    const MatrixXd Sinv = llt.solve(MatrixXd::Identity(S.rows(), S.cols()));
    std::vector<MatrixXd> SF(l.F.size());
    for (std::size_t k = 0; k < l.F.size(); ++k) {
      SF[k] = Sinv * l.F[k];
      g(k) += SF[k].trace();
    }
    for (std::size_t a = 0; a < l.F.size(); ++a) {
      for (std::size_t b = a; b < l.F.size(); ++b) {
        const double v = SF[a].cwiseProduct(SF[b].transpose()).sum();
        Hs(a, b) += v;
        if (a != b) Hs(b, a) += v;
      }
    }
  }
}

// Minimizes t f0 + phi from a strictly feasible z by damped Newton.
int centering(const ConicProblem& p, const std::vector<SocCache>& sc, double t,
              VectorXd& z, int max_newton,
              const std::function<bool(const VectorXd&)>& early_exit) {
  int steps = 0;
  double val = t * objective(p, z) + barrier(p, sc, z);
  for (; steps < max_newton; ++steps) {
    VectorXd gb;
    MatrixXd Hb;
    barrier_derivatives(p, sc, z, gb, Hb);
    const VectorXd grad = t * (p.H * z + p.f) + gb;
    MatrixXd Hess = t * p.H + Hb;
    Hess.diagonal().array() += 1e-12 * (1.0 + Hess.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<MatrixXd> ldlt(Hess);
    const VectorXd dz = -ldlt.solve(grad);
    const double dec2 = -grad.dot(dz);
    if (!(dec2 > 1e-12) || !dz.allFinite()) break;
    double s = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt, s *= 0.5) {
      const VectorXd zt = z + s * dz;
      const double vt = t * objective(p, zt) + barrier(p, sc, zt);
      if (std::isfinite(vt) && vt <= val - 0.25 * s * dec2) {
        z = zt;
        val = vt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (early_exit && early_exit(z)) return steps + 1;
    if (dec2 < 1e-10) break;
  }
  return steps;
}

ConicResult barrier_method(const ConicProblem& p, VectorXd z,
                           const ConicOptions& opt,
                           const std::function<bool(const VectorXd&)>& early_exit) {
  ConicResult res;
  const auto sc = prepare(p);
  const double theta = std::max(1.0, barrier_weight(p));
  const double scale = 1.0 + std::abs(objective(p, z));
  double t = 1.0 / scale;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    res.newton_steps += centering(p, sc, t, z, opt.max_newton, early_exit);
    if (early_exit && early_exit(z)) {
      res.status = ConicStatus::kOptimal;
      break;
    }
    res.gap = theta / t;
    if (res.gap <= opt.tol * (1.0 + std::abs(objective(p, z)))) {
      res.status = ConicStatus::kOptimal;
      break;
    }
    t *= opt.mu;
  }
  res.z = z;
  res.objective = objective(p, z);
  return res;
}

}  // namespace

ConicProblem::ConicProblem(int n)
    : nv(n), H(MatrixXd::Zero(n, n)), f(VectorXd::Zero(n)), G(0, n), h(0) {}

void ConicProblem::add_linear(const VectorXd& g, double rhs) {
  G.conservativeResize(G.rows() + 1, nv);
  G.row(G.rows() - 1) = g.transpose();
  h.conservativeResize(h.size() + 1);
  h(h.size() - 1) = rhs;
}

void ConicProblem::add_bounds(int var, double lo, double hi) {
  VectorXd e = VectorXd::Zero(nv);
  e(var) = 1.0;
  if (std::isfinite(hi)) add_linear(e, hi);
  if (std::isfinite(lo)) add_linear(-e, -lo);
}

void ConicProblem::add_squared_norm(const MatrixXd& A, const VectorXd& b,
                                    const VectorXd& e) {
  // |u|^2 <= s  <=>  |(2u, s - 1)| <= s + 1
  SocConstraint s;
  s.A = MatrixXd::Zero(A.rows() + 1, nv);
  s.A.topRows(A.rows()) = 2.0 * A;
  s.A.row(A.rows()) = e.transpose();
  s.b = VectorXd::Zero(A.rows() + 1);
  s.b.head(A.rows()) = 2.0 * b;
  s.b(A.rows()) = -1.0;
  s.c = e;
  s.d = 1.0;
  socs.push_back(std::move(s));
}

double max_violation(const ConicProblem& p, const VectorXd& z) {
  double v = -kInf;
  if (p.G.rows() > 0) v = std::max(v, (p.G * z - p.h).maxCoeff());
  for (const auto& s : p.socs)
    v = std::max(v, (s.A * z + s.b).norm() - (s.c.dot(z) + s.d));
  for (const auto& l : p.lmis) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(lmi_value(l, z), Eigen::EigenvaluesOnly);
    v = std::max(v, es.eigenvalues().maxCoeff());
  }
  return v;
}

ConicResult find_interior(const ConicProblem& p, const VectorXd& z0,
                          const ConicOptions& opt) {
  ConicResult res;
  const auto sc = prepare(p);
  if (std::isfinite(barrier(p, sc, z0))) {
    res.status = ConicStatus::kOptimal;
    res.z = z0;
    return res;
  }
  // minimize s over the constraints relaxed by s
  const int n = p.nv;
  ConicProblem q(n + 1);
  q.f(n) = 1.0;
  q.G = MatrixXd::Zero(p.G.rows(), n + 1);
  q.G.leftCols(n) = p.G;
  q.G.col(n).setConstant(-1.0);
  q.h = p.h;
  for (const auto& s : p.socs) {
    SocConstraint r = s;
    r.A.conservativeResize(Eigen::NoChange, n + 1);
    r.A.col(n).setZero();
    r.c.conservativeResize(n + 1);
    r.c(n) = 1.0;
    q.socs.push_back(std::move(r));
  }
  for (const auto& l : p.lmis) {
    LmiConstraint r = l;
    r.F.push_back(-MatrixXd::Identity(l.F0.rows(), l.F0.cols()));
    // variables beyond the LMI's own list are absent
    while (static_cast<int>(r.F.size()) < n + 1) r.F.insert(r.F.end() - 1, MatrixXd::Zero(l.F0.rows(), l.F0.cols()));
    q.lmis.push_back(std::move(r));
  }
  // box the slack so the relaxed problem is bounded below
  const double s0 = std::max(1.0, 2.0 * max_violation(p, z0) + 1.0);
  q.add_bounds(n, -1.0, 10.0 * s0);
  VectorXd w(n + 1);
  w.head(n) = z0;
  w(n) = s0;
  if (!std::isfinite(barrier(q, prepare(q), w))) {
    res.status = ConicStatus::kInfeasible;
    res.message = "phase I start not interior";
    return res;
  }
  const double margin = 1e-9;
  auto done = [&](const VectorXd& x) { return x(n) < -margin; };
  ConicOptions o = opt;
  o.tol = 1e-10;
  const ConicResult r = barrier_method(q, w, o, done);
  res.newton_steps = r.newton_steps;
  if (r.z(n) < 0.0 && std::isfinite(barrier(p, sc, r.z.head(n)))) {
    res.status = ConicStatus::kOptimal;
    res.z = r.z.head(n);
  } else {
    res.status = ConicStatus::kInfeasible;
    res.z = r.z.head(n);
    res.message = "no strictly feasible point (phase I optimum " +
                  std::to_string(r.z(n)) + ")";
  }
  return res;
}

ConicResult solve_conic(const ConicProblem& p, const VectorXd* z0,
                        const ConicOptions& opt) {
  VectorXd start = z0 ? *z0 : VectorXd::Zero(p.nv);
  if (!std::isfinite(barrier(p, prepare(p), start))) {
    const ConicResult ph = find_interior(p, start, opt);
    if (ph.status != ConicStatus::kOptimal) return ph;
    start = ph.z;
  }
  return barrier_method(p, start, opt, nullptr);
}

}  // namespace dcd
