#include "dcd/model.hpp"

#include <algorithm>
#include <complex>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dcd {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_permutation(const std::vector<int>& order, const char* name) {
  const int len = static_cast<int>(order.size());
  std::vector<int> seen(len, 0);
  for (int v : order) {
    if (v < 0 || v >= len) {
      throw std::invalid_argument(std::string(name) + ": index " +
                                  std::to_string(v) + " out of range");
    }
    if (seen[v]++) {
      throw std::invalid_argument(std::string(name) + ": duplicate index " +
                                  std::to_string(v));
    }
  }
}

double psd_tol(const MatrixXd& S) { return 1e-10 * std::max(1.0, S.norm()); }

}  // namespace

PlantModel::PlantModel(MatrixXd A_, MatrixXd B_, MatrixXd B_w_, MatrixXd Q_,
                       MatrixXd R_)
    : A(std::move(A_)), B(std::move(B_)), B_w(std::move(B_w_)),
      Q(std::move(Q_)), R(std::move(R_)) {
  const auto n = A.rows();
  require(A.cols() == n, "A must be square");
  require(B.rows() == n, "B rows must equal n");
  require(B_w.rows() == n, "B_w rows must equal n");
  require(Q.rows() == n && Q.cols() == n, "Q must be n x n");
  require(R.rows() == B.cols() && R.cols() == B.cols(), "R must be m x m");
  require((Q - Q.transpose()).norm() <= psd_tol(Q), "Q must be symmetric");
  require((R - R.transpose()).norm() <= psd_tol(R), "R must be symmetric");
  require(is_psd(Q, false), "Q must be positive semidefinite");
  require(is_psd(R, true), "R must be positive definite");
}

bool is_psd(const MatrixXd& S, bool strict) {
  if (S.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  return strict ? lo > psd_tol(S) : lo >= -psd_tol(S);
}

MatrixXd sqrtm_psd(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
  VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

void Topology::validate(bool allow_single_cn) const {
  check_permutation(X_order, "X_order");
  check_permutation(U_order, "U_order");
  require(n_sizes.size() == m_sizes.size(),
          "n_sizes and m_sizes must have equal length");
  int sn = 0, sm = 0;
  for (std::size_t q = 0; q < n_sizes.size(); ++q) {
    if (n_sizes[q] < 1 || m_sizes[q] < 1) {
      throw std::invalid_argument("CN " + std::to_string(q) +
                                  " has an empty state or input group");
    }
    sn += n_sizes[q];
    sm += m_sizes[q];
  }
  require(sn == n(), "sum of n_sizes must equal n");
  require(sm == m(), "sum of m_sizes must equal m");
  const int lo = allow_single_cn ? 1 : 2;
  require(N_cn() >= lo && N_cn() <= std::min(m(), n()),
          "N_cn must lie in [2, min(m, n)]");
  if (!cn_pool.empty()) {
    require(static_cast<int>(cn_pool.size()) == N_cn(),
            "cn_pool must list one CN per block");
  }
}

std::vector<int> Topology::col_offsets() const {
  std::vector<int> off(n_sizes.size() + 1, 0);
  for (std::size_t q = 0; q < n_sizes.size(); ++q) off[q + 1] = off[q] + n_sizes[q];
  return off;
}

std::vector<int> Topology::row_offsets() const {
  std::vector<int> off(m_sizes.size() + 1, 0);
  for (std::size_t q = 0; q < m_sizes.size(); ++q) off[q + 1] = off[q] + m_sizes[q];
  return off;
}

Topology make_topology(std::vector<int> X_order, std::vector<int> U_order,
                       std::vector<int> n_sizes, std::vector<int> m_sizes) {
  Topology T;
  T.X_order = std::move(X_order);
  T.U_order = std::move(U_order);
  T.n_sizes = std::move(n_sizes);
  T.m_sizes = std::move(m_sizes);
  return T;
}

void DelayPair::validate(double tau_dpr, double tau_cpr) const {
  if (!(tau_o > 0.0)) throw std::invalid_argument("tau_o must be positive");
  const double lo = tau_dpr / tau_o;
  const double hi = 1.0 - tau_cpr / tau_o;
  if (!(c > lo && c < hi) || !(c > 0.0 && c < 1.0)) {
    std::ostringstream os;
    os << "delay ratio c=" << c << " outside (" << lo << ", " << hi << ")";
    throw std::invalid_argument(os.str());
  }
}

GainMasks build_masks(const Topology& T) {
  T.validate(true);
  const int m = T.m(), n = T.n();
  GainMasks g;
  g.I_d = MatrixXd::Zero(m, n);
  const auto co = T.col_offsets();
  const auto ro = T.row_offsets();
  for (int q = 0; q < T.N_cn(); ++q) {
    for (int a = ro[q]; a < ro[q + 1]; ++a) {
      for (int b = co[q]; b < co[q + 1]; ++b) {
        g.I_d(T.U_order[a], T.X_order[b]) = 1.0;
      }
    }
  }
  g.I_o = MatrixXd::Ones(m, n) - g.I_d;
  return g;
}

GainMasks full_masks(int m, int n) {
  return {MatrixXd::Ones(m, n), MatrixXd::Zero(m, n)};
}

SplitGain split_gain(const MatrixXd& K, const GainMasks& masks) {
  if (K.rows() != masks.I_d.rows() || K.cols() != masks.I_d.cols()) {
    throw std::invalid_argument("split_gain: dimension mismatch");
  }
  return {K.cwiseProduct(masks.I_d), K.cwiseProduct(masks.I_o)};
}

std::string StabilizabilityReport::summary() const {
  std::ostringstream os;
  os << "stabilizable=" << (stabilizable ? "yes" : "no")
     << " detectable=" << (detectable ? "yes" : "no");
  return os.str();
}

StabilizabilityReport check_stabilizability(const PlantModel& p) {
  using Cplx = std::complex<double>;
  StabilizabilityReport rep;
  rep.stabilizable = true;
  rep.detectable = true;
  const int n = p.n();
  if (n == 0) return rep;
  Eigen::EigenSolver<MatrixXd> es(p.A, false);
  const MatrixXd Qh = sqrtm_psd(p.Q);
  const double tol = 1e-9 * std::max(1.0, p.A.norm());
  for (int k = 0; k < n; ++k) {
    const Cplx lam = es.eigenvalues()(k);
    if (lam.real() < -tol) continue;
    Eigen::MatrixXcd lhs(n, n + p.m());
    lhs << lam * Eigen::MatrixXcd::Identity(n, n) - p.A.cast<Cplx>(),
        p.B.cast<Cplx>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd_c(lhs);
    if (svd_c.singularValues()(n - 1) <= tol) {
      rep.stabilizable = false;
      rep.uncontrollable_modes.push_back(lam.real());
    }
    Eigen::MatrixXcd obs(2 * n, n);
    obs << lam * Eigen::MatrixXcd::Identity(n, n) - p.A.cast<Cplx>(),
        Qh.cast<Cplx>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd_o(obs);
    if (svd_o.singularValues()(n - 1) <= tol) {
      rep.detectable = false;
      rep.unobservable_modes.push_back(lam.real());
    }
  }
  return rep;
}

}  // namespace dcd
