#include "dcd/topo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "dcd/h2.hpp"

namespace dcd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> iota_vec(int k) {
  std::vector<int> v(k);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

int one_in_row(const MatrixXd& P, int r) {
  for (int c = 0; c < P.cols(); ++c)
    if (P(r, c) == 1.0) return c;
  throw std::invalid_argument("block_map_inverse: not a permutation matrix");
}

double dist(const MatrixXd& a, int i, const MatrixXd& b, int j) {
  return (a.row(i) - b.row(j)).norm();
}

// J, then CN cost, then cut position.
bool better(const PartitionCandidate& a, const PartitionCandidate& b) {
  return std::tie(a.eval.J, a.eval.cost.total, a.row_cut, a.col_cut) <
         std::tie(b.eval.J, b.eval.cost.total, b.row_cut, b.col_cut);
}

}  // namespace

MatrixXd row_permutation(const std::vector<int>& order) {
  const int k = static_cast<int>(order.size());
  MatrixXd P = MatrixXd::Zero(k, k);
  for (int r = 0; r < k; ++r) P(r, order[r]) = 1.0;
  return P;
}

MatrixXd col_permutation(const std::vector<int>& order) {
  return row_permutation(order).transpose();
}

MatrixXd BlockPartition::block(int p, int q) const {
  int r0 = 0, c0 = 0;
  for (int a = 0; a < p; ++a) r0 += row_groups[a];
  for (int b = 0; b < q; ++b) c0 += col_groups[b];
  return permuted.block(r0, c0, row_groups[p], col_groups[q]);
}

BlockPartition block_map(const MatrixXd& K, const Topology& T) {
  T.validate(true);
  if (K.rows() != T.m() || K.cols() != T.n()) {
    throw std::invalid_argument("block_map: dimension mismatch");
  }
  BlockPartition b;
  b.base = K;
  b.U = row_permutation(T.U_order);
  b.X = col_permutation(T.X_order);
  b.row_groups = T.m_sizes;
  b.col_groups = T.n_sizes;
  b.N_cn = T.N_cn();
  b.n_off = channel_counts(K, T).n_off;
  b.permuted = b.U * K * b.X;
  return b;
}

Topology block_map_inverse(const BlockPartition& b) {
  Topology T;
  for (int r = 0; r < b.U.rows(); ++r) T.U_order.push_back(one_in_row(b.U, r));
  const MatrixXd Xt = b.X.transpose();
  for (int c = 0; c < Xt.rows(); ++c) T.X_order.push_back(one_in_row(Xt, c));
  T.n_sizes = b.col_groups;
  T.m_sizes = b.row_groups;
  T.validate(true);
  return T;
}

double CnCostModel::rent_of(int N) const {
  if (N < 1 || N > static_cast<int>(rent.size())) {
    throw std::out_of_range("rent table has no entry for N=" + std::to_string(N));
  }
  return rent[N - 1];
}

CnCostModel make_cn_cost_model(int m, int n, int pool, std::uint64_t seed) {
  if (pool < 1) throw std::invalid_argument("make_cn_cost_model: pool must be >= 1");
  CnCostModel c;
  c.seed = seed;
  c.S_c_max = std::pow(m + n - 2.0, 2) + 4.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(pool);
  for (auto& v : x) v = u(rng);
  std::sort(x.begin(), x.end());
  for (double v : x) c.rent.push_back(c.S_c_max * v);
  return c;
}

CnCost cn_cost(const Topology& T, const CnCostModel& model) {
  CnCost c;
  for (int q = 0; q < T.N_cn(); ++q) c.compute += std::pow(T.n_sizes[q] + T.m_sizes[q], 2);
  c.rent = model.rent_of(T.N_cn());
  c.total = c.compute + c.rent;
  return c;
}

double CnGeometry::length(int a, int b) const { return dist(cn_xy, a, cn_xy, b); }

CnGeometry make_random_geometry(int n, int m, int pool, std::uint64_t seed,
                                double max_delay) {
  CnGeometry g;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto fill = [&](int rows) {
    MatrixXd M(rows, 2);
    for (int i = 0; i < rows; ++i) M(i, 0) = u(rng), M(i, 1) = u(rng);
    return M;
  };
  g.cn_xy = fill(pool);
  g.state_xy = fill(n);
  g.input_xy = fill(m);
  const double longest = max_link_length(g, iota_vec(pool));
  g.inv_speed = longest > 0.0 ? max_delay / longest : max_delay;
  return g;
}

double max_link_length(const CnGeometry& g, const std::vector<int>& ids) {
  double best = 0.0;
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b)
      best = std::max(best, g.length(ids[a], ids[b]));
  return best;
}

std::vector<int> select_cn_subset(const CnGeometry& g, int N) {
  if (N < 1 || N > g.pool()) {
    throw std::invalid_argument("select_cn_subset: N outside [1, pool]");
  }
  std::vector<int> ids = iota_vec(g.pool());
  while (static_cast<int>(ids.size()) > N) {
    int pa = 0, pb = 1;
    double top = -1.0;
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const double l = g.length(ids[a], ids[b]);
        if (l > top) top = l, pa = static_cast<int>(a), pb = static_cast<int>(b);
      }
    auto without = [&](int k) {
      std::vector<int> v = ids;
      v.erase(v.begin() + k);
      return v;
    };
    const double la = max_link_length(g, without(pa));
    const double lb = max_link_length(g, without(pb));
    ids.erase(ids.begin() + (la < lb ? pa : pb));
  }
  return ids;
}

SpectralOrder spectral_partition(const MatrixXd& K) {
  const int m = static_cast<int>(K.rows()), n = static_cast<int>(K.cols());
  const MatrixXd W = (K.array().abs() >= kZeroThreshold).select(K.array().abs(), 0.0);
  if (W.sum() == 0.0) throw std::invalid_argument("spectral_partition: K is zero");
  const int V = m + n;
  MatrixXd adj = MatrixXd::Zero(V, V);
  adj.topRightCorner(m, n) = W;
  adj.bottomLeftCorner(n, m) = W.transpose();

  // connected components
  std::vector<int> comp(V, -1);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < V; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> members{s}, stack{s};
    comp[s] = static_cast<int>(comps.size());
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < V; ++w)
        if (adj(v, w) != 0.0 && comp[w] < 0) {
          comp[w] = comp[s];
          members.push_back(w);
          stack.push_back(w);
        }
    }
    std::sort(members.begin(), members.end());
    comps.push_back(std::move(members));
  }

  SpectralOrder out;
  out.components = static_cast<int>(comps.size());
  out.disconnected = comps.size() > 1;
  out.fiedler = VectorXd::Zero(V);
  for (const auto& c : comps) {
    const int k = static_cast<int>(c.size());
    if (k < 2) continue;
    MatrixXd Lc(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) Lc(a, b) = -adj(c[a], c[b]);
    for (int a = 0; a < k; ++a) Lc(a, a) = -Lc.row(a).sum();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Lc);
    const VectorXd& ev = es.eigenvalues();
    const double tol = 1e-9 * std::max(1.0, ev.maxCoeff());
    int pick = k - 1;
    for (int j = 0; j < k; ++j)
      if (ev(j) > tol) {
        pick = j;
        break;
      }
    VectorXd w = es.eigenvectors().col(pick);
    Eigen::Index big = 0;
    w.cwiseAbs().maxCoeff(&big);
    if (w(big) < 0.0) w = -w;
    for (int a = 0; a < k; ++a) out.fiedler(c[a]) = w(a);
  }

  // larger components first, descending Fiedler entries inside each
  std::vector<int> corder = iota_vec(out.components);
  std::stable_sort(corder.begin(), corder.end(), [&](int a, int b) {
    return comps[a].size() > comps[b].size();
  });
  for (int ci : corder) {
    std::vector<int> members = comps[ci];
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      return out.fiedler(a) > out.fiedler(b);
    });
    for (int v : members) {
      if (v < m) out.rows.push_back(v);
      else out.cols.push_back(v - m);
    }
  }
  return out;
}

RedesignContext RedesignContext::make(const PlantModel& plant,
                                      const SpectralBasis& basis, const MatrixXd& K,
                                      const Topology& initial, double tau_o, double c,
                                      const BandwidthModel& bw,
                                      const CnCostModel& cost,
                                      const CnGeometry& geometry) {
  initial.validate(true);
  RedesignContext ctx;
  ctx.plant = &plant;
  ctx.basis = &basis;
  ctx.K = K;
  ctx.initial = initial;
  ctx.tau_o = tau_o;
  ctx.c = c;
  ctx.bw = bw;
  ctx.cost = cost;
  ctx.geometry = geometry;
  const auto [dpr, cpr] = ctx.propagation(initial);
  ctx.tau_dtr = c * tau_o - dpr;
  const double tau_ctr = (1.0 - c) * tau_o - cpr;
  if (!(ctx.tau_dtr > 0.0) || !(tau_ctr > 0.0)) {
    throw std::invalid_argument(
        "RedesignContext: initial delays do not exceed the propagation delays");
  }
  const int n_cc = channel_counts(K, initial).n_cc;
  ctx.b_cc = bw.kappa * std::max(n_cc, 1) / tau_ctr;
  return ctx;
}

std::pair<double, double> RedesignContext::propagation(const Topology& T) const {
  if (geometry.empty()) return {bw.tau_dpr, bw.tau_cpr};
  const std::vector<int> V = select_cn_subset(geometry, T.N_cn());
  const double cpr = geometry.inv_speed * max_link_length(geometry, V);
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  double far = 0.0;
  for (int q = 0; q < T.N_cn(); ++q) {
    for (int a = ro[q]; a < ro[q + 1]; ++a)
      far = std::max(far, dist(geometry.input_xy, T.U_order[a], geometry.cn_xy, V[q]));
    for (int b = co[q]; b < co[q + 1]; ++b)
      far = std::max(far, dist(geometry.state_xy, T.X_order[b], geometry.cn_xy, V[q]));
  }
  return {geometry.inv_speed * far, cpr};
}

TopologyEval evaluate_topology(const RedesignContext& ctx, const Topology& T,
                               double cost_bound) {
  TopologyEval e;
  e.T = T;
  e.N = T.N_cn();
  e.counts = channel_counts(ctx.K, T);
  e.cost = cn_cost(T, ctx.cost);
  const auto [dpr, cpr] = ctx.propagation(T);
  e.tau_d = ctx.tau_dtr + dpr;
  e.tau_c = ctx.bw.kappa * e.counts.n_cc / ctx.b_cc + cpr;
  e.tau_o = e.tau_d + e.tau_c;
  e.c = e.tau_d / e.tau_o;
  BandwidthModel local = ctx.bw;
  local.tau_dpr = dpr;
  local.tau_cpr = cpr;
  try {
    e.S_BW = sbw(e.tau_d, e.tau_o, e.counts, local);
  } catch (const std::exception&) {
    e.S_BW = kInf;
  }
  try {
    e.J = evaluate_design(*ctx.plant, ctx.K, build_masks(T), e.tau_o, e.c, *ctx.basis)
              .sol.J;
    e.stable = true;
  } catch (const std::exception& ex) {
    e.J = kInf;
    e.note = ex.what();
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(cost_bound));
  e.feasible = e.stable && e.cost.total <= cost_bound + slack;
  if (e.stable && !e.feasible) e.note = "CN cost above the initial topology";
  return e;
}

GroupSplit GroupSplit::from(const Topology& T) {
  GroupSplit g;
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  for (int q = 0; q < T.N_cn(); ++q) {
    g.rows.emplace_back(T.U_order.begin() + ro[q], T.U_order.begin() + ro[q + 1]);
    g.cols.emplace_back(T.X_order.begin() + co[q], T.X_order.begin() + co[q + 1]);
  }
  return g;
}

Topology GroupSplit::topology() const {
  Topology T;
  for (std::size_t q = 0; q < rows.size(); ++q) {
    T.U_order.insert(T.U_order.end(), rows[q].begin(), rows[q].end());
    T.X_order.insert(T.X_order.end(), cols[q].begin(), cols[q].end());
    T.m_sizes.push_back(static_cast<int>(rows[q].size()));
    T.n_sizes.push_back(static_cast<int>(cols[q].size()));
  }
  return T;
}

GroupSplit apply_cut(const GroupSplit& g, int p, int q, int row_cut, int col_cut) {
  const int mp = static_cast<int>(g.rows[p].size());
  const int nq = static_cast<int>(g.cols[q].size());
  if (row_cut < 1 || row_cut >= mp || col_cut < 1 || col_cut >= nq) {
    throw std::invalid_argument("apply_cut: cut leaves an empty group");
  }
  GroupSplit out = g;
  std::vector<int> r(out.rows[p].begin() + row_cut, out.rows[p].end());
  std::vector<int> c(out.cols[q].begin() + col_cut, out.cols[q].end());
  out.rows[p].resize(row_cut);
  out.cols[q].resize(col_cut);
  const int at = std::max(p, q) + 1;
  out.rows.insert(out.rows.begin() + at, std::move(r));
  out.cols.insert(out.cols.begin() + at, std::move(c));
  return out;
}

PartitionResult optimal_partition(const RedesignContext& ctx, const GroupSplit& g,
                                  int p, int q, double cost_bound) {
  PartitionResult res;
  const int mp = static_cast<int>(g.rows[p].size());
  const int nq = static_cast<int>(g.cols[q].size());
  for (int i = 1; i < mp; ++i)
    for (int j = 1; j < nq; ++j) {
      PartitionCandidate cand;
      cand.row_cut = i;
      cand.col_cut = j;
      cand.eval = evaluate_topology(ctx, apply_cut(g, p, q, i, j).topology(), cost_bound);
      res.candidates.push_back(std::move(cand));
    }
  for (int k = 0; k < static_cast<int>(res.candidates.size()); ++k) {
    const auto& c = res.candidates[k];
    if (!c.eval.stable) continue;
    if (res.fallback < 0 || better(c, res.candidates[res.fallback])) res.fallback = k;
    if (c.eval.feasible && (res.chosen < 0 || better(c, res.candidates[res.chosen])))
      res.chosen = k;
  }
  return res;
}

namespace {

// Next block to split: largest diagonal block, then largest off-diagonal.
std::optional<std::pair<int, int>> next_site(const GroupSplit& g) {
  std::optional<std::pair<int, int>> site;
  std::size_t best = 0;
  for (int p = 0; p < g.size(); ++p) {
    const std::size_t sz = g.rows[p].size() + g.cols[p].size();
    if (g.rows[p].size() >= 2 && g.cols[p].size() >= 2 && sz > best) {
      best = sz;
      site = {p, p};
    }
  }
  if (site) return site;
  for (int p = 0; p < g.size(); ++p)
    for (int q = 0; q < g.size(); ++q) {
      if (p == q) continue;
      const std::size_t sz = g.rows[p].size() + g.cols[q].size();
      if (g.rows[p].size() >= 2 && g.cols[q].size() >= 2 && sz > best) {
        best = sz;
        site = {p, q};
      }
    }
  return site;
}

}  // namespace

RedesignMap recursive_divide(const RedesignContext& ctx) {
  RedesignMap map;
  const double bound = cn_cost(ctx.initial, ctx.cost).total;
  map.initial = evaluate_topology(ctx, ctx.initial, bound);
  const int m = static_cast<int>(ctx.K.rows()), n = static_cast<int>(ctx.K.cols());
  int N_max = std::min({m, n, static_cast<int>(ctx.cost.rent.size())});
  if (!ctx.geometry.empty()) N_max = std::min(N_max, ctx.geometry.pool());

  GroupSplit g;
  g.rows.push_back(iota_vec(m));
  g.cols.push_back(iota_vec(n));
  while (g.size() < N_max) {
    const auto site = next_site(g);
    if (!site) break;
    const auto [p, q] = *site;
    std::vector<int>& R = g.rows[p];
    std::vector<int>& C = g.cols[q];
    MatrixXd sub(R.size(), C.size());
    for (std::size_t a = 0; a < R.size(); ++a)
      for (std::size_t b = 0; b < C.size(); ++b) sub(a, b) = ctx.K(R[a], C[b]);
    if ((sub.array().abs() >= kZeroThreshold).any()) {
      const SpectralOrder so = spectral_partition(sub);
      std::vector<int> R2, C2;
      for (int r : so.rows) R2.push_back(R[r]);
      for (int c : so.cols) C2.push_back(C[c]);
      R = std::move(R2);
      C = std::move(C2);
    }
    const PartitionResult res = optimal_partition(ctx, g, p, q, bound);
    int pick = res.chosen >= 0 ? res.chosen : res.fallback;
    if (pick < 0) pick = 0;
    const PartitionCandidate& cand = res.candidates[pick];
    g = apply_cut(g, p, q, cand.row_cut, cand.col_cut);
    TopologyEval e = cand.eval;
    if (res.chosen < 0 && e.stable) e.note = "no split passed the CN cost filter";
    map.by_N[g.size()] = std::move(e);
  }
  return map;
}

O3Result solve_O3(const RedesignMap& map) {
  O3Result r;
  const double J_in = map.initial.stable ? map.initial.J : kInf;
  const TopologyEval* best = nullptr;
  const TopologyEval* cheap = nullptr;
  for (const auto& [N, e] : map.by_N) {
    if (!e.feasible) continue;
    if (!best || std::tie(e.J, e.cost.total) < std::tie(best->J, best->cost.total))
      best = &e;
    if (e.J <= J_in &&
        (!cheap || std::tie(e.cost.total, e.J) < std::tie(cheap->cost.total, cheap->J)))
      cheap = &e;
  }
  if (!best || best->J > J_in) {
    r.fallback = true;
    r.best = map.initial;
  } else {
    r.best = *best;
  }
  r.N_star = r.best.N;
  r.N_low_cost = cheap ? cheap->N : -1;
  return r;
}

Prop2Report prop2_feasibility(int m, int n, const Prop2Stats& s) {
  Prop2Report r;
  auto pairs = [](int N) { return static_cast<double>(N) * (N - 1); };
  r.fraction_N = s.N > 1 ? s.links_N / pairs(s.N) : 0.0;
  r.fraction_Nm = s.N_m > 1 ? s.links_Nm / pairs(s.N_m) : 0.0;
  r.fraction_condition = r.fraction_N <= r.fraction_Nm;
  r.n_le_m = n <= m;
  r.regime_feasible = r.n_le_m || 2 * n <= m * (m - 1);
  r.count_condition = pairs(s.N) * n <= pairs(s.N_m);
  r.phi_max = n - 1.0;
  return r;
}

std::string Prop2Report::summary() const {
  std::ostringstream os;
  os << "fraction " << fraction_N << " vs " << fraction_Nm
     << (fraction_condition ? " (holds)" : " (fails)") << "; regime "
     << (n_le_m ? "n<=m" : "n>m") << (regime_feasible ? " feasible" : " infeasible")
     << "; count condition " << (count_condition ? "holds" : "fails")
     << "; phi max " << phi_max;
  return os.str();
}

double offdiag_phi(const std::vector<int>& n_sizes, const std::vector<int>& n_off) {
  if (n_sizes.size() != n_off.size()) {
    throw std::invalid_argument("offdiag_phi: size mismatch");
  }
  const int n = std::accumulate(n_sizes.begin(), n_sizes.end(), 0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n_sizes.size(); ++i) {
    num += static_cast<double>(n_off[i]) * (n - n_sizes[i]);
    den += static_cast<double>(n_off[i]) * n_sizes[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

void write_topology_csv(std::ostream& os, const RedesignMap& map) {
  os << "N,S_CN,S_CN_c,S_CN_r,tau_c,tau_d,J,feasible\n";
  os << std::setprecision(12);
  for (const auto& [N, e] : map.by_N) {
    os << N << ',' << e.cost.total << ',' << e.cost.compute << ',' << e.cost.rent << ','
       << e.tau_c << ',' << e.tau_d << ',' << e.J << ',' << (e.feasible ? 1 : 0) << '\n';
  }
}

std::string sparsity_grid(const MatrixXd& K, const Topology& T) {
  const auto ro = T.row_offsets();
  const auto co = T.col_offsets();
  std::string rule;
  for (int q = 0; q < T.N_cn(); ++q) {
    if (q) rule += '+';
    rule += std::string(T.n_sizes[q], '-');
  }
  std::ostringstream os;
  for (int p = 0; p < T.N_cn(); ++p) {
    if (p) os << rule << '\n';
    for (int a = ro[p]; a < ro[p + 1]; ++a) {
      for (int q = 0; q < T.N_cn(); ++q) {
        if (q) os << '|';
        for (int b = co[q]; b < co[q + 1]; ++b)
          os << (std::abs(K(T.U_order[a], T.X_order[b])) >= kZeroThreshold ? '*' : '.');
      }
      os << '\n';
    }
  }
  return os.str();
}

std::vector<BlockSparseRow> block_sparse_baseline(const RedesignContext& ctx,
                                                  const RedesignMap& map,
                                                  const AdmmConfig& cfg,
                                                  const MatrixXd& K_start,
                                                  int max_steps) {
  std::vector<BlockSparseRow> rows;
  const MatrixXd& K0 = K_start.size() ? K_start : ctx.K;
  for (const auto& [N, e] : map.by_N) {
    BlockSparseRow r;
    r.N = N;
    r.S_BW_redesign = e.S_BW;
    r.S_CN = e.cost.total;
    r.J_redesign = e.J;
    r.blocks_target = static_cast<int>(block_support(ctx.K, e.T).count());
    if (!e.stable) {
      r.S_BW_block = r.J_block = kInf;
      r.note = "redesigned topology unstable";
      rows.push_back(r);
      continue;
    }
    LoopContext lc;
    lc.plant = ctx.plant;
    lc.masks = build_masks(e.T);
    lc.tau_o = e.tau_o;
    lc.c = e.c;
    lc.basis = ctx.basis;
    AdmmState st;
    st.K = K0;
    st.F = K0;
    st.Theta = MatrixXd::Zero(K0.rows(), K0.cols());
    st.W = MatrixXd::Ones(N, N);
    AdmmConfig ac = cfg;
    MatrixXd G = K0;
    int blocks = static_cast<int>(block_support(G, e.T).count());
    auto count = [&](const MatrixXd& F) {
      return static_cast<int>(block_support(F, e.T).count());
    };
    // doubling gamma path until F has no more nonzero blocks than K*, then
    // bisection on gamma from the last state above the target
    for (int step = 0; step < max_steps && blocks > r.blocks_target; ++step) {
      const AdmmState prev = st;
      const AdmmResult ar = admm_loop(st, lc, ac, &e.T);
      const int b = count(ar.state.F);
      if (b < r.blocks_target && step > 0) {
        double lo = ac.gamma / 2.0, hi = ac.gamma;
        AdmmState best = ar.state;
        int best_blocks = b;
        double best_gamma = hi;
        for (int k = 0; k < 6 && best_blocks != r.blocks_target; ++k) {
          AdmmConfig mc = ac;
          mc.gamma = std::sqrt(lo * hi);
          const AdmmResult mr = admm_loop(prev, lc, mc, &e.T);
          const int mb = count(mr.state.F);
          if (mb > r.blocks_target) {
            lo = mc.gamma;
          } else {
            hi = mc.gamma;
            best = mr.state;
            best_blocks = mb;
            best_gamma = mc.gamma;
          }
        }
        st = best;
        blocks = best_blocks;
        r.gamma = best_gamma;
      } else {
        st = ar.state;
        blocks = b;
        r.gamma = ac.gamma;
      }
      G = st.F;
      st.W = reweight_blocks(st.F, e.T, ac.epsilon_w);
      ac.gamma *= 2.0;
    }
    r.blocks_block = blocks;
    r.nnz_block = count_nonzero(G);
    if (blocks > r.blocks_target) r.note = "block count not reached";
    try {
      r.J_block = lc.evaluate(G).sol.J;
    } catch (const std::exception&) {
      r.J_block = kInf;
      r.note = "block-sparse gain unstable";
    }
    BandwidthModel local = ctx.bw;
    std::tie(local.tau_dpr, local.tau_cpr) = ctx.propagation(e.T);
    try {
      r.S_BW_block = sbw(e.tau_d, e.tau_o, channel_counts(G, e.T), local);
    } catch (const std::exception&) {
      r.S_BW_block = kInf;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dcd
