#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcd/model.hpp"
#include "dcd/netcost.hpp"
#include "dcd/sparseadmm.hpp"
#include "dcd/spectral.hpp"

namespace dcd {

// Permutation matrix P with (P K)(r, :) = K(order[r], :).
MatrixXd row_permutation(const std::vector<int>& order);
// Permutation matrix Q with (K Q)(:, c) = K(:, order[c]).
MatrixXd col_permutation(const std::vector<int>& order);

// Block form of a gain under a topology: permuted = U K X cut into
// m_sizes x n_sizes blocks.
struct BlockPartition {
  MatrixXd base;
  MatrixXd U;
  MatrixXd X;
  std::vector<int> row_groups;  // m_sizes
  std::vector<int> col_groups;  // n_sizes
  std::vector<int> n_off;
  int N_cn = 0;
  MatrixXd permuted;

  MatrixXd block(int p, int q) const;
};

BlockPartition block_map(const MatrixXd& K, const Topology& T);
// Reads the orders back out of U and X.
Topology block_map_inverse(const BlockPartition& b);

// Rent table frozen from one draw of sorted uniforms.
struct CnCostModel {
  std::vector<double> rent;  // rent[N - 1] for N = 1..pool
  double S_c_max = 0.0;
  std::uint64_t seed = 0;

  double rent_of(int N) const;
};

CnCostModel make_cn_cost_model(int m, int n, int pool, std::uint64_t seed);

struct CnCost {
  double compute = 0.0;  // sum (n_i + m_i)^2
  double rent = 0.0;
  double total = 0.0;
};

CnCost cn_cost(const Topology& T, const CnCostModel& model);

// Physical layout used for worst-case propagation delays. Empty layout:
// propagation delays are the constants of the bandwidth model.
struct CnGeometry {
  MatrixXd cn_xy;     // pool x d
  MatrixXd state_xy;  // n x d
  MatrixXd input_xy;  // m x d
  double inv_speed = 0.0;

  bool empty() const { return cn_xy.rows() == 0; }
  int pool() const { return static_cast<int>(cn_xy.rows()); }
  double length(int a, int b) const;
};

// Unit-square layout scaled so the longest CN link costs max_delay.
CnGeometry make_random_geometry(int n, int m, int pool, std::uint64_t seed,
                                double max_delay = 1e-4);

// Greedy trimming: drop an endpoint of the longest remaining link until
// N CNs remain. Sorted ids.
std::vector<int> select_cn_subset(const CnGeometry& g, int N);
double max_link_length(const CnGeometry& g, const std::vector<int>& ids);

struct SpectralOrder {
  std::vector<int> rows;  // permutation of the input row ids
  std::vector<int> cols;
  VectorXd fiedler;       // on the (rows, cols) of the input, stacked
  bool disconnected = false;
  int components = 1;
};

// Bipartite Fiedler ordering of |K|. Throws on an all-zero K.
SpectralOrder spectral_partition(const MatrixXd& K);

struct RedesignContext {
  const PlantModel* plant = nullptr;
  const SpectralBasis* basis = nullptr;
  MatrixXd K;
  Topology initial;
  double tau_o = 0.0;  // delays of K on the initial topology
  double c = 0.0;
  BandwidthModel bw;
  CnCostModel cost;
  CnGeometry geometry;

  // filled by make
  double tau_dtr = 0.0;
  double b_cc = 0.0;

  static RedesignContext make(const PlantModel& plant, const SpectralBasis& basis,
                              const MatrixXd& K, const Topology& initial,
                              double tau_o, double c, const BandwidthModel& bw,
                              const CnCostModel& cost, const CnGeometry& geometry);
  std::pair<double, double> propagation(const Topology& T) const;  // (dpr, cpr)
};

struct TopologyEval {
  Topology T;
  int N = 0;
  ChannelCounts counts;
  CnCost cost;
  double tau_d = 0.0;
  double tau_c = 0.0;
  double tau_o = 0.0;
  double c = 0.0;
  double J = 0.0;
  double S_BW = 0.0;
  bool stable = false;
  bool feasible = false;  // stable and cost filter
  std::string note;
};

TopologyEval evaluate_topology(const RedesignContext& ctx, const Topology& T,
                               double cost_bound);

// Rows and columns of each CN, in permuted order.
struct GroupSplit {
  std::vector<std::vector<int>> rows;
  std::vector<std::vector<int>> cols;

  static GroupSplit from(const Topology& T);
  Topology topology() const;
  int size() const { return static_cast<int>(rows.size()); }
};

struct PartitionCandidate {
  int row_cut = 0;  // rows kept by the source group
  int col_cut = 0;
  TopologyEval eval;
};

struct PartitionResult {
  std::vector<PartitionCandidate> candidates;
  int chosen = -1;     // best feasible, -1 if none survives the filter
  int fallback = -1;   // best stable candidate regardless of cost
};

// Splits rows of group p and columns of group q (already ordered) into a
// new CN over all (|p|-1)(|q|-1) cut positions.
PartitionResult optimal_partition(const RedesignContext& ctx, const GroupSplit& g,
                                  int p, int q, double cost_bound);

GroupSplit apply_cut(const GroupSplit& g, int p, int q, int row_cut, int col_cut);

struct RedesignMap {
  std::map<int, TopologyEval> by_N;
  TopologyEval initial;
};

RedesignMap recursive_divide(const RedesignContext& ctx);

struct O3Result {
  int N_star = 0;
  TopologyEval best;
  bool fallback = false;
  int N_low_cost = -1;  // lowest S_CN with J <= J(initial)
};

O3Result solve_O3(const RedesignMap& map);

struct Prop2Stats {
  int N = 0;
  int N_m = 0;
  int links_N = 0;   // sum n_off at N
  int links_Nm = 0;
};

struct Prop2Report {
  double fraction_N = 0.0;
  double fraction_Nm = 0.0;
  bool fraction_condition = false;
  bool n_le_m = false;
  bool regime_feasible = false;
  bool count_condition = false;  // N(N-1) n <= N_m (N_m - 1)
  double phi_max = 0.0;          // n - 1
  std::string summary() const;
};

Prop2Report prop2_feasibility(int m, int n, const Prop2Stats& s);
// sum_i noff_i sum_{j != i} n_j / n^T noff; 0 when no links.
double offdiag_phi(const std::vector<int>& n_sizes, const std::vector<int>& n_off);

void write_topology_csv(std::ostream& os, const RedesignMap& map);
// '*' nonzero, '.' zero, group boundaries drawn with '|' and '-'.
std::string sparsity_grid(const MatrixXd& K, const Topology& T);

struct BlockSparseRow {
  int N = 0;
  double S_BW_redesign = 0.0;
  double S_BW_block = 0.0;
  double S_CN = 0.0;
  double J_redesign = 0.0;
  double J_block = 0.0;
  int nnz_block = 0;
  int blocks_target = 0;  // nonzero blocks of the redesign gain
  int blocks_block = 0;
  double gamma = 0.0;     // last gamma of the shrinkage path
  std::string note;
};

// Group-shrinkage ADMM from K_start (default ctx.K) on each redesigned
// block structure; gamma doubles from cfg.gamma until the number of nonzero
// blocks is at most that of ctx.K.
std::vector<BlockSparseRow> block_sparse_baseline(const RedesignContext& ctx,
                                                  const RedesignMap& map,
                                                  const AdmmConfig& cfg,
                                                  const MatrixXd& K_start = {},
                                                  int max_steps = 16);

}  // namespace dcd
