#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dcd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PlantModel {
  MatrixXd A;
  MatrixXd B;
  MatrixXd B_w;
  MatrixXd Q;
  MatrixXd R;

  PlantModel() = default;
  // Validates dimensions and Q >= 0, R > 0.
  PlantModel(MatrixXd A, MatrixXd B, MatrixXd B_w, MatrixXd Q, MatrixXd R);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int r() const { return static_cast<int>(B_w.cols()); }
};

// CN assignment. Indices in X_order/U_order are zero based.
struct Topology {
  std::vector<int> X_order;
  std::vector<int> U_order;
  std::vector<int> n_sizes;
  std::vector<int> m_sizes;
  MatrixXd link_lengths;          // over the CN pool, may be empty
  std::vector<int> cn_pool;       // CN identities hosting the blocks

  int N_cn() const { return static_cast<int>(n_sizes.size()); }
  int n() const { return static_cast<int>(X_order.size()); }
  int m() const { return static_cast<int>(U_order.size()); }

  // Throws std::invalid_argument naming the offending index.
  void validate(bool allow_single_cn = false) const;

  // Offsets of block q in the permuted orders.
  std::vector<int> col_offsets() const;
  std::vector<int> row_offsets() const;
};

Topology make_topology(std::vector<int> X_order, std::vector<int> U_order,
                       std::vector<int> n_sizes, std::vector<int> m_sizes);

struct DelayPair {
  double tau_o = 0.0;
  double c = 0.0;
  double tau_d() const { return c * tau_o; }
  double tau_c() const { return (1.0 - c) * tau_o; }
  // Throws when c is outside (tau_dpr/tau_o, 1 - tau_cpr/tau_o).
  void validate(double tau_dpr = 0.0, double tau_cpr = 0.0) const;
};

struct GainMasks {
  MatrixXd I_d;
  MatrixXd I_o;
};

GainMasks build_masks(const Topology& T);
GainMasks full_masks(int m, int n);  // single CN holding everything

struct SplitGain {
  MatrixXd K_d;
  MatrixXd K_o;
};

SplitGain split_gain(const MatrixXd& K, const GainMasks& masks);

struct StabilizabilityReport {
  bool stabilizable = false;
  bool detectable = false;
  std::vector<double> uncontrollable_modes;   // real parts of failing modes
  std::vector<double> unobservable_modes;
  std::string summary() const;
};

StabilizabilityReport check_stabilizability(const PlantModel& plant);

// Symmetric PSD square root with negative eigenvalues clamped.
MatrixXd sqrtm_psd(const MatrixXd& S);
bool is_psd(const MatrixXd& S, bool strict);

}  // namespace dcd
