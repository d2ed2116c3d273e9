#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dcd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// |A z + b| <= c^T z + d
struct SocConstraint {
  MatrixXd A;
  VectorXd b;
  VectorXd c;
  double d = 0.0;
};

// F0 + sum_k z_k F[k] <= 0 (negative semidefinite)
struct LmiConstraint {
  MatrixXd F0;
  std::vector<MatrixXd> F;
};

// minimize 1/2 z^T H z + f^T z  s.t.  G z <= h, SOCs, LMIs
struct ConicProblem {
  int nv = 0;
  MatrixXd H;
  VectorXd f;
  MatrixXd G;
  VectorXd h;
  std::vector<SocConstraint> socs;
  std::vector<LmiConstraint> lmis;

  explicit ConicProblem(int n = 0);
  void add_linear(const VectorXd& g, double rhs);
  void add_bounds(int var, double lo, double hi);
  // |A z + b|^2 <= e^T z as a rotated cone
  void add_squared_norm(const MatrixXd& A, const VectorXd& b, const VectorXd& e);
};

struct ConicOptions {
  double tol = 1e-9;        // barrier parameter / t at exit, relative
  double mu = 10.0;
  int max_newton = 200;
  int max_outer = 60;
};

enum class ConicStatus { kOptimal, kInfeasible, kMaxIter };

struct ConicResult {
  ConicStatus status = ConicStatus::kMaxIter;
  VectorXd z;
  double objective = 0.0;
  double gap = 0.0;
  int newton_steps = 0;
  std::string message;
};

// Strictly feasible point or an infeasibility verdict (phase I).
ConicResult find_interior(const ConicProblem& p, const VectorXd& z0,
                          const ConicOptions& opt = {});

// Barrier method; z0 must be strictly feasible if given, otherwise phase I
// runs first.
ConicResult solve_conic(const ConicProblem& p, const VectorXd* z0 = nullptr,
                        const ConicOptions& opt = {});

// Largest constraint value (<= 0 means feasible, < 0 strictly).
double max_violation(const ConicProblem& p, const VectorXd& z);

}  // namespace dcd
