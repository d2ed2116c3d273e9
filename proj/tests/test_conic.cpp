#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dcd/conic.hpp"

using namespace dcd;

TEST(Conic, LinearProgram) {
  ConicProblem p(2);
  p.f << -1.0, -2.0;
  p.add_linear(Eigen::Vector2d(1.0, 1.0), 1.0);
  p.add_bounds(0, 0.0, INFINITY);
  p.add_bounds(1, 0.0, INFINITY);
  const ConicResult r = solve_conic(p);
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  EXPECT_NEAR(r.objective, -2.0, 1e-7);
  EXPECT_NEAR(r.z(1), 1.0, 1e-6);
}

TEST(Conic, SecondOrderCone) {
  ConicProblem p(2);
  p.f << 1.0, 1.0;
  SocConstraint s;
  s.A = MatrixXd::Identity(2, 2);
  s.b = VectorXd::Zero(2);
  s.c = VectorXd::Zero(2);
  s.d = 1.0;
  p.socs.push_back(s);
  const ConicResult r = solve_conic(p);
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  EXPECT_NEAR(r.objective, -std::sqrt(2.0), 1e-7);
}

TEST(Conic, LmiGivesLargestEigenvalue) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  MatrixXd C(5, 5);
  for (int i = 0; i < 25; ++i) C(i) = nd(rng);
  C = 0.5 * (C + C.transpose()).eval();
  ConicProblem p(1);
  p.f(0) = 1.0;
  LmiConstraint l;
  l.F0 = C;
  l.F = {-MatrixXd::Identity(5, 5)};
  p.lmis.push_back(l);
  const ConicResult r = solve_conic(p);
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
  EXPECT_NEAR(r.z(0), es.eigenvalues().maxCoeff(), 1e-6);
}

TEST(Conic, QuadraticObjectiveProjection) {
  ConicProblem p(3);
  const Eigen::Vector3d a(1.5, -0.7, 0.2);
  p.H = MatrixXd::Identity(3, 3);
  p.f = -a;
  for (int i = 0; i < 3; ++i) p.add_bounds(i, -INFINITY, 0.0);
  const ConicResult r = solve_conic(p);
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  EXPECT_NEAR(r.z(0), 0.0, 1e-6);
  EXPECT_NEAR(r.z(1), -0.7, 1e-6);
  EXPECT_NEAR(r.z(2), 0.0, 1e-6);
}

TEST(Conic, SquaredNormCone) {
  ConicProblem p(3);
  p.f << 0.0, 0.0, 1.0;
  MatrixXd A = MatrixXd::Zero(2, 3);
  A(0, 0) = 1.0;
  A(1, 1) = 1.0;
  VectorXd e = VectorXd::Zero(3);
  e(2) = 1.0;
  p.add_squared_norm(A, Eigen::Vector2d(-1.0, 2.0), e);
  p.add_bounds(0, -INFINITY, 0.5);
  const ConicResult r = solve_conic(p);
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  EXPECT_NEAR(r.objective, 0.25, 1e-6);
}

TEST(Conic, PhaseOneFindsInterior) {
  ConicProblem p(2);
  p.add_bounds(0, 2.0, 3.0);
  p.add_bounds(1, -5.0, -4.0);
  const ConicResult r = find_interior(p, VectorXd::Zero(2));
  ASSERT_EQ(r.status, ConicStatus::kOptimal);
  EXPECT_LT(max_violation(p, r.z), 0.0);
}

TEST(Conic, PhaseOneReportsInfeasible) {
  ConicProblem p(1);
  p.add_bounds(0, 1.0, -1.0);
  const ConicResult r = solve_conic(p);
  EXPECT_EQ(r.status, ConicStatus::kInfeasible);
}
