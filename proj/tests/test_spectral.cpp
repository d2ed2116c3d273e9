#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "dcd/h2.hpp"
#include "dcd/spectral.hpp"
#include "oracles.hpp"

using namespace dcd;

TEST(ChebyshevGrid, SmallCases) {
  EXPECT_EQ(chebyshev_grid(2, 1.0), (VectorXd(2) << -1, 0).finished());
  const VectorXd g3 = chebyshev_grid(3, 2.0);
  EXPECT_NEAR(g3(0), -2.0, 1e-15);
  EXPECT_NEAR(g3(1), -1.0, 1e-15);
  EXPECT_NEAR(g3(2), 0.0, 1e-15);
  EXPECT_THROW(chebyshev_grid(1, 1.0), std::invalid_argument);
}

TEST(ChebyshevGrid, SymmetricAndIncreasing) {
  for (int N : {5, 8, 13}) {
    const VectorXd g = chebyshev_grid(N, 0.7);
    for (int k = 0; k < N; ++k) EXPECT_NEAR(g(k) + g(N - 1 - k), -0.7, 1e-14);
    for (int k = 0; k + 1 < N; ++k) EXPECT_LT(g(k), g(k + 1));
  }
}

TEST(Lambda, ClosedFormMatchesGenericDifferentiation) {
  for (int N = 2; N <= 16; ++N) {
    const MatrixXd D = build_lambda(N, 1);
    MatrixXd ref = oracle::lagrange_diff(chebyshev_grid(N, 1.0));
    ref.row(N - 1).setZero();
    EXPECT_LT((D - ref).norm(), 1e-9 * (1.0 + ref.norm())) << "N=" << N;
  }
}

TEST(Lambda, RowStructure) {
  for (int N = 4; N <= 10; ++N) {
    const MatrixXd L = build_lambda(N, 2);
    EXPECT_EQ(L.bottomRows(2), MatrixXd::Zero(2, 2 * N));
    for (int i = 0; i < N - 1; ++i) {
      MatrixXd s = MatrixXd::Zero(2, 2);
      for (int j = 0; j < N; ++j) s += L.block(2 * i, 2 * j, 2, 2);
      EXPECT_LT(s.norm(), 1e-9 * N * N);
    }
    EXPECT_LT((L - Eigen::kroneckerProduct(build_lambda(N, 1), MatrixXd::Identity(2, 2)).eval()).norm(), 1e-15);
  }
}

TEST(Lambda, ConstantFunctionHasZeroDerivative) {
  const int N = 7, n = 2;
  const auto basis = make_basis(N, n);
  const MatrixXd Z = MatrixXd::Zero(n, n);
  PlantModel p(Z, MatrixXd::Identity(n, n), MatrixXd::Identity(n, n),
               MatrixXd::Identity(n, n), MatrixXd::Identity(n, n));
  const auto loop = build_closed_loop(p, Z, full_masks(n, n), 0.3, 0.4, basis);
  VectorXd x0(n);
  x0 << 1.5, -2.0;
  const VectorXd eta = Eigen::kroneckerProduct(VectorXd::Ones(N), x0).eval();
  EXPECT_LT((loop.A_tilde * eta).norm(), 1e-9);
}

TEST(Gamma, EndpointsAndPartitionOfUnity) {
  // the monomial form loses digits past N = 9
  for (int N = 2; N <= 9; ++N) {
    const MatrixXd G = build_gamma(N);
    VectorXd eN = VectorXd::Zero(N), e1 = VectorXd::Zero(N);
    eN(N - 1) = 1;
    e1(0) = 1;
    EXPECT_LT((G * nu(0.0, N) - eN).norm(), 1e-10);
    EXPECT_LT((G * nu(1.0, N) - e1).norm(), 1e-10);
    for (double c : {0.1, 0.3, 0.77}) EXPECT_NEAR((G * nu(c, N)).sum(), 1.0, 1e-10);
  }
}

TEST(Gamma, ProductWeightsAgreeWithMonomialForm) {
  for (int N : {3, 6, 9, 14}) {
    const auto b = make_basis(N, 1);
    for (double c : {0.0, 0.21, 0.5, 0.93, 1.0}) {
      const VectorXd ref = b.Gamma * nu(c, N);
      EXPECT_LT((delay_weights(b, c) - ref).norm(), 1e-15 * b.Gamma.cwiseAbs().maxCoeff() * 100);
      EXPECT_LT((delay_weights_dc(b, c) - b.Gamma * dnu(c, N)).norm(),
                1e-15 * b.Gamma.cwiseAbs().maxCoeff() * 100 * N);
    }
  }
  for (int N : {20, 30}) {
    const auto b = make_basis(N, 1);
    for (double c : {0.13, 0.6}) EXPECT_NEAR(delay_weights(b, c).sum(), 1.0, 1e-10);
  }
}

TEST(Gamma, MatchesDirectLagrangeProduct) {
  const int N = 6;
  const MatrixXd G = build_gamma(N);
  const VectorXd grid = chebyshev_grid(N, 1.0);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 50; ++s) {
    const double c = u(rng);
    const VectorXd w = G * nu(c, N);
    for (int j = 0; j < N; ++j)
      EXPECT_NEAR(w(j), oracle::lagrange_basis(grid, j, -c), 1e-10);
  }
}

TEST(Nd, SelectorsAtEndpoints) {
  const auto b = make_basis(5, 3);
  EXPECT_LT((build_Nd(0.0, b) - last_block_selector(b)).norm(), 1e-10);
  EXPECT_LT((build_Nd(1.0, b) - first_block_selector(b)).norm(), 1e-10);
  EXPECT_NEAR(delay_weights(b, 0.3).sum(), 1.0, 1e-12);
  EXPECT_THROW(build_Nd(1.2, b), std::invalid_argument);
}

TEST(Nd, DerivativeMatchesFiniteDifference) {
  const auto b = make_basis(8, 2);
  const double c = 0.37, h = 1e-6;
  const MatrixXd fd = (build_Nd(c + h, b) - build_Nd(c - h, b)) / (2 * h);
  EXPECT_LT((fd - build_dNd(c, b)).norm(), 1e-6);
}

TEST(ClosedLoop, ScalarDelayBoundaryNearHalfPi) {
  const double t = oracle::scalar_delay_boundary(20);
  EXPECT_LT(std::abs(t - std::numbers::pi / 2) / (std::numbers::pi / 2), 0.01);
}

TEST(ClosedLoop, ZeroGainSpectrum) {
  const int N = 6, n = 2;
  const auto basis = make_basis(N, n);
  MatrixXd A(2, 2);
  A << -1, 2, 0, -3;
  PlantModel p(A, MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2),
               MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
  const auto loop = build_closed_loop(p, MatrixXd::Zero(2, 2), full_masks(2, 2), 0.5, 0.5, basis);
  // block upper triangular: the trailing block is A, the leading part is the
  // differentiation matrix restricted to the first N-1 nodes
  EXPECT_EQ(loop.A_cl.bottomLeftCorner(n, (N - 1) * n), MatrixXd::Zero(n, (N - 1) * n));
  Eigen::EigenSolver<MatrixXd> es(loop.A_cl, false);
  Eigen::EigenSolver<MatrixXd> ea(A, false);
  Eigen::EigenSolver<MatrixXd> ed(loop.A_cl.topLeftCorner((N - 1) * n, (N - 1) * n), false);
  std::vector<double> all, parts;
  for (int i = 0; i < es.eigenvalues().size(); ++i) all.push_back(std::abs(es.eigenvalues()(i)));
  for (int i = 0; i < ea.eigenvalues().size(); ++i) parts.push_back(std::abs(ea.eigenvalues()(i)));
  for (int i = 0; i < ed.eigenvalues().size(); ++i) parts.push_back(std::abs(ed.eigenvalues()(i)));
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  ASSERT_EQ(all.size(), parts.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_NEAR(all[i], parts[i], 1e-6 * (1 + parts[i]));
}

TEST(ClosedLoop, DelayCollapseConsistency) {
  std::mt19937 rng(5);
  const int n = 3, m = 2;
  const auto basis = make_basis(8, n);
  const auto in = oracle::random_stable_instance(rng, n, m, basis);
  // all gain on the tau_d path at c = 1 equals all gain on the tau_o path
  const auto a = build_closed_loop(in.plant, in.K, full_masks(m, n), in.tau_o, 1.0, basis);
  const GainMasks swapped{MatrixXd::Zero(m, n), MatrixXd::Ones(m, n)};
  const auto b = build_closed_loop(in.plant, in.K, swapped, in.tau_o, 1.0, basis);
  EXPECT_LT((a.A_cl - b.A_cl).norm(), 1e-8);
}

TEST(ClosedLoop, DecompositionInvariant) {
  std::mt19937 rng(9);
  const auto basis = make_basis(6, 3);
  const auto in = oracle::random_stable_instance(rng, 3, 2, basis);
  const auto L = build_closed_loop(in.plant, in.K, in.masks, in.tau_o, in.c, basis);
  const MatrixXd ref = L.A_tilde - L.calB * L.K_o * L.N_o.transpose() -
                       L.calB * L.K_d * L.N_d.transpose();
  EXPECT_LT((ref - L.A_cl).norm(), 1e-12 * (1 + ref.norm()));
}

TEST(AffineFit, ExactForTwoNodes) {
  EXPECT_LT(fit_affine_Nd(make_basis(2, 1), 4).max_error, 1e-12);
}

TEST(AffineFit, RefinementReducesError) {
  const auto b = make_basis(10, 1);
  const auto f10 = fit_affine_Nd(b, 10), f20 = fit_affine_Nd(b, 20);
  EXPECT_LT(f20.max_error, f10.max_error);
  for (int i = 0; i <= 10; ++i) {
    const double c = f10.breakpoints(i);
    EXPECT_LE((f10.weights(c) - delay_weights(b, c)).norm(), f10.max_error + 1e-12);
  }
}
