#include "smpc/qp.hpp"

#include <random>

#include <gtest/gtest.h>

namespace smpc::qp {
namespace {

// Accelerated projected gradient on the dual
//   max_{λ≥0} −½(a + Nᵀλ)ᵀ G⁻¹ (a + Nᵀλ) − bᵀλ,
// with adaptive restart; returns the recovered primal objective.
double dual_gradient_oracle(const MatrixXd& G, const VectorXd& a,
                            const MatrixXd& N, const VectorXd& b) {
  const MatrixXd Gi = G.inverse();
  const MatrixXd M = N * Gi * N.transpose();
  const VectorXd c = N * Gi * a + b;
  const double L = Eigen::SelfAdjointEigenSolver<MatrixXd>(M)
                       .eigenvalues()
                       .maxCoeff() + 1e-12;
  VectorXd lam = VectorXd::Zero(N.rows());
  VectorXd mom = lam;
  double t = 1.0;
  for (int it = 0; it < 400000; ++it) {
    const VectorXd grad = M * mom + c;  // gradient of the negated dual
    const VectorXd next = (mom - grad / L).cwiseMax(0.0);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if ((next - lam).dot(mom - next) > 0.0) {
      mom = next;
      t = 1.0;
    } else {
      mom = next + ((t - 1.0) / tn) * (next - lam);
      t = tn;
    }
    if ((next - lam).norm() < 1e-15) {
      lam = next;
      break;
    }
    lam = next;
  }
  const VectorXd y = -Gi * (a + N.transpose() * lam);
  return 0.5 * y.dot(G * y) + a.dot(y);
}

TEST(Qp, UnconstrainedMatchesNewtonStep) {
  MatrixXd G(2, 2);
  G << 4, 1, 1, 3;
  VectorXd a(2);
  a << 1, -2;
  const MatrixXd N(0, 2);
  const Solution s = solve(G, a, N, VectorXd(0));
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_LT((s.y + G.ldlt().solve(a)).norm(), 1e-12);
}

TEST(Qp, ScalarBoundIsActive) {
  // min (v − 3)² s.t. v ≤ 1.
  MatrixXd G(1, 1);
  G << 2;
  VectorXd a(1);
  a << -6;
  MatrixXd N(1, 1);
  N << 1;
  VectorXd b(1);
  b << 1;
  const Solution s = solve(G, a, N, b);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.y(0), 1.0, 1e-12);
  EXPECT_NEAR(s.multipliers(0), 4.0, 1e-12);
  EXPECT_LE(s.kkt_residual, 1e-8);
}

TEST(Qp, DetectsInfeasibility) {
  MatrixXd G = MatrixXd::Identity(2, 2);
  VectorXd a = VectorXd::Zero(2);
  MatrixXd N(2, 2);
  N << 1, 0, -1, 0;
  VectorXd b(2);
  b << -1, -1;  // x ≤ −1 and x ≥ 1
  EXPECT_EQ(solve(G, a, N, b).status, Status::kInfeasible);
}

TEST(Qp, ZeroRowWithNegativeOffsetIsInfeasible) {
  MatrixXd N = MatrixXd::Zero(1, 2);
  VectorXd b(1);
  b << -1e-3;
  EXPECT_EQ(solve(MatrixXd::Identity(2, 2), VectorXd::Zero(2), N, b).status,
            Status::kInfeasible);
}

TEST(Qp, IterationCapIsReported) {
  MatrixXd G = MatrixXd::Identity(2, 2);
  VectorXd a(2);
  a << -5, -5;
  MatrixXd N(2, 2);
  N << 1, 0, 0, 1;
  VectorXd b(2);
  b << 1, 1;
  EXPECT_EQ(solve(G, a, N, b, 1).status, Status::kMaxIterations);
}

TEST(Qp, DegenerateDuplicateRows) {
  MatrixXd G = MatrixXd::Identity(2, 2);
  VectorXd a(2);
  a << -2, -2;
  MatrixXd N(4, 2);
  N << 1, 0, 2, 0, 0, 1, 1, 1;
  VectorXd b(4);
  b << 1, 2, 1, 2;
  const Solution s = solve(G, a, N, b);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.y(0), 1.0, 1e-10);
  EXPECT_NEAR(s.y(1), 1.0, 1e-10);
  EXPECT_LE(s.kkt_residual, 1e-8);
}

TEST(Qp, RandomFeasibleInstancesMatchDualGradientOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 6;
    const int m = 1 + static_cast<int>(unit(rng) * 3 * n);
    MatrixXd F(n, n);
    for (auto& v : F.reshaped()) v = normal(rng);
    const MatrixXd G = F * F.transpose() + 0.5 * MatrixXd::Identity(n, n);
    VectorXd a(n), y0(n);
    for (auto& v : a) v = 3.0 * normal(rng);
    for (auto& v : y0) v = normal(rng);
    MatrixXd N(m, n);
    for (auto& v : N.reshaped()) v = normal(rng);
    const VectorXd b = N * y0 + VectorXd::NullaryExpr(m, [&] { return unit(rng); });
    const Solution s = solve(G, a, N, b);
    ASSERT_EQ(s.status, Status::kOptimal) << "trial " << trial;
    EXPECT_LE(s.kkt_residual, 1e-8) << "trial " << trial;
    EXPECT_LE((N * s.y - b).maxCoeff(), 1e-8);
    EXPECT_NEAR(s.value, dual_gradient_oracle(G, a, N, b), 1e-6)
        << "trial " << trial;
  }
}

TEST(Qp, SolverIsReusableAcrossRightHandSides) {
  MatrixXd G = MatrixXd::Identity(1, 1);
  MatrixXd N(2, 1);
  N << 1, -1;
  Solver solver(G, N);
  VectorXd a(1);
  a << -3;
  VectorXd b(2);
  b << 1, 1;
  EXPECT_NEAR(solver.solve(a, b).y(0), 1.0, 1e-12);
  b << 5, 1;
  EXPECT_NEAR(solver.solve(a, b).y(0), 3.0, 1e-12);
}

TEST(Qp, RejectsIndefiniteHessian) {
  MatrixXd G(1, 1);
  G << -1;
  EXPECT_THROW(Solver(G, MatrixXd(0, 1)), Error);
}

}  // namespace
}  // namespace smpc::qp
