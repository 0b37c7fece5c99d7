#include "smpc/lp.hpp"

#include <random>

#include <gtest/gtest.h>

namespace smpc::lp {
namespace {

// Brute-force oracle for 2-D LPs: best feasible pairwise intersection.
double brute_force_max(const MatrixXd& A, const VectorXd& b,
                       const VectorXd& c) {
  double best = -1e300;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < A.rows(); ++j) {
      Eigen::Matrix2d M;
      M << A.row(i), A.row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d x = M.inverse() * Eigen::Vector2d(b(i), b(j));
      if (((A * x - b).array() <= 1e-9).all()) best = std::max(best, c.dot(x));
    }
  }
  return best;
}

TEST(Lp, UnitBoxCorner) {
  MatrixXd A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  VectorXd b(4);
  b << 1, 1, 2, 2;
  VectorXd c(2);
  c << 1, 1;
  const Result r = maximize(A, b, c);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.value, 3.0, 1e-12);
  EXPECT_NEAR(r.x(0), 1.0, 1e-12);
  EXPECT_NEAR(r.x(1), 2.0, 1e-12);
}

TEST(Lp, DetectsUnboundedAndInfeasible) {
  MatrixXd A(1, 2);
  A << 1, 0;
  VectorXd b(1);
  b << 1;
  VectorXd c(2);
  c << 0, 1;
  EXPECT_EQ(maximize(A, b, c).status, Status::kUnbounded);

  MatrixXd B(2, 1);
  B << 1, -1;
  VectorXd d(2);
  d << -1, -1;  // x ≤ −1 and x ≥ 1
  VectorXd e(1);
  e << 1;
  EXPECT_EQ(maximize(B, d, e).status, Status::kInfeasible);
  EXPECT_FALSE(feasible(B, d));
  d << 1, 1;
  EXPECT_TRUE(feasible(B, d));
}

TEST(Lp, MatchesBruteForceOnRandomPolygons) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 3 + trial % 12;
    MatrixXd A(m, 2);
    VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      const double th = 2.0 * M_PI * (i + 0.3 * g(rng)) / m;
      A.row(i) << std::cos(th), std::sin(th);
      b(i) = 1.0 + 0.2 * std::abs(g(rng));
    }
    VectorXd c(2);
    c << g(rng), g(rng);
    const Result r = maximize(A, b, c);
    const double oracle = brute_force_max(A, b, c);
    if (oracle < -1e299) continue;  // oracle failed: sampled set unbounded
    if (r.status != Status::kOptimal) continue;
    EXPECT_NEAR(r.value, oracle, 1e-9) << "trial " << trial;
    EXPECT_LE((A * r.x - b).maxCoeff(), 1e-9);
    EXPECT_NEAR(c.dot(r.x), r.value, 1e-9);
  }
}

TEST(Lp, DegenerateVertexTerminates) {
  // Many constraints through the same vertex (1, 1).
  MatrixXd A(6, 2);
  A << 1, 0, 0, 1, 1, 1, 2, 1, 1, 2, -1, -1;
  VectorXd b(6);
  b << 1, 1, 2, 3, 3, 10;
  VectorXd c(2);
  c << 1, 1;
  const Result r = maximize(A, b, c);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
}

TEST(Lp, ChebyshevBallOfBox) {
  MatrixXd A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  VectorXd b(4);
  b << 3, 1, 1, 1;  // [−1,3] × [−1,1]
  const Ball ball = chebyshev_ball(A, b);
  EXPECT_NEAR(ball.radius, 1.0, 1e-12);
  EXPECT_NEAR(ball.center(1), 0.0, 1e-12);
  b << -2, 1, 1, 1;
  EXPECT_LT(chebyshev_ball(A, b).radius, 0.0);
}

TEST(Lp, HigherDimensionalSimplex) {
  const int n = 6;
  MatrixXd A(n + 1, n);
  A.topRows(n) = -MatrixXd::Identity(n, n);
  A.row(n).setOnes();
  VectorXd b = VectorXd::Zero(n + 1);
  b(n) = 1.0;
  VectorXd c = VectorXd::LinSpaced(n, 1.0, 2.0);
  const Result r = maximize(A, b, c);
  ASSERT_EQ(r.status, Status::kOptimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_NEAR(r.x(n - 1), 1.0, 1e-12);
}

}  // namespace
}  // namespace smpc::lp
