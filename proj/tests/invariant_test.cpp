#include "smpc/invariant.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "smpc/lp.hpp"

namespace smpc {
namespace {

Polytope interval(double lo, double hi) {
  return Polytope::box(VectorXd::Constant(1, lo), VectorXd::Constant(1, hi));
}

MatrixXd rotation(double angle, double gain) {
  MatrixXd R(2, 2);
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return gain * R;
}

// Vertex oracle for A X ⊕ Bw W ⊆ X: every image vertex sum lies in X.
bool invariant_by_vertices(const Polytope& X, const MatrixXd& A,
                           const MatrixXd& Bw, const Polytope& W) {
  for (const VectorXd& x : vertices_2d(X)) {
    for (const VectorXd& w : vertices_2d(W)) {
      if (!X.contains_point(A * x + Bw * w, 1e-7)) return false;
    }
  }
  return true;
}

TEST(TerminalSet, AlreadyInvariantConstraintIsReturned) {
  const MatrixXd A = rotation(0.3, 0.5);
  const Polytope box = Polytope::box(2, 1.0);
  // ‖0.5 R x‖∞ ≤ 0.5·√2 ‖x‖∞ < 1, so the unit box is invariant.
  const TerminalSet t = terminal_set(A, box, MatrixXd::Identity(2, 2),
                                     Polytope::point(VectorXd::Zero(2)));
  EXPECT_TRUE(equal(t.set, box));
  EXPECT_EQ(t.iterations, 1);
  EXPECT_TRUE(t.maximal);
}

TEST(TerminalSet, ScalarContractionKeepsTheConstraint) {
  // a = 0.5, |x| ≤ 1, w ∈ [−0.3, 0.3]: sup_k (0.5^k |x| + 0.6 (1 − 0.5^k)) ≤ 1
  // iff |x| ≤ 1.
  const TerminalSet t = terminal_set(MatrixXd::Constant(1, 1, 0.5),
                                     interval(-1, 1), MatrixXd::Identity(1, 1),
                                     interval(-0.3, 0.3));
  EXPECT_TRUE(equal(t.set, interval(-1, 1)));
}

TEST(TerminalSet, ScalarDisturbanceTooLargeIsEmpty) {
  // The mRPI set [−1.2, 1.2] does not fit in [−1, 1].
  EXPECT_THROW(
      {
        try {
          terminal_set(MatrixXd::Constant(1, 1, 0.5), interval(-1, 1),
                       MatrixXd::Identity(1, 1), interval(-0.6, 0.6));
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::kEmptyTerminalSet);
          throw;
        }
      },
      Error);
}

TEST(TerminalSet, RotationMatchesTrajectoryOracle) {
  const MatrixXd A = rotation(std::numbers::pi / 4, 0.95);
  const Polytope box = Polytope::box(2, 1.0);
  const TerminalSet t =
      terminal_set(A, box, MatrixXd::Identity(2, 2), Polytope::point(VectorXd::Zero(2)));
  // x is in the maximal PI set iff every future ‖A^k x‖∞ ≤ 1.
  auto admissible = [&](const Eigen::Vector2d& x0, double slack) {
    Eigen::Vector2d x = x0;
    for (int k = 0; k < 400; ++k) {
      if (x.cwiseAbs().maxCoeff() > 1.0 + slack) return false;
      x = A * x;
    }
    return true;
  };
  int checked = 0;
  for (double a = -1.0; a <= 1.0; a += 0.05) {
    for (double b = -1.0; b <= 1.0; b += 0.05) {
      const Eigen::Vector2d x(a, b);
      const bool inside = t.set.contains_point(x, 1e-9);
      // Skip points within 1e-6 of the boundary of either test.
      if (admissible(x, -1e-6) != admissible(x, 1e-6)) continue;
      EXPECT_EQ(inside, admissible(x, 0.0)) << x.transpose();
      ++checked;
    }
  }
  EXPECT_GT(checked, 1500);
}

TEST(TerminalSet, ConverterTerminalSetIsRobustInvariant) {
  const LtiSystem sys = testing::converter_system();
  const ControllerGains g = lqr_synthesize(sys);
  const DisturbanceModel model = testing::converter_disturbance();
  const Polytope W = model.support();
  MatrixXd H(4, 2);
  H << 1, 0, -1, 0, 0, 1, 0, -1;
  MatrixXd G(2, 1);
  G << 1, -1;
  const Polytope tilde = terminal_constraint_set(
      g, H, Eigen::Vector4d(1.9, 1.9, 2.9, 2.9), G, VectorXd::Constant(2, 0.2));
  const TerminalSet t = terminal_set(g.Acl, tilde, sys.Bw, W);
  EXPECT_FALSE(t.set.is_empty());
  EXPECT_TRUE(contains(tilde, t.set));
  EXPECT_TRUE(invariant_by_vertices(t.set, g.Acl, sys.Bw, W));
  EXPECT_TRUE(is_robust_invariant(t.set, g.Acl, sys.Bw, W));
}

TEST(Mrpi, ZeroClosedLoopGivesTheDisturbanceSet) {
  const Polytope W = Polytope::box(2, 0.3);
  const MrpiApproximation m =
      mrpi_outer(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), W);
  EXPECT_TRUE(equal(m.set, W));
  EXPECT_EQ(m.terms, 1);
  EXPECT_TRUE(m.invariant);
}

TEST(Mrpi, ScalarGeometricSeries) {
  const double eps = 1e-3;
  const MrpiApproximation m = mrpi_outer(MatrixXd::Constant(1, 1, 0.5),
                                         MatrixXd::Identity(1, 1),
                                         interval(-1, 1), eps);
  const auto [lo, hi] = bounding_box(m.set);
  EXPECT_GE(hi(0), 2.0 - 1e-12);
  EXPECT_LE(hi(0), 2.0 * (1.0 + eps));
  EXPECT_NEAR(lo(0), -hi(0), 1e-12);
  EXPECT_TRUE(m.invariant);
}

TEST(Mrpi, DegenerateDisturbanceGivesTheOrigin) {
  const MrpiApproximation m =
      mrpi_outer(MatrixXd::Identity(2, 2) * 0.5, MatrixXd::Identity(2, 2),
                 Polytope::point(VectorXd::Zero(2)));
  EXPECT_TRUE(m.set.contains_point(VectorXd::Zero(2)));
  EXPECT_NEAR(bounding_box(m.set).second.norm(), 0.0, 1e-12);
}

TEST(Mrpi, ConverterApproximationIsInvariant) {
  const LtiSystem sys = testing::converter_system();
  const ControllerGains g = lqr_synthesize(sys);
  const Polytope W = testing::converter_disturbance().support();
  const MrpiApproximation m = mrpi_outer(g.Acl, sys.Bw, W);
  EXPECT_LE(m.alpha, 1e-3);
  EXPECT_TRUE(m.invariant);
  EXPECT_TRUE(invariant_by_vertices(m.set, g.Acl, sys.Bw, W));
  // It contains every partial sum of the series.
  Rng rng = make_rng(4, 0);
  const DisturbanceModel model = testing::converter_disturbance();
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd e = VectorXd::Zero(2);
    for (int k = 0; k < 40; ++k) e = g.Acl * e + model.draw(rng);
    EXPECT_TRUE(m.set.contains_point(e, 1e-9));
  }
}

TEST(TStepSet, HorizonOneIsTheDirectExpansion) {
  const LtiSystem sys = testing::scalar_system(1.2, 1.0, 1.0, 1.0, 1);
  NominalConstraints nc;
  nc.H = MatrixXd::Constant(1, 1, 1.0);
  nc.eta = {VectorXd::Constant(1, 2.0)};
  nc.G = (MatrixXd(2, 1) << 1, -1).finished();
  nc.mu = {VectorXd::Constant(2, 0.5)};
  nc.Zf = interval(-1, 1);
  const Polytope CT = t_step_set(sys, nc);
  // {(x, v) | |v| ≤ 0.5, 1.2x + v ≤ 2, −1 ≤ 1.2x + v ≤ 1}
  MatrixXd D(5, 2);
  D << 0, 1, 0, -1, 1.2, 1, 1.2, 1, -1.2, -1;
  VectorXd d(5);
  d << 0.5, 0.5, 2, 1, 1;
  EXPECT_TRUE(equal(CT, Polytope(D, d)));
}

TEST(TStepSet, UnconstrainedDataGivesTheWholeSpace) {
  const LtiSystem sys = testing::converter_system(3);
  NominalConstraints nc;
  nc.H = MatrixXd::Identity(2, 2);
  const double inf = std::numeric_limits<double>::infinity();
  nc.eta.assign(3, VectorXd::Constant(2, inf));
  nc.G = MatrixXd::Identity(1, 1);
  nc.mu.assign(3, VectorXd::Constant(1, inf));
  nc.Zf = Polytope::universe(2);
  const Polytope CT = t_step_set(sys, nc);
  EXPECT_EQ(CT.rows(), 0);
  EXPECT_EQ(CT.dim(), 3);
}

TEST(TStepSet, EmptyStageIsReported) {
  const LtiSystem sys = testing::scalar_system(1.0, 1.0, 1.0, 1.0, 2);
  NominalConstraints nc;
  nc.H = (MatrixXd(2, 1) << 1, -1).finished();
  nc.eta = {VectorXd::Constant(2, 1.0), VectorXd::Constant(2, 1.0)};
  nc.G = (MatrixXd(2, 1) << 1, -1).finished();
  nc.mu = {VectorXd::Constant(2, 1.0), VectorXd::Constant(2, 1.0)};
  nc.Zf = interval(5, 6);  // disjoint from Z_2
  try {
    t_step_set(sys, nc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptySet);
    EXPECT_NE(std::string(e.what()).find("stage 2"), std::string::npos);
  }
}

TEST(ControlInvariant, RobustInvariantProjectionIsAFixedPoint) {
  // x⁺ = x + u + w with |x| ≤ 1, |u| ≤ 1, |w| ≤ 0.1: u = −x keeps every
  // state, so C^1 = C^0 = [−1, 1].
  const LtiSystem sys = testing::scalar_system(1.0, 1.0, 1.0, 1.0, 1);
  MatrixXd D(4, 2);
  D << 1, 0, -1, 0, 0, 1, 0, -1;
  const Polytope CT(D, VectorXd::Ones(4));
  const ControlInvariantSet c =
      robust_control_invariant(sys, CT, interval(-0.1, 0.1));
  EXPECT_EQ(c.iterations, 1);
  EXPECT_TRUE(equal(c.set, interval(-1, 1)));
}

TEST(ControlInvariant, ZeroDisturbanceReducesToControlInvariance) {
  // x⁺ = 2x + u with |u| ≤ 1 and |x| ≤ 5: control invariant part is |x| ≤ 1.
  const LtiSystem sys = testing::scalar_system(2.0, 1.0, 1.0, 1.0, 1);
  MatrixXd D(4, 2);
  D << 1, 0, -1, 0, 0, 1, 0, -1;
  const Polytope CT(D, Eigen::Vector4d(5, 5, 1, 1));
  const ControlInvariantSet c =
      robust_control_invariant(sys, CT, Polytope::point(VectorXd::Zero(1)));
  EXPECT_TRUE(equal(c.set, interval(-1, 1), 1e-7));
}

TEST(ControlInvariant, ConverterVerticesAdmitAnInput) {
  const ProblemConfig cfg = testing::converter_box_config();
  const SetPipelineResult r = run_pipeline(cfg);
  const Polytope target = pontryagin_diff(r.Cinf, cfg.model().support(), cfg.sys.Bw);
  const LtiSystem& sys = cfg.sys;
  for (const VectorXd& x : vertices_2d(r.Cinf)) {
    // Find u with (x, u) ∈ C_T and A x + B u ∈ C_∞ ⊖ Bw W as an LP in u.
    const Eigen::Index rows = r.CT.rows() + target.rows();
    MatrixXd A(rows, 1);
    VectorXd b(rows);
    A.topRows(r.CT.rows()) = r.CT.normals().rightCols(1);
    b.head(r.CT.rows()) = r.CT.offsets() - r.CT.normals().leftCols(2) * x;
    A.bottomRows(target.rows()) = target.normals() * sys.B;
    b.tail(target.rows()) = target.offsets() - target.normals() * sys.A * x;
    EXPECT_TRUE(lp::feasible(A, b, 1e-7)) << x.transpose();
  }
}

TEST(FirstStepSet, IsAPontryaginDifference) {
  const Polytope C = Polytope::box(2, 2.0);
  const Polytope F =
      first_step_set(C, MatrixXd::Identity(2, 2) * 2.0, Polytope::box(2, 0.25));
  EXPECT_TRUE(equal(F, Polytope::box(2, 1.5)));
  EXPECT_THROW(first_step_set(C, MatrixXd::Identity(2, 2), Polytope::box(2, 3.0)),
               Error);
}

TEST(TerminalMargin, BoxInBox) {
  EXPECT_NEAR(terminal_margin(Polytope::box(2, 0.5), Polytope::box(2, 2.0)), 1.5,
              1e-12);
  EXPECT_LT(terminal_margin(Polytope::box(2, 3.0), Polytope::box(2, 2.0)), 0.0);
}

}  // namespace
}  // namespace smpc
