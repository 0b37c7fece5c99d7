#pragma once

#include "smpc/pipeline.hpp"

namespace smpc::testing {

// DC-DC converter model used as the flagship fixture.
inline LtiSystem converter_system(int T = 8) {
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.0075, -0.143, 0.996;
  s.B.resize(2, 1);
  s.B << 4.798, 0.115;
  s.Bw = MatrixXd::Identity(2, 2);
  s.Q = Eigen::Vector2d(1.0, 10.0).asDiagonal();
  s.R = MatrixXd::Identity(1, 1);
  s.T = T;
  return s;
}

inline LtiSystem scalar_system(double a, double b, double q, double r, int T) {
  LtiSystem s;
  s.A = MatrixXd::Constant(1, 1, a);
  s.B = MatrixXd::Constant(1, 1, b);
  s.Bw = MatrixXd::Identity(1, 1);
  s.Q = MatrixXd::Constant(1, 1, q);
  s.R = MatrixXd::Constant(1, 1, r);
  s.T = T;
  return s;
}

// Truncated Gaussian disturbance, Σ = 0.04² I, ‖w‖² ≤ 0.02, octagon support.
inline DisturbanceModel converter_disturbance(std::uint64_t seed = 1) {
  return DisturbanceModel::truncated_gaussian(
      0.04 * 0.04 * MatrixXd::Identity(2, 2), 0.02, 8, seed);
}

// |x1| ≤ 2, |x2| ≤ 3 at ε = 0.2 and |u| ≤ 0.2.
inline ProblemConfig converter_box_config() {
  ProblemConfig cfg;
  cfg.sys = converter_system();
  cfg.disturbance = converter_disturbance();
  ConstraintSpec& c = cfg.constraints;
  c.H.resize(4, 2);
  c.H << 1, 0, -1, 0, 0, 1, 0, -1;
  c.h = Eigen::Vector4d(2, 2, 3, 3);
  c.eps = VectorXd::Constant(4, 0.2);
  c.G.resize(2, 1);
  c.G << 1, -1;
  c.g = VectorXd::Constant(2, 0.2);
  return cfg;
}

// Single chance constraint x1 ≤ 2 at ε = 0.2 with |u| ≤ 0.2.
inline ProblemConfig converter_single_row_config() {
  ProblemConfig cfg = converter_box_config();
  cfg.constraints.H = cfg.constraints.H.topRows(1).eval();
  cfg.constraints.h = VectorXd::Constant(1, 2.0);
  cfg.constraints.eps = VectorXd::Constant(1, 0.2);
  return cfg;
}

}  // namespace smpc::testing
