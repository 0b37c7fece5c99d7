#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smpc/invariant.hpp"
#include "smpc/qp.hpp"

namespace smpc {

/// Everything the online problem needs: model, gains, the nominal constraint
/// schedule and the optional extra constraints of each scheme.
struct ControllerSpec {
  LtiSystem sys;
  ControllerGains gains;
  NominalConstraints constraints;
  /// z_1 ∈ first_step when set.
  std::optional<Polytope> first_step;
  /// When set, z_0 becomes a decision variable with x − z_0 ∈ tube and the
  /// applied input is v_0 + K(x − z_0).
  std::optional<Polytope> tube;
  /// z_0 ∈ initial; only used with a free initial state.
  std::optional<Polytope> initial;

  int horizon() const { return sys.T; }
  bool free_initial_state() const { return tube.has_value(); }
};

struct RowGroup {
  std::string name;  // "state", "input", "terminal", "first_step", "tube", "initial"
  int stage = 0;
  Eigen::Index begin = 0;
  Eigen::Index count = 0;
};

/// Condensed problem min ½ yᵀ hessian y + linearᵀ y s.t. rows y ≤ offsets,
/// with y = (v_0..v_{T−1}) followed by z_0 when the initial state is free.
/// `constant` completes the value to the full predicted cost.
struct QpProblem {
  MatrixXd hessian;
  VectorXd linear;
  MatrixXd rows;
  VectorXd offsets;
  double constant = 0.0;
  std::vector<RowGroup> groups;
  VectorXd x;
};

struct QpSolution {
  qp::Status status = qp::Status::kInfeasible;
  MatrixXd v;  // m × T
  MatrixXd z;  // n × (T + 1)
  double value = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Condensed QP, parametric in the measured state x:
/// linear = F x, offsets = b0 + S x.
class CondensedQp {
 public:
  explicit CondensedQp(const ControllerSpec& spec);

  QpProblem at(const VectorXd& x) const;
  /// Decision vector of a plan (v, z_0).
  VectorXd pack(const MatrixXd& v, const VectorXd& z0) const;
  /// Predicted nominal states for a decision vector at state x.
  MatrixXd states(const VectorXd& y, const VectorXd& x) const;

  Eigen::Index variables() const { return hessian_.rows(); }
  Eigen::Index rows() const { return rows_.rows(); }
  const std::vector<RowGroup>& groups() const { return groups_; }
  const MatrixXd& hessian() const { return hessian_; }
  const MatrixXd& constraint_rows() const { return rows_; }

  /// Largest violation of the rows (excluding the named group) at x.
  double max_violation(const VectorXd& y, const VectorXd& x,
                       const std::string& skip_group = {}) const;

 private:
  int T_;
  Eigen::Index n_, m_;
  std::vector<MatrixXd> phi_;    // z_l = phi_l x + gamma_l y
  std::vector<MatrixXd> gamma_;
  MatrixXd hessian_;
  MatrixXd F_;
  MatrixXd C_;  // constant term xᵀ C x
  MatrixXd rows_;
  VectorXd b0_;
  MatrixXd S_;
  std::vector<RowGroup> groups_;
};

QpProblem build_qp(const ControllerSpec& spec, const VectorXd& x);
QpSolution solve_qp(const ControllerSpec& spec, const QpProblem& qp);

/// Shifted plan for time k + 1 from the optimal plan at time k and the
/// realized disturbance w_k.
struct CandidatePlan {
  MatrixXd v;   // m × T
  VectorXd z0;  // nominal initial state of the plan
  bool feasible = false;
  double max_violation = 0.0;
};

/// ṽ_i = v_{i+1} + K Acl^i Bw w (i ≤ T−2), ṽ_{T−1} = K(z_T + Acl^{T−1} Bw w).
/// With a free initial state the plan restarts from z̃_0 = z_1 and the tail
/// input is K z_T. Feasibility is checked against every row except the
/// first-step constraint, at the successor state.
CandidatePlan candidate_shift(const ControllerSpec& spec,
                              const CondensedQp& qp, const QpSolution& prev,
                              const VectorXd& w, const VectorXd& x_next,
                              double tol = 1e-8);

struct StepResult {
  VectorXd u;
  QpSolution solution;
};

/// Receding-horizon controller; owns the cached plan of the last step.
class MpcController {
 public:
  explicit MpcController(ControllerSpec spec);
  MpcController(const MpcController&) = delete;
  MpcController& operator=(const MpcController&) = delete;

  /// Solves the QP at x and returns u = v*_0 (+ K(x − z*_0) with a free
  /// initial state). On failure the status is reported and u is K x.
  StepResult step(const VectorXd& x);

  /// Candidate built from the last optimal plan; empty when there is none.
  std::optional<CandidatePlan> candidate(const VectorXd& w,
                                         const VectorXd& x_next) const;

  const ControllerSpec& spec() const { return spec_; }
  const CondensedQp& qp() const { return qp_; }
  void reset() { last_.reset(); }

 private:
  ControllerSpec spec_;
  CondensedQp qp_;
  qp::Solver solver_;
  std::optional<QpSolution> last_;
};

}  // namespace smpc
