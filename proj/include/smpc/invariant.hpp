#pragma once

#include <string>
#include <vector>

#include "smpc/lti.hpp"
#include "smpc/polytope.hpp"
#include "smpc/tightening.hpp"

namespace smpc {

struct FixedPointSettings {
  int terminal_cap = 500;
  int control_invariant_cap = 200;
  int mrpi_cap = 200;
  double equality_tol = kSetEqualityTol;
};

/// {x | H Acl x ≤ η_1, G K x ≤ g}.
Polytope terminal_constraint_set(const ControllerGains& gains,
                                 const MatrixXd& H, const VectorXd& eta1,
                                 const MatrixXd& G, const VectorXd& g);

struct TerminalSet {
  Polytope set;
  int iterations = 0;
  /// False when the iteration cap was hit and the last iterate was returned
  /// because it passed the invariance check.
  bool maximal = true;
};

/// Maximal robust positively invariant subset of `constraint` for
/// x⁺ = Acl x + Bw w, w ∈ W, by Ω_{i+1} = Ω_i ∩ Acl⁻¹(Ω_i ⊖ Bw W).
TerminalSet terminal_set(const MatrixXd& Acl, const Polytope& constraint,
                         const MatrixXd& Bw, const Polytope& W,
                         const FixedPointSettings& settings = {});

/// A X ⊕ Bw W ⊆ X, by support LPs.
bool is_robust_invariant(const Polytope& X, const MatrixXd& A,
                         const MatrixXd& Bw, const Polytope& W,
                         double tol = kSetEqualityTol);

struct MrpiApproximation {
  Polytope set;
  int terms = 0;          // s
  double alpha = 0.0;     // Acl^s Bw W ⊆ α Bw W
  bool invariant = false;  // A X ⊕ Bw W ⊆ X verified
};

/// Outer approximation of ⊕_{i≥0} Acl^i Bw W: the (1−α)⁻¹-scaled partial
/// sum ⊕_{i<s} Acl^i Bw W with α ≤ eps, which is itself robust invariant.
/// With facets > 0 it is re-expressed with fixed template normals (uniform
/// angles in 2-D, ±e_i otherwise) and offsets from summed supports; that
/// outer polytope need not be invariant, see `invariant`.
MrpiApproximation mrpi_outer(const MatrixXd& Acl, const MatrixXd& Bw,
                             const Polytope& W, double eps = 1e-3,
                             int facets = 0,
                             const FixedPointSettings& settings = {});

/// Constraint data of the nominal problem: Z_l (l = 1..T), V_l (l = 0..T−1)
/// and the terminal set Z_f.
struct NominalConstraints {
  MatrixXd H;
  std::vector<VectorXd> eta;  // η_1..η_T
  MatrixXd G;
  std::vector<VectorXd> mu;   // μ_0..μ_{T−1}
  Polytope Zf;

  int horizon() const { return static_cast<int>(eta.size()); }
  Polytope Z(int l) const { return Polytope(H, eta.at(l - 1)); }
};

NominalConstraints nominal_constraints(const ConstraintSpec& c,
                                       const TighteningSchedule& s);

/// Pairs (z_0, v_0) ∈ ℝ^{n+m} from which the tightened constraints and Z_f
/// can be met over the horizon, by backward recursion through projections.
Polytope t_step_set(const LtiSystem& sys, const NominalConstraints& nc);

struct ControlInvariantSet {
  Polytope set;
  int iterations = 0;
};

/// C^{i+1} = Proj_x{(x,u) ∈ C_T | x ∈ C^i, A x + B u ∈ C^i ⊖ Bw W} from
/// C^0 = Proj_x C_T until the sets agree.
ControlInvariantSet robust_control_invariant(const LtiSystem& sys,
                                             const Polytope& CT,
                                             const Polytope& W,
                                             const FixedPointSettings& settings = {});

Polytope first_step_set(const Polytope& Cinf, const MatrixXd& Bw,
                        const Polytope& W);

/// Largest λ with X_inf ⊕ λ·B ⊆ X_f (B the unit ball); negative when X_inf
/// sticks out of X_f.
double terminal_margin(const Polytope& Xinf, const Polytope& Xf);

}  // namespace smpc
