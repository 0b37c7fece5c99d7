#pragma once

#include "smpc/common.hpp"

namespace smpc::qp {

enum class Status { kOptimal, kInfeasible, kMaxIterations };
std::string_view to_string(Status s);

struct Solution {
  Status status = Status::kInfeasible;
  VectorXd y;
  VectorXd multipliers;  // one per constraint row, ≥ 0
  double value = 0.0;    // ½ yᵀ G y + aᵀ y
  double kkt_residual = 0.0;
  int iterations = 0;
};

inline constexpr int kDefaultIterationCap = 10000;

/// minimize ½ yᵀ G y + aᵀ y  subject to  N y ≤ b, for G ≻ 0.
///
/// Goldfarb–Idnani dual active-set method. It starts at the unconstrained
/// minimizer and adds the most violated row (lowest index on ties) until
/// primal feasibility, so results are deterministic. Infeasibility is
/// declared when a violated row admits neither a primal nor a dual step.
class Solver {
 public:
  /// Factorizes G once; the same solver handles any (a, b) pair.
  Solver(const MatrixXd& G, const MatrixXd& N);

  Solution solve(const VectorXd& a, const VectorXd& b,
                 int iteration_cap = kDefaultIterationCap) const;

  Eigen::Index variables() const { return G_.rows(); }
  Eigen::Index rows() const { return N_.rows(); }

 private:
  MatrixXd G_;
  MatrixXd N_;        // rows scaled to unit norm
  VectorXd row_scale_;  // original row norms
  MatrixXd J0_;       // L⁻ᵀ
};

/// Convenience wrapper building a Solver for a single solve.
Solution solve(const MatrixXd& G, const VectorXd& a, const MatrixXd& N,
               const VectorXd& b, int iteration_cap = kDefaultIterationCap);

/// max(‖G y + a + Nᵀλ‖∞, max(N y − b)⁺, max |λ_i (b − N y)_i|, max(−λ)⁺).
double kkt_residual(const MatrixXd& G, const VectorXd& a, const MatrixXd& N,
                    const VectorXd& b, const VectorXd& y,
                    const VectorXd& lambda);

}  // namespace smpc::qp
