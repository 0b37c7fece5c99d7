#pragma once

#include "smpc/common.hpp"

namespace smpc::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Result {
  Status status = Status::kInfeasible;
  double value = 0.0;
  VectorXd x;  // maximizer, valid when status is kOptimal
};

/// maximize cᵀx subject to A x ≤ b with x free.
///
/// Solved through the standard-form dual (min bᵀy, Aᵀy = c, y ≥ 0) on a dense
/// tableau with Bland's rule, so the tableau has only dim(x) rows. Rows of A
/// are normalized internally; the returned value is in the caller's scaling.
Result maximize(const MatrixXd& A, const VectorXd& b, const VectorXd& c);

/// True when {x | A x ≤ b} is nonempty, decided by the Farkas alternative
/// min bᵀy s.t. Aᵀy = 0, 1ᵀy = 1, y ≥ 0 (normalized rows, slack tolerance tol).
bool feasible(const MatrixXd& A, const VectorXd& b, double tol = 1e-9);

/// Center and radius of the largest Euclidean ball inside {x | A x ≤ b}.
/// Radius is capped at `radius_cap` so unbounded sets stay well posed.
/// Returns radius < 0 when the set is empty.
struct Ball {
  VectorXd center;
  double radius = -1.0;
};
Ball chebyshev_ball(const MatrixXd& A, const VectorXd& b,
                    double radius_cap = 1e6);

}  // namespace smpc::lp
