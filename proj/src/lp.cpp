#include "smpc/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace smpc::lp {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kReducedCostTol = 1e-11;
constexpr int kMaxPivots = 100000;

enum class StdStatus { kOptimal, kInfeasible, kUnbounded };

struct StdResult {
  StdStatus status = StdStatus::kInfeasible;
  double value = 0.0;
  VectorXd y;
  VectorXd multipliers;  // simplex multipliers of E y = f
};

// Dense tableau simplex for: min costᵀy  s.t.  E y = f,  y ≥ 0.
// One artificial column per row is appended and kept for the whole run: it
// never re-enters in phase 2, and its reduced cost yields the multipliers.
class Tableau {
 public:
  Tableau(const MatrixXd& E, const VectorXd& f)
      : rows_(E.rows()), structural_(E.cols()),
        cols_(E.cols() + E.rows()), t_(E.rows(), E.cols() + E.rows() + 1),
        row_sign_(E.rows()), basis_(E.rows()) {
    t_.setZero();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      row_sign_(i) = f(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(structural_) = row_sign_(i) * E.row(i);
      t_(i, structural_ + i) = 1.0;
      t_(i, cols_) = row_sign_(i) * f(i);
      basis_[i] = structural_ + i;
    }
  }

  // Runs simplex iterations for `cost` (length cols_) allowing only columns
  // < allowed_cols to enter. Returns false when unbounded.
  bool optimize(const VectorXd& cost, Eigen::Index allowed_cols) {
    reduced_ = cost;
    objective_ = 0.0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) {
        reduced_ -= cb * t_.row(i).head(cols_).transpose();
        objective_ += cb * t_(i, cols_);
      }
    }
    for (int it = 0; it < kMaxPivots; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (reduced_(j) < -kReducedCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = std::max(t_(i, cols_), 0.0) / a;
        if (leave < 0 || ratio < best - 1e-13) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-13 && basis_[i] < basis_[leave]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    fail(Errc::kMaxIterations, "simplex pivot cap reached");
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double factor = t_(i, c);
      if (factor != 0.0) t_.row(i) -= factor * t_.row(r);
    }
    const double rc = reduced_.size() > 0 ? reduced_(c) : 0.0;
    if (rc != 0.0) {
      reduced_ -= rc * t_.row(r).head(cols_).transpose();
      objective_ += rc * t_(r, cols_);
    }
    basis_[r] = c;
  }

  // Pivots zero-level artificials out of the basis where a structural column
  // allows it. Rows where none does are linearly dependent and stay inert.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[i] < structural_) continue;
      Eigen::Index best = -1;
      double mag = 1e-9;
      for (Eigen::Index j = 0; j < structural_; ++j) {
        if (std::abs(t_(i, j)) > mag) {
          mag = std::abs(t_(i, j));
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

  double objective() const { return objective_; }
  Eigen::Index cols() const { return cols_; }
  Eigen::Index structural() const { return structural_; }

  VectorXd solution() const {
    VectorXd y = VectorXd::Zero(structural_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[i] < structural_) y(basis_[i]) = std::max(t_(i, cols_), 0.0);
    }
    return y;
  }

  // Multipliers π of the original (unsigned) rows. With zero phase-2 cost on
  // artificial columns, reduced cost of artificial i is −π̃_i.
  VectorXd multipliers() const {
    VectorXd pi(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      pi(i) = -reduced_(structural_ + i) * row_sign_(i);
    }
    return pi;
  }

 private:
  Eigen::Index rows_;
  Eigen::Index structural_;
  Eigen::Index cols_;
  MatrixXd t_;
  VectorXd row_sign_;
  std::vector<Eigen::Index> basis_;
  VectorXd reduced_;
  double objective_ = 0.0;
};

StdResult solve_standard(const MatrixXd& E, const VectorXd& f,
                         const VectorXd& cost) {
  Tableau tab(E, f);
  const Eigen::Index n = E.cols();
  VectorXd phase1 = VectorXd::Zero(tab.cols());
  phase1.tail(E.rows()).setOnes();
  tab.optimize(phase1, n);
  StdResult out;
  const double scale = 1.0 + (f.size() > 0 ? f.cwiseAbs().maxCoeff() : 0.0);
  if (tab.objective() > 1e-9 * scale) {
    out.status = StdStatus::kInfeasible;
    return out;
  }
  tab.drive_out_artificials();
  VectorXd phase2 = VectorXd::Zero(tab.cols());
  phase2.head(n) = cost;
  if (!tab.optimize(phase2, n)) {
    out.status = StdStatus::kUnbounded;
    return out;
  }
  out.status = StdStatus::kOptimal;
  out.y = tab.solution();
  out.value = cost.dot(out.y);
  out.multipliers = tab.multipliers();
  return out;
}

struct Normalized {
  MatrixXd A;
  VectorXd b;
  bool trivially_infeasible = false;
};

Normalized normalize_rows(const MatrixXd& A, const VectorXd& b, double tol) {
  require(A.rows() == b.size(), Errc::kDimensionMismatch,
          "constraint matrix and offset rows differ");
  Normalized out;
  std::vector<Eigen::Index> keep;
  VectorXd norms(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    norms(i) = A.row(i).norm();
    if (norms(i) < 1e-14) {
      if (b(i) < -tol) out.trivially_infeasible = true;
      continue;
    }
    keep.push_back(i);
  }
  out.A.resize(static_cast<Eigen::Index>(keep.size()), A.cols());
  out.b.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    out.A.row(static_cast<Eigen::Index>(k)) = A.row(i) / norms(i);
    out.b(static_cast<Eigen::Index>(k)) = b(i) / norms(i);
  }
  return out;
}

}  // namespace

bool feasible(const MatrixXd& A, const VectorXd& b, double tol) {
  const Normalized nrm = normalize_rows(A, b, tol);
  if (nrm.trivially_infeasible) return false;
  const Eigen::Index m = nrm.A.rows();
  const Eigen::Index n = nrm.A.cols();
  if (m == 0) return true;
  MatrixXd E(n + 1, m);
  E.topRows(n) = nrm.A.transpose();
  E.row(n).setOnes();
  VectorXd f = VectorXd::Zero(n + 1);
  f(n) = 1.0;
  const StdResult r = solve_standard(E, f, nrm.b);
  if (r.status != StdStatus::kOptimal) return true;
  return r.value >= -tol;
}

Result maximize(const MatrixXd& A, const VectorXd& b, const VectorXd& c) {
  require(A.cols() == c.size(), Errc::kDimensionMismatch,
          "objective length differs from variable count");
  Result out;
  const Normalized nrm = normalize_rows(A, b, 1e-9);
  if (nrm.trivially_infeasible) {
    out.status = Status::kInfeasible;
    return out;
  }
  const Eigen::Index n = A.cols();
  if (nrm.A.rows() == 0) {
    if (c.norm() == 0.0) {
      out.status = Status::kOptimal;
      out.x = VectorXd::Zero(n);
      return out;
    }
    out.status = Status::kUnbounded;
    return out;
  }
  const StdResult r = solve_standard(nrm.A.transpose(), c, nrm.b);
  switch (r.status) {
    case StdStatus::kOptimal:
      out.status = Status::kOptimal;
      out.value = r.value;
      out.x = r.multipliers;
      return out;
    case StdStatus::kUnbounded:
      out.status = Status::kInfeasible;
      return out;
    case StdStatus::kInfeasible:
      out.status = feasible(A, b) ? Status::kUnbounded : Status::kInfeasible;
      return out;
  }
  return out;
}

Ball chebyshev_ball(const MatrixXd& A, const VectorXd& b, double radius_cap) {
  const Eigen::Index n = A.cols();
  MatrixXd lifted(A.rows() + 2, n + 1);
  VectorXd rhs(A.rows() + 2);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    lifted.row(i).head(n) = A.row(i);
    lifted(i, n) = A.row(i).norm();
    rhs(i) = b(i);
  }
  lifted.row(A.rows()).setZero();
  lifted(A.rows(), n) = 1.0;
  rhs(A.rows()) = radius_cap;
  lifted.row(A.rows() + 1).setZero();
  lifted(A.rows() + 1, n) = -1.0;
  rhs(A.rows() + 1) = 1.0;  // allow negative radius to detect emptiness
  VectorXd c = VectorXd::Zero(n + 1);
  c(n) = 1.0;
  const Result r = maximize(lifted, rhs, c);
  Ball ball;
  if (r.status != Status::kOptimal) return ball;
  ball.center = r.x.head(n);
  ball.radius = r.x(n);
  return ball;
}

}  // namespace smpc::lp
