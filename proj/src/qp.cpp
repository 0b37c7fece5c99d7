#include "smpc/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace smpc::qp {
namespace {

constexpr double kViolationTol = 1e-10;
constexpr double kStepTol = 1e-12;

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kMaxIterations: return "max_iter";
  }
  return "unknown";
}

Solver::Solver(const MatrixXd& G, const MatrixXd& N)
    : G_(G), N_(N), row_scale_(N.rows()) {
  require(G.rows() == G.cols() && N.cols() == G.rows(),
          Errc::kDimensionMismatch, "QP operand dimensions");
  Eigen::LLT<MatrixXd> llt(G);
  require(llt.info() == Eigen::Success, Errc::kBadParams,
          "QP Hessian must be positive definite");
  const MatrixXd L = llt.matrixL();
  J0_ = L.transpose().triangularView<Eigen::Upper>().solve(
      MatrixXd::Identity(G.rows(), G.cols()));
  for (Eigen::Index i = 0; i < N.rows(); ++i) {
    const double s = N.row(i).norm();
    row_scale_(i) = s;
    if (s > 0.0) N_.row(i) /= s;
  }
}

Solution Solver::solve(const VectorXd& a, const VectorXd& b_raw,
                       int iteration_cap) const {
  const Eigen::Index n = G_.rows();
  const Eigen::Index m = N_.rows();
  require(a.size() == n && b_raw.size() == m, Errc::kDimensionMismatch,
          "QP vector dimensions");
  VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = row_scale_(i) > 0.0 ? b_raw(i) / row_scale_(i) : b_raw(i);
  }
  Solution sol;
  // Unconstrained minimizer y = −G⁻¹a = −J0 J0ᵀ a.
  VectorXd y = -J0_ * (J0_.transpose() * a);
  std::vector<Eigen::Index> active;
  std::vector<double> u;  // multipliers of active rows
  auto finish = [&](Status st) {
    sol.status = st;
    sol.y = y;
    sol.value = 0.5 * y.dot(G_ * y) + a.dot(y);
    sol.multipliers = VectorXd::Zero(m);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Eigen::Index i = active[k];
      sol.multipliers(i) = row_scale_(i) > 0.0 ? u[k] / row_scale_(i) : u[k];
    }
    return sol;
  };
  for (Eigen::Index i = 0; i < m; ++i) {
    if (row_scale_(i) == 0.0 && b(i) < -kViolationTol) {
      return finish(Status::kInfeasible);
    }
  }
  int it = 0;
  while (true) {
    // Most violated row, lowest index on ties.
    Eigen::Index p = -1;
    double worst = kViolationTol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (row_scale_(i) == 0.0) continue;
      const double viol = N_.row(i).dot(y) - b(i);
      if (viol > worst) {
        worst = viol;
        p = i;
      }
    }
    if (p < 0) return finish(Status::kOptimal);
    double up = 0.0;  // multiplier of the entering row
    const VectorXd np = N_.row(p).transpose();
    while (true) {
      if (++it > iteration_cap) return finish(Status::kMaxIterations);
      sol.iterations = it;
      const auto q = static_cast<Eigen::Index>(active.size());
      // J = J0 Q with L⁻¹ N_A = Q [R; 0].
      MatrixXd J = J0_;
      MatrixXd R;
      if (q > 0) {
        MatrixXd NA(n, q);
        for (Eigen::Index k = 0; k < q; ++k) NA.col(k) = N_.row(active[k]).transpose();
        Eigen::HouseholderQR<MatrixXd> qr(J0_.transpose() * NA);
        J = J0_ * qr.householderQ();
        R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
      }
      const VectorXd d = J.transpose() * np;
      const VectorXd z = J.rightCols(n - q) * d.tail(n - q);
      VectorXd r;
      if (q > 0) {
        r = R.triangularView<Eigen::Upper>().solve(d.head(q));
      }
      // Dual step bound: active rows whose multiplier would go negative.
      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (r(k) > kStepTol) {
          const double ratio = u[k] / r(k);
          if (ratio < t1 || (ratio == t1 && active[k] < active[drop])) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      double t2 = std::numeric_limits<double>::infinity();
      const double zn = z.dot(np);
      if (z.norm() > kStepTol && zn > kStepTol) {
        t2 = (np.dot(y) - b(p)) / zn;
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return finish(Status::kInfeasible);
      if (std::isfinite(t2)) y -= t * z;
      for (Eigen::Index k = 0; k < q; ++k) u[k] -= t * r(k);
      up += t;
      if (t2 <= t1) {
        active.push_back(p);
        u.push_back(up);
        break;
      }
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
    }
  }
}

Solution solve(const MatrixXd& G, const VectorXd& a, const MatrixXd& N,
               const VectorXd& b, int iteration_cap) {
  Solver solver(G, N);
  Solution s = solver.solve(a, b, iteration_cap);
  if (s.status == Status::kOptimal) {
    s.kkt_residual = kkt_residual(G, a, N, b, s.y, s.multipliers);
  }
  return s;
}

double kkt_residual(const MatrixXd& G, const VectorXd& a, const MatrixXd& N,
                    const VectorXd& b, const VectorXd& y,
                    const VectorXd& lambda) {
  const VectorXd slack = b - N * y;
  double res = (G * y + a + N.transpose() * lambda).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    res = std::max(res, std::max(0.0, -slack(i)));
    res = std::max(res, std::abs(lambda(i) * slack(i)));
    res = std::max(res, std::max(0.0, -lambda(i)));
  }
  return res;
}

}  // namespace smpc::qp
