#pragma once

#include <vector>

#include "smpc/common.hpp"

namespace smpc {

/// x⁺ = A x + B u + Bw w with stage cost ‖x‖²_Q + ‖u‖²_R and horizon T.
struct LtiSystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd Bw;
  MatrixXd Q;
  MatrixXd R;
  int T = 1;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index mw() const { return Bw.cols(); }

  /// Checks dimensions, symmetry and positive definiteness of Q and R.
  void validate() const;
};

struct ControllerGains {
  MatrixXd K;    // m × n, u = K e
  MatrixXd P;    // terminal weight
  MatrixXd Acl;  // A + B K
  double spectral_radius = 0.0;
};

/// Spectral radius via Gelfand's formula on repeated squaring, without an
/// eigensolver. Accurate to about 1e-9 for well-conditioned matrices.
double spectral_radius(const MatrixXd& M);

/// Solves Aᵀ P A + M = P for Schur A by the doubling iteration.
MatrixXd lyapunov_solve(const MatrixXd& Acl, const MatrixXd& M);

/// LQ-optimal gain from the Riccati fixed point, then P from the Lyapunov
/// equation of the resulting closed loop.
ControllerGains lqr_synthesize(const LtiSystem& sys);

/// Precomputed closed-loop powers for the error dynamics e⁺ = Acl e + Bw w.
class ErrorPropagation {
 public:
  ErrorPropagation(const MatrixXd& Acl, const MatrixXd& Bw, int horizon);

  int horizon() const { return horizon_; }
  /// Acl^k for 0 ≤ k ≤ horizon.
  const MatrixXd& power(int k) const { return powers_.at(k); }
  /// Acl^k Bw for 0 ≤ k ≤ horizon.
  const MatrixXd& gain(int k) const { return gains_.at(k); }

  /// e_l = Σ_{i<l} Acl^{l−1−i} Bw w_i for each sequence (columns of `w` are
  /// w_0, w_1, ...). Returns e_l.
  VectorXd error(int l, const MatrixXd& w) const;

 private:
  int horizon_;
  std::vector<MatrixXd> powers_;
  std::vector<MatrixXd> gains_;
};

/// z_0 = x0, z_{l+1} = A z_l + B v_l. Columns of `v` are v_0..v_{T−1}; the
/// result has columns z_0..z_T.
MatrixXd nominal_rollout(const LtiSystem& sys, const VectorXd& x0,
                         const MatrixXd& v);

/// Fixed-length batch of disturbance sequences stored column-wise: sequence s
/// occupies columns [s·horizon, (s+1)·horizon).
struct DisturbanceBatch {
  Eigen::Index count = 0;
  Eigen::Index horizon = 0;
  MatrixXd data;

  auto sequence(Eigen::Index s) const {
    return data.middleCols(s * horizon, horizon);
  }
};

/// e_l for every sequence in the batch; result is n × count.
MatrixXd error_samples(const ErrorPropagation& prop,
                       const DisturbanceBatch& batch, int l);

}  // namespace smpc
