#include "smpc/lti.hpp"

#include <cmath>
#include <limits>

namespace smpc {
namespace {

constexpr int kRiccatiPatience = 10000;
constexpr int kRiccatiCap = 2000000;
constexpr double kRiccatiTol = 1e-12;
constexpr double kSchurMargin = 1e-6;

bool positive_definite(const MatrixXd& M) {
  if (!M.isApprox(M.transpose(), 1e-12)) return false;
  Eigen::LLT<MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

void LtiSystem::validate() const {
  const Eigen::Index nx = A.rows();
  require(nx > 0 && A.cols() == nx, Errc::kDimensionMismatch, "A must be square");
  require(B.rows() == nx && B.cols() > 0, Errc::kDimensionMismatch,
          "B must have n rows");
  require(Bw.rows() == nx && Bw.cols() > 0, Errc::kDimensionMismatch,
          "Bw must have n rows");
  require(Q.rows() == nx && Q.cols() == nx, Errc::kDimensionMismatch,
          "Q must be n × n");
  require(R.rows() == B.cols() && R.cols() == B.cols(),
          Errc::kDimensionMismatch, "R must be m × m");
  require(T >= 1, Errc::kBadParams, "horizon T must be at least 1");
  require(A.allFinite() && B.allFinite() && Bw.allFinite() &&
              Q.allFinite() && R.allFinite(),
          Errc::kBadParams, "non-finite system matrix entry");
  require(positive_definite(Q), Errc::kBadParams,
          "Q must be symmetric positive definite");
  require(positive_definite(R), Errc::kBadParams,
          "R must be symmetric positive definite");
}

double spectral_radius(const MatrixXd& M) {
  require(M.rows() == M.cols(), Errc::kDimensionMismatch, "square matrix");
  double norm = M.norm();
  if (norm == 0.0) return 0.0;
  // ρ(M) = lim ‖M^k‖^{1/k}; track M^{2^j} = exp(log_scale) · S_j.
  MatrixXd S = M / norm;
  double log_scale = std::log(norm);
  double estimate = norm;
  for (int j = 1; j <= 60; ++j) {
    S = S * S;
    log_scale *= 2.0;
    const double s = S.norm();
    if (s == 0.0) return 0.0;  // nilpotent
    S /= s;
    log_scale += std::log(s);
    estimate = std::exp(std::ldexp(log_scale, -j));
  }
  return estimate;
}

MatrixXd lyapunov_solve(const MatrixXd& Acl, const MatrixXd& M) {
  require(Acl.rows() == Acl.cols() && M.rows() == Acl.rows() &&
              M.cols() == Acl.cols(),
          Errc::kDimensionMismatch, "Lyapunov operands");
  require(spectral_radius(Acl) < 1.0 - kSchurMargin, Errc::kNotSchur,
          "closed-loop matrix is not Schur");
  // P = Σ_k (Aᵀ)^k M A^k summed by doubling: P ← P + Akᵀ P Ak, Ak ← Ak².
  MatrixXd P = M;
  MatrixXd Ak = Acl;
  for (int it = 0; it < 200; ++it) {
    P += Ak.transpose() * P * Ak;
    Ak = Ak * Ak;
    if (Ak.cwiseAbs().maxCoeff() < 1e-300 ||
        (Ak.transpose() * P * Ak).cwiseAbs().maxCoeff() <=
            1e-17 * P.cwiseAbs().maxCoeff()) {
      break;
    }
  }
  P = 0.5 * (P + P.transpose());
  return P;
}

ControllerGains lqr_synthesize(const LtiSystem& sys) {
  sys.validate();
  const MatrixXd& A = sys.A;
  const MatrixXd& B = sys.B;
  MatrixXd P = sys.Q;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  bool converged = false;
  for (int it = 0; it < kRiccatiCap; ++it) {
    const MatrixXd BtP = B.transpose() * P;
    const MatrixXd S = sys.R + BtP * B;
    const MatrixXd next =
        sys.Q + A.transpose() * P * A -
        (BtP * A).transpose() * S.ldlt().solve(BtP * A);
    const MatrixXd sym = 0.5 * (next + next.transpose());
    require(sym.allFinite(), Errc::kNotStabilizable, "Riccati iterate diverged");
    const double res = rel_diff(sym, P);
    P = sym;
    if (res <= kRiccatiTol) {
      converged = true;
      break;
    }
    if (res < best) {
      best = res;
      since_best = 0;
    } else if (++since_best > kRiccatiPatience) {
      break;
    }
  }
  require(converged, Errc::kNotStabilizable,
          "Riccati iteration stopped decreasing");
  ControllerGains g;
  const MatrixXd BtP = B.transpose() * P;
  g.K = -(sys.R + BtP * B).ldlt().solve(BtP * A);
  g.Acl = A + B * g.K;
  g.spectral_radius = spectral_radius(g.Acl);
  require(g.spectral_radius < 1.0 - kSchurMargin, Errc::kNotStabilizable,
          "synthesized closed loop is not Schur");
  g.P = lyapunov_solve(g.Acl, sys.Q + g.K.transpose() * sys.R * g.K);
  return g;
}

ErrorPropagation::ErrorPropagation(const MatrixXd& Acl, const MatrixXd& Bw,
                                   int horizon)
    : horizon_(horizon) {
  require(horizon >= 0, Errc::kBadParams, "negative horizon");
  require(Acl.rows() == Acl.cols() && Bw.rows() == Acl.rows(),
          Errc::kDimensionMismatch, "error propagation operands");
  powers_.push_back(MatrixXd::Identity(Acl.rows(), Acl.cols()));
  for (int k = 1; k <= horizon; ++k) powers_.push_back(Acl * powers_.back());
  for (const auto& Pk : powers_) gains_.push_back(Pk * Bw);
}

VectorXd ErrorPropagation::error(int l, const MatrixXd& w) const {
  require(l >= 0 && l <= horizon_, Errc::kBadParams, "step outside horizon");
  require(w.cols() >= l, Errc::kBadParams, "disturbance sequence too short");
  VectorXd e = VectorXd::Zero(powers_.front().rows());
  for (int i = 0; i < l; ++i) e += gains_[l - 1 - i] * w.col(i);
  return e;
}

MatrixXd nominal_rollout(const LtiSystem& sys, const VectorXd& x0,
                         const MatrixXd& v) {
  require(x0.size() == sys.n() && v.rows() == sys.m(),
          Errc::kDimensionMismatch, "rollout operands");
  MatrixXd z(sys.n(), v.cols() + 1);
  z.col(0) = x0;
  for (Eigen::Index l = 0; l < v.cols(); ++l) {
    z.col(l + 1) = sys.A * z.col(l) + sys.B * v.col(l);
  }
  return z;
}

MatrixXd error_samples(const ErrorPropagation& prop,
                       const DisturbanceBatch& batch, int l) {
  require(batch.horizon >= l, Errc::kBadParams,
          "disturbance sequences shorter than requested step");
  const Eigen::Index n = prop.power(0).rows();
  MatrixXd e = MatrixXd::Zero(n, batch.count);
  for (int i = 0; i < l; ++i) {
    const MatrixXd& G = prop.gain(l - 1 - i);
    for (Eigen::Index s = 0; s < batch.count; ++s) {
      e.col(s).noalias() += G * batch.data.col(s * batch.horizon + i);
    }
  }
  return e;
}

}  // namespace smpc
