#include "smpc/invariant.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace smpc {
namespace {

std::vector<Eigen::Index> first_coords(Eigen::Index n) {
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(n));
  std::iota(keep.begin(), keep.end(), 0);
  return keep;
}

MatrixXd template_normals(Eigen::Index n, int facets) {
  if (n == 2) {
    MatrixXd D(facets, 2);
    for (int k = 0; k < facets; ++k) {
      const double th = 2.0 * std::numbers::pi * k / facets;
      D.row(k) << std::cos(th), std::sin(th);
    }
    return D;
  }
  MatrixXd D(2 * n, n);
  D << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  return D;
}

// {(z, v) | A z + B v ∈ S} stacked with {(z, v) | G v ≤ mu}.
Polytope lifted_step(const LtiSystem& sys, const Polytope& S,
                     const MatrixXd& G, const VectorXd& mu) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  MatrixXd H = MatrixXd::Zero(S.rows() + G.rows(), n + m);
  VectorXd h(S.rows() + G.rows());
  H.topLeftCorner(S.rows(), n) = S.normals() * sys.A;
  H.topRightCorner(S.rows(), m) = S.normals() * sys.B;
  H.bottomRightCorner(G.rows(), m) = G;
  h << S.offsets(), mu;
  return reduce(Polytope(std::move(H), std::move(h)));
}

}  // namespace

Polytope terminal_constraint_set(const ControllerGains& gains,
                                 const MatrixXd& H, const VectorXd& eta1,
                                 const MatrixXd& G, const VectorXd& g) {
  const Eigen::Index n = gains.Acl.rows();
  MatrixXd rows(H.rows() + G.rows(), n);
  VectorXd off(H.rows() + G.rows());
  rows << H * gains.Acl, G * gains.K;
  off << eta1, g;
  return Polytope(std::move(rows), std::move(off));
}

bool is_robust_invariant(const Polytope& X, const MatrixXd& A,
                         const MatrixXd& Bw, const Polytope& W, double tol) {
  if (X.is_empty()) return true;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const VectorXd d = X.normals().row(i).transpose();
    const double nrm = d.norm();
    if (nrm == 0.0) continue;
    double s = 0.0;
    try {
      s = support(X, A.transpose() * d) + support(W, Bw.transpose() * d);
    } catch (const Error& e) {
      if (e.code() == Errc::kUnbounded) return false;
      throw;
    }
    if (s > X.offsets()(i) + tol * nrm) return false;
  }
  return true;
}

TerminalSet terminal_set(const MatrixXd& Acl, const Polytope& constraint,
                         const MatrixXd& Bw, const Polytope& W,
                         const FixedPointSettings& settings) {
  const Eigen::Index n = Acl.rows();
  Polytope omega = reduce(constraint);
  require(!omega.is_empty(), Errc::kEmptyTerminalSet,
          "terminal constraint set is empty");
  const VectorXd zero = VectorXd::Zero(n);
  for (int it = 1; it <= settings.terminal_cap; ++it) {
    const Polytope eroded = pontryagin_diff(omega, W, Bw);
    require(!eroded.is_empty(), Errc::kEmptyTerminalSet,
            "terminal set iteration emptied the set");
    const Polytope next = intersect(omega, affine_preimage(eroded, Acl, zero));
    require(!next.is_empty(), Errc::kEmptyTerminalSet,
            "terminal set iteration emptied the set");
    if (contains(next, omega, settings.equality_tol)) {
      return {next, it, true};
    }
    omega = next;
  }
  if (is_robust_invariant(omega, Acl, Bw, W)) {
    return {omega, settings.terminal_cap, false};
  }
  fail(Errc::kNonConvergence, "terminal set iteration hit its cap");
}

MrpiApproximation mrpi_outer(const MatrixXd& Acl, const MatrixXd& Bw,
                             const Polytope& W, double eps, int facets,
                             const FixedPointSettings& settings) {
  const Eigen::Index n = Acl.rows();
  require(eps > 0.0 && eps < 1.0, Errc::kBadParams, "eps must be in (0,1)");
  const Polytope F = linear_image(W, Bw);
  MrpiApproximation out;
  if (F.is_empty()) fail(Errc::kEmptySet, "disturbance set is empty");
  // Degenerate disturbance: the minimal RPI set is the origin.
  bool point = true;
  for (Eigen::Index i = 0; i < n && point; ++i) {
    VectorXd d = VectorXd::Zero(n);
    d(i) = 1.0;
    point = support(F, d) <= 1e-14 && support(F, -d) <= 1e-14;
  }
  if (point) {
    out.set = Polytope::point(VectorXd::Zero(n));
    out.invariant = true;
    return out;
  }
  require((F.offsets().array() > 0.0).all(), Errc::kBadParams,
          "Bw W must contain the origin in its interior");
  // α(s) = max_i supp(F, (Acl^s)ᵀ f_i) / g_i
  MatrixXd As = MatrixXd::Identity(n, n);
  double alpha = 1.0;
  int s = 0;
  double best_alpha = std::numeric_limits<double>::infinity();
  int best_s = 0;
  for (int k = 1; k <= settings.mrpi_cap; ++k) {
    As = Acl * As;
    double a = 0.0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      a = std::max(a, support(F, As.transpose() * F.normals().row(i).transpose()) /
                          F.offsets()(i));
    }
    if (a < best_alpha) {
      best_alpha = a;
      best_s = k;
    }
    if (a <= eps) break;
  }
  require(best_alpha < 1.0, Errc::kNonContractive,
          "no partial sum contracts the disturbance set");
  alpha = best_alpha;
  s = best_s;
  out.terms = s;
  out.alpha = alpha;
  const double inflate = 1.0 / (1.0 - alpha);
  if (facets == 0) {
    if (n == 2) {
      // Accumulate vertices: the terms Acl^i F become very thin and are
      // poorly conditioned in H-representation.
      const auto vf = vertices_2d(F);
      std::vector<VectorXd> acc = vf;
      MatrixXd Ai = MatrixXd::Identity(n, n);
      for (int i = 1; i < s; ++i) {
        Ai = Acl * Ai;
        std::vector<VectorXd> sums;
        for (const auto& a : acc) {
          for (const auto& v : vf) sums.push_back(a + Ai * v);
        }
        acc = convex_hull_2d(sums);
      }
      for (auto& v : acc) v *= inflate;
      out.set = hull_2d(acc);
    } else {
      Polytope sum = F;
      MatrixXd Ai = MatrixXd::Identity(n, n);
      for (int i = 1; i < s; ++i) {
        Ai = Acl * Ai;
        sum = minkowski_sum(sum, linear_image(F, Ai));
      }
      out.set = scale(sum, inflate);
    }
    out.invariant = is_robust_invariant(out.set, Acl, Bw, W);
    return out;
  }
  const MatrixXd D = template_normals(n, facets);
  VectorXd c = VectorXd::Zero(D.rows());
  for (Eigen::Index k = 0; k < D.rows(); ++k) {
    MatrixXd Ai = MatrixXd::Identity(n, n);
    for (int i = 0; i < s; ++i) {
      c(k) += support(F, Ai.transpose() * D.row(k).transpose());
      Ai = Acl * Ai;
    }
  }
  c *= inflate;
  out.set = Polytope(D, c);
  out.invariant = is_robust_invariant(out.set, Acl, Bw, W);
  return out;
}

NominalConstraints nominal_constraints(const ConstraintSpec& c,
                                       const TighteningSchedule& s) {
  NominalConstraints nc;
  nc.H = c.H;
  nc.eta = s.eta;
  nc.G = c.G;
  nc.mu = s.mu;
  nc.Zf = Polytope(s.terminal.normals(), s.eta_f);
  return nc;
}

Polytope t_step_set(const LtiSystem& sys, const NominalConstraints& nc) {
  const int T = nc.horizon();
  require(T >= 1 && static_cast<int>(nc.mu.size()) == T, Errc::kBadParams,
          "schedule length does not match the horizon");
  require(nc.Zf.dim() == sys.n(), Errc::kDimensionMismatch,
          "terminal set dimension");
  const auto keep = first_coords(sys.n());
  Polytope S = intersect(nc.Zf, nc.Z(T));
  if (S.is_empty()) {
    fail(Errc::kEmptySet, "stage " + std::to_string(T) + ": Z_f ∩ Z_T is empty");
  }
  for (int l = T - 1; l >= 1; --l) {
    const Polytope pre = project(lifted_step(sys, S, nc.G, nc.mu[l]), keep);
    S = intersect(nc.Z(l), pre);
    if (S.is_empty()) {
      fail(Errc::kEmptySet, "stage " + std::to_string(l) + " of the T-step set is empty");
    }
  }
  Polytope CT = lifted_step(sys, S, nc.G, nc.mu[0]);
  if (CT.is_empty()) fail(Errc::kEmptySet, "stage 0 of the T-step set is empty");
  return CT;
}

ControlInvariantSet robust_control_invariant(const LtiSystem& sys,
                                             const Polytope& CT,
                                             const Polytope& W,
                                             const FixedPointSettings& settings) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  require(CT.dim() == n + m, Errc::kDimensionMismatch, "C_T lives in ℝ^{n+m}");
  require(!CT.is_empty(), Errc::kEmptySet, "C_T is empty");
  const auto keep = first_coords(n);
  Polytope C = project(CT, keep);
  for (int it = 1; it <= settings.control_invariant_cap; ++it) {
    const Polytope target = pontryagin_diff(C, W, sys.Bw);
    if (target.is_empty()) fail(Errc::kEmptySet, "C ⊖ Bw W became empty");
    const Eigen::Index rows = CT.rows() + C.rows() + target.rows();
    MatrixXd H = MatrixXd::Zero(rows, n + m);
    VectorXd h(rows);
    H.topRows(CT.rows()) = CT.normals();
    H.block(CT.rows(), 0, C.rows(), n) = C.normals();
    H.bottomLeftCorner(target.rows(), n) = target.normals() * sys.A;
    H.bottomRightCorner(target.rows(), m) = target.normals() * sys.B;
    h << CT.offsets(), C.offsets(), target.offsets();
    const Polytope next = project(Polytope(std::move(H), std::move(h)), keep);
    if (next.is_empty()) fail(Errc::kEmptySet, "control invariant set is empty");
    if (contains(next, C, settings.equality_tol)) return {next, it};
    C = next;
  }
  fail(Errc::kNonConvergence, "control invariant recursion hit its cap");
}

Polytope first_step_set(const Polytope& Cinf, const MatrixXd& Bw,
                        const Polytope& W) {
  const Polytope out = pontryagin_diff(Cinf, W, Bw);
  require(!out.is_empty(), Errc::kEmptySet, "first-step set is empty");
  return out;
}

double terminal_margin(const Polytope& Xinf, const Polytope& Xf) {
  double lambda = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < Xf.rows(); ++i) {
    const double nrm = Xf.normals().row(i).norm();
    if (nrm == 0.0) continue;
    lambda = std::min(lambda, (Xf.offsets()(i) -
                               support(Xinf, Xf.normals().row(i).transpose())) /
                                  nrm);
  }
  return lambda;
}

}  // namespace smpc
