#include "smpc/controller.hpp"

#include <cmath>
#include <limits>

namespace smpc {
namespace {

MatrixXd selector(Eigen::Index rows, Eigen::Index cols, Eigen::Index offset) {
  MatrixXd E = MatrixXd::Zero(rows, cols);
  E.middleCols(offset, rows).setIdentity();
  return E;
}

QpSolution finish(const CondensedQp& cq, const QpProblem& problem,
                  const qp::Solution& raw, Eigen::Index m, int T) {
  QpSolution out;
  out.status = raw.status;
  out.iterations = raw.iterations;
  if (raw.status != qp::Status::kOptimal) return out;
  out.v = raw.y.head(m * T).reshaped(m, T);
  out.z = cq.states(raw.y, problem.x);
  out.value = raw.value + problem.constant;
  out.kkt_residual = qp::kkt_residual(problem.hessian, problem.linear,
                                      problem.rows, problem.offsets, raw.y,
                                      raw.multipliers);
  return out;
}

}  // namespace

CondensedQp::CondensedQp(const ControllerSpec& spec)
    : T_(spec.horizon()), n_(spec.sys.n()), m_(spec.sys.m()) {
  const LtiSystem& sys = spec.sys;
  const NominalConstraints& nc = spec.constraints;
  require(nc.horizon() == T_ && static_cast<int>(nc.mu.size()) == T_,
          Errc::kDimensionMismatch, "constraint schedule length differs from T");
  require(nc.H.cols() == n_ && nc.G.cols() == m_ && nc.Zf.dim() == n_,
          Errc::kDimensionMismatch, "constraint dimensions differ from the model");
  require(spec.gains.P.rows() == n_, Errc::kDimensionMismatch,
          "terminal weight dimension");
  const bool free = spec.free_initial_state();
  const Eigen::Index nv = m_ * T_ + (free ? n_ : 0);

  phi_.resize(T_ + 1);
  gamma_.resize(T_ + 1);
  phi_[0] = MatrixXd::Identity(n_, n_);
  if (free) phi_[0].setZero();
  gamma_[0] = free ? selector(n_, nv, m_ * T_) : MatrixXd::Zero(n_, nv);
  for (int l = 0; l < T_; ++l) {
    phi_[l + 1] = sys.A * phi_[l];
    gamma_[l + 1] = sys.A * gamma_[l] + sys.B * selector(m_, nv, l * m_);
  }

  hessian_ = MatrixXd::Zero(nv, nv);
  F_ = MatrixXd::Zero(nv, n_);
  C_ = MatrixXd::Zero(n_, n_);
  for (int l = 0; l <= T_; ++l) {
    const MatrixXd& W = l < T_ ? sys.Q : spec.gains.P;
    hessian_ += 2.0 * gamma_[l].transpose() * W * gamma_[l];
    F_ += 2.0 * gamma_[l].transpose() * W * phi_[l];
    C_ += phi_[l].transpose() * W * phi_[l];
    if (l < T_) {
      const MatrixXd E = selector(m_, nv, l * m_);
      hessian_ += 2.0 * E.transpose() * sys.R * E;
    }
  }
  hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();

  std::vector<MatrixXd> blocks, shifts;
  std::vector<VectorXd> offs;
  Eigen::Index count = 0;
  auto add = [&](const std::string& name, int stage, MatrixXd rows,
                 VectorXd off, MatrixXd shift) {
    groups_.push_back({name, stage, count, rows.rows()});
    count += rows.rows();
    blocks.push_back(std::move(rows));
    offs.push_back(std::move(off));
    shifts.push_back(std::move(shift));
  };
  for (int l = 1; l <= T_; ++l) {
    add("state", l, nc.H * gamma_[l], nc.eta[l - 1], -nc.H * phi_[l]);
  }
  for (int l = 0; l < T_; ++l) {
    add("input", l, nc.G * selector(m_, nv, l * m_), nc.mu[l],
        MatrixXd::Zero(nc.G.rows(), n_));
  }
  const MatrixXd& Hf = nc.Zf.normals();
  add("terminal", T_, Hf * gamma_[T_], nc.Zf.offsets(), -Hf * phi_[T_]);
  if (spec.first_step) {
    const Polytope& F1 = *spec.first_step;
    require(F1.dim() == n_, Errc::kDimensionMismatch, "first-step set dimension");
    add("first_step", 1, F1.normals() * gamma_[1], F1.offsets(),
        -F1.normals() * phi_[1]);
  }
  if (spec.tube) {
    const Polytope& Z = *spec.tube;
    require(Z.dim() == n_, Errc::kDimensionMismatch, "tube set dimension");
    add("tube", 0, -Z.normals() * selector(n_, nv, m_ * T_), Z.offsets(),
        -Z.normals());
    if (spec.initial) {
      const Polytope& X0 = *spec.initial;
      require(X0.dim() == n_, Errc::kDimensionMismatch, "initial set dimension");
      add("initial", 0, X0.normals() * gamma_[0], X0.offsets(),
          MatrixXd::Zero(X0.rows(), n_));
    }
  }
  rows_.resize(count, nv);
  b0_.resize(count);
  S_.resize(count, n_);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    rows_.middleRows(groups_[k].begin, groups_[k].count) = blocks[k];
    b0_.segment(groups_[k].begin, groups_[k].count) = offs[k];
    S_.middleRows(groups_[k].begin, groups_[k].count) = shifts[k];
  }
}

QpProblem CondensedQp::at(const VectorXd& x) const {
  require(x.size() == n_, Errc::kDimensionMismatch, "state dimension");
  require(x.allFinite(), Errc::kBadParams, "state must be finite");
  QpProblem p;
  p.hessian = hessian_;
  p.linear = F_ * x;
  p.rows = rows_;
  p.offsets = b0_ + S_ * x;
  p.constant = x.dot(C_ * x);
  p.groups = groups_;
  p.x = x;
  return p;
}

VectorXd CondensedQp::pack(const MatrixXd& v, const VectorXd& z0) const {
  VectorXd y(variables());
  y.head(m_ * T_) = v.reshaped();
  if (variables() > m_ * T_) y.tail(n_) = z0;
  return y;
}

MatrixXd CondensedQp::states(const VectorXd& y, const VectorXd& x) const {
  MatrixXd z(n_, T_ + 1);
  for (int l = 0; l <= T_; ++l) z.col(l) = phi_[l] * x + gamma_[l] * y;
  return z;
}

double CondensedQp::max_violation(const VectorXd& y, const VectorXd& x,
                                  const std::string& skip_group) const {
  const VectorXd slack = rows_ * y - b0_ - S_ * x;
  double worst = -std::numeric_limits<double>::infinity();
  for (const RowGroup& g : groups_) {
    if (g.name == skip_group || g.count == 0) continue;
    for (Eigen::Index i = g.begin; i < g.begin + g.count; ++i) {
      const double nrm = rows_.row(i).norm();
      const double viol = nrm > 0.0 ? slack(i) / nrm : slack(i);
      worst = std::max(worst, viol);
    }
  }
  return worst;
}

QpProblem build_qp(const ControllerSpec& spec, const VectorXd& x) {
  return CondensedQp(spec).at(x);
}

QpSolution solve_qp(const ControllerSpec& spec, const QpProblem& qp) {
  const CondensedQp cq(spec);
  const qp::Solver solver(qp.hessian, qp.rows);
  return finish(cq, qp, solver.solve(qp.linear, qp.offsets), spec.sys.m(),
                spec.horizon());
}

CandidatePlan candidate_shift(const ControllerSpec& spec,
                              const CondensedQp& qp, const QpSolution& prev,
                              const VectorXd& w, const VectorXd& x_next,
                              double tol) {
  require(prev.status == qp::Status::kOptimal, Errc::kBadParams,
          "candidate needs an optimal plan");
  const int T = spec.horizon();
  const MatrixXd& K = spec.gains.K;
  CandidatePlan c;
  c.v.resize(prev.v.rows(), T);
  if (spec.free_initial_state()) {
    for (int i = 0; i + 1 < T; ++i) c.v.col(i) = prev.v.col(i + 1);
    c.v.col(T - 1) = K * prev.z.col(T);
    c.z0 = prev.z.col(1);
  } else {
    const VectorXd bw = spec.sys.Bw * w;
    VectorXd e = bw;  // Acl^i Bw w
    for (int i = 0; i + 1 < T; ++i) {
      c.v.col(i) = prev.v.col(i + 1) + K * e;
      e = spec.gains.Acl * e;
    }
    c.v.col(T - 1) = K * (prev.z.col(T) + e);
    c.z0 = x_next;
  }
  c.max_violation = qp.max_violation(qp.pack(c.v, c.z0), x_next, "first_step");
  c.feasible = c.max_violation <= tol;
  return c;
}

MpcController::MpcController(ControllerSpec spec)
    : spec_(std::move(spec)),
      qp_(spec_),
      solver_(qp_.hessian(), qp_.constraint_rows()) {}

StepResult MpcController::step(const VectorXd& x) {
  const QpProblem problem = qp_.at(x);
  StepResult r;
  r.solution = finish(qp_, problem, solver_.solve(problem.linear, problem.offsets),
                      spec_.sys.m(), spec_.horizon());
  if (r.solution.status != qp::Status::kOptimal) {
    last_.reset();
    r.u = spec_.gains.K * x;
    return r;
  }
  r.u = r.solution.v.col(0);
  if (spec_.free_initial_state()) {
    r.u += spec_.gains.K * (x - r.solution.z.col(0));
  }
  last_ = r.solution;
  return r;
}

std::optional<CandidatePlan> MpcController::candidate(
    const VectorXd& w, const VectorXd& x_next) const {
  if (!last_) return std::nullopt;
  return candidate_shift(spec_, qp_, *last_, w, x_next);
}

}  // namespace smpc
