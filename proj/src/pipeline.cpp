#include "smpc/pipeline.hpp"

namespace smpc {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kProposed: return "proposed";
    case Scheme::kTube: return "tube";
    case Scheme::kRobust: return "robust";
  }
  return "unknown";
}

Scheme scheme_from_string(std::string_view s) {
  if (s == "proposed") return Scheme::kProposed;
  if (s == "tube") return Scheme::kTube;
  if (s == "robust") return Scheme::kRobust;
  fail(Errc::kSchema, "unknown scheme '" + std::string(s) + "'");
}

const DisturbanceModel& ProblemConfig::model() const {
  require(disturbance.has_value(), Errc::kSchema, "disturbance model missing");
  return *disturbance;
}

void ProblemConfig::validate() const {
  sys.validate();
  const ConstraintSpec& c = constraints;
  require(c.H.cols() == sys.n() && c.H.rows() == c.h.size() &&
              c.eps.size() == c.h.size(),
          Errc::kSchema, "state constraint dimensions");
  require(c.G.cols() == sys.m() && c.G.rows() == c.g.size(), Errc::kSchema,
          "input constraint dimensions");
  for (double e : c.eps) {
    require(e > 0.0 && e < 1.0, Errc::kSchema, "state ε must lie in (0, 1)");
  }
  require(c.eps_u > 0.0 && c.eps_u < 1.0, Errc::kSchema, "ε_u must lie in (0, 1)");
  require(c.eps_terminal > 0.0 && c.eps_terminal < 1.0, Errc::kSchema,
          "terminal ε must lie in (0, 1)");
  require(model().dim() == sys.mw(), Errc::kSchema,
          "disturbance dimension differs from the columns of Bw");
  if (eps_f) {
    require(*eps_f >= 0.0 && *eps_f < 1.0, Errc::kSchema, "ε_f must lie in [0, 1)");
  }
  require(sampling.beta > 0.0 && sampling.beta < 1.0, Errc::kSchema,
          "β must lie in (0, 1)");
  require(sampling.bracket_low > 0.0 && sampling.bracket_low <= 1.0 &&
              sampling.bracket_high >= 1.0,
          Errc::kSchema, "ε bracket must straddle 1");
  require(mrpi_eps > 0.0 && mrpi_eps < 1.0, Errc::kSchema, "mRPI ε must lie in (0, 1)");
}

PlainQuantiles plain_quantiles(const ProblemConfig& cfg,
                               const ControllerGains& gains) {
  const LtiSystem& sys = cfg.sys;
  const ConstraintSpec& c = cfg.constraints;
  const int T = sys.T;
  const ErrorPropagation prop(gains.Acl, sys.Bw, T);
  const QuantileTightener q(prop, cfg.model(), cfg.sampling, cfg.method);
  PlainQuantiles out;
  out.state = q.tighten(c.H, c.h, c.eps, T, 1);
  out.input = q.tighten(c.G * gains.K, c.g, VectorXd::Constant(c.g.size(), c.eps_u),
                        T, 2);
  out.input[0] = c.g;
  for (int l = 1; l <= T; ++l) {
    if (Polytope(c.H, out.state[l]).is_empty()) {
      fail(Errc::kTighteningInfeasible,
           "tightened state set Z_" + std::to_string(l) + " is empty");
    }
    if (l < T && Polytope(c.G, out.input[l]).is_empty()) {
      fail(Errc::kTighteningInfeasible,
           "tightened input set V_" + std::to_string(l) + " is empty");
    }
  }
  out.Xf_tilde = terminal_constraint_set(gains, c.H, out.state[1], c.G, c.g);
  if (out.Xf_tilde.is_empty()) {
    fail(Errc::kEmptyTerminalSet, "terminal constraint set is empty");
  }
  out.Xf = terminal_set(gains.Acl, out.Xf_tilde, sys.Bw, cfg.model().support(),
                        cfg.fixed_point);
  const Polytope& Xf = out.Xf.set;
  out.terminal = q.tighten(Xf.normals(), Xf.offsets(),
                           VectorXd::Constant(Xf.rows(), c.eps_terminal), T, 3);
  out.certificates = q.certificates();
  return out;
}

TighteningSchedule stochastic_schedule(const ProblemConfig& cfg,
                                       const ControllerGains& gains,
                                       const PlainQuantiles& plain,
                                       std::optional<double> eps_f) {
  const int T = cfg.sys.T;
  const ConstraintSpec& c = cfg.constraints;
  TighteningSchedule s;
  s.terminal = plain.Xf.set;
  s.terminal_constraint = plain.Xf_tilde;
  s.terminal_iterations = plain.Xf.iterations;
  s.terminal_maximal = plain.Xf.maximal;
  s.method = cfg.method;
  s.certificates = plain.certificates;
  s.seed = cfg.sampling.seed;
  std::vector<VectorXd> eta = plain.state;
  std::vector<VectorXd> mu = plain.input;
  std::vector<VectorXd> term = plain.terminal;
  if (eps_f) {
    const ConfidenceRegion Wf =
        confidence_region(cfg.model(), *eps_f, cfg.confidence_samples,
                          cfg.sampling.beta);
    const ErrorPropagation prop(gains.Acl, cfg.sys.Bw, T);
    eta = mixed_offsets(prop, Wf.region, c.H, plain.state, T, false);
    mu = mixed_offsets(prop, Wf.region, c.G * gains.K, plain.input, T, true);
    term = mixed_offsets(prop, Wf.region, plain.Xf.set.normals(), plain.terminal,
                         T, true);
    s.variant = "mixed";
    s.eps_f = *eps_f;
  }
  s.eta.assign(eta.begin() + 1, eta.end());
  s.mu.assign(mu.begin(), mu.begin() + T);
  s.mu[0] = c.g;
  s.eta_f = term[T];
  return s;
}

NominalConstraints SetPipelineResult::constraints(const ConstraintSpec& c) const {
  NominalConstraints nc;
  nc.H = c.H;
  nc.eta = schedule.eta;
  nc.G = c.G;
  nc.mu = schedule.mu;
  nc.Zf = Zf;
  return nc;
}

ControllerSpec SetPipelineResult::controller_spec(const ProblemConfig& cfg) const {
  ControllerSpec spec;
  spec.sys = cfg.sys;
  spec.gains = gains;
  spec.constraints = constraints(cfg.constraints);
  spec.first_step = first_step;
  spec.tube = tube;
  spec.initial = initial;
  return spec;
}

namespace {

std::vector<Eigen::Index> state_coords(Eigen::Index n) {
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = i;
  return keep;
}

void check_stages(const ConstraintSpec& c, const TighteningSchedule& s) {
  for (std::size_t l = 0; l < s.eta.size(); ++l) {
    if (Polytope(c.H, s.eta[l]).is_empty()) {
      fail(Errc::kTighteningInfeasible,
           "tightened state set Z_" + std::to_string(l + 1) + " is empty");
    }
  }
  for (std::size_t l = 0; l < s.mu.size(); ++l) {
    if (Polytope(c.G, s.mu[l]).is_empty()) {
      fail(Errc::kTighteningInfeasible,
           "tightened input set V_" + std::to_string(l) + " is empty");
    }
  }
}

MrpiApproximation mrpi_for(const ProblemConfig& cfg, const ControllerGains& gains) {
  return mrpi_outer(gains.Acl, cfg.sys.Bw, cfg.model().support(), cfg.mrpi_eps,
                    cfg.mrpi_facets, cfg.fixed_point);
}

TighteningSchedule robust_schedule(const ProblemConfig& cfg,
                                   const ControllerGains& gains) {
  const ConstraintSpec& c = cfg.constraints;
  const int T = cfg.sys.T;
  const MrpiApproximation mrpi = mrpi_for(cfg, gains);
  if (!mrpi.invariant) {
    fail(Errc::kNonContractive, "mRPI approximation is not robust invariant");
  }
  const Polytope& Z = mrpi.set;
  VectorXd eta = c.h;
  for (Eigen::Index j = 0; j < c.H.rows(); ++j) {
    eta(j) -= support(Z, c.H.row(j).transpose());
  }
  const MatrixXd GK = c.G * gains.K;
  VectorXd mu = c.g;
  for (Eigen::Index j = 0; j < GK.rows(); ++j) {
    mu(j) -= support(Z, GK.row(j).transpose());
  }
  TighteningSchedule s;
  s.eta.assign(T, eta);
  s.mu.assign(T, mu);
  s.variant = "robust";
  s.method = TighteningMethod::kWorstCase;
  s.seed = cfg.sampling.seed;
  check_stages(c, s);
  s.terminal_constraint = intersect(Polytope(c.H, eta), Polytope(GK, mu));
  const TerminalSet Xf =
      terminal_set(gains.Acl, s.terminal_constraint, cfg.sys.Bw,
                   Polytope::point(VectorXd::Zero(cfg.sys.mw())), cfg.fixed_point);
  s.terminal = Xf.set;
  s.terminal_iterations = Xf.iterations;
  s.terminal_maximal = Xf.maximal;
  s.eta_f = Xf.set.offsets();
  return s;
}

}  // namespace

SetPipelineResult run_pipeline(const ProblemConfig& cfg) {
  cfg.validate();
  const ControllerGains gains = lqr_synthesize(cfg.sys);
  if (cfg.scheme == Scheme::kRobust) {
    return run_pipeline(cfg, gains, PlainQuantiles{});
  }
  return run_pipeline(cfg, gains, plain_quantiles(cfg, gains));
}

TighteningSchedule build_schedule(const ProblemConfig& cfg,
                                  const ControllerGains& gains,
                                  const PlainQuantiles& plain) {
  switch (cfg.scheme) {
    case Scheme::kRobust: return robust_schedule(cfg, gains);
    case Scheme::kTube: return stochastic_schedule(cfg, gains, plain, 0.0);
    case Scheme::kProposed: break;
  }
  return stochastic_schedule(cfg, gains, plain, cfg.eps_f);
}

SetPipelineResult assemble_sets(const ProblemConfig& cfg,
                                const ControllerGains& gains,
                                const TighteningSchedule& schedule) {
  const ConstraintSpec& c = cfg.constraints;
  const LtiSystem& sys = cfg.sys;
  const Polytope& W = cfg.model().support();
  require(schedule.horizon() == sys.T && static_cast<int>(schedule.mu.size()) == sys.T,
          Errc::kDimensionMismatch, "schedule length differs from T");
  check_stages(c, schedule);
  SetPipelineResult r;
  r.scheme = cfg.scheme;
  r.gains = gains;
  r.schedule = schedule;
  r.Xf_tilde = schedule.terminal_constraint;
  r.Xf = schedule.terminal;
  r.xf_iterations = schedule.terminal_iterations;
  r.xf_maximal = schedule.terminal_maximal;
  if (!r.xf_maximal) r.warnings.push_back("terminal set is not maximal");
  const MrpiApproximation mrpi = mrpi_for(cfg, gains);
  r.Xinf = mrpi.set;
  r.mrpi_terms = mrpi.terms;
  r.mrpi_invariant = mrpi.invariant;
  const Polytope raw_zf(r.Xf.normals(), schedule.eta_f);
  const Polytope ZT(c.H, schedule.eta.back());
  r.zf_in_zt = contains(ZT, raw_zf);
  // z_T ∈ Z_T is imposed anyway, so Z_f ∩ Z_T leaves every feasible set
  // unchanged and makes the nesting Z_f ⊆ Z_T hold by construction.
  r.Zf = r.zf_in_zt ? raw_zf : reduce(intersect(raw_zf, ZT));
  if (r.Zf.is_empty()) {
    fail(Errc::kTighteningInfeasible, "tightened terminal set is empty");
  }
  if (!r.zf_in_zt) r.warnings.push_back("Z_f intersected with Z_T");
  r.CT = t_step_set(sys, r.constraints(c));
  const auto keep = state_coords(sys.n());
  if (cfg.scheme == Scheme::kRobust) {
    if (!mrpi.invariant) {
      fail(Errc::kNonContractive, "mRPI approximation is not robust invariant");
    }
    const Polytope Xbar(c.H, schedule.eta.front());
    const Polytope XN = intersect(project(r.CT, keep), Xbar);
    if (XN.is_empty()) fail(Errc::kEmptySet, "robust feasible set is empty");
    r.Cinf = minkowski_sum(XN, r.Xinf);
    r.region = r.Cinf;
    r.tube = r.Xinf;
    r.initial = Xbar;
  } else {
    const ControlInvariantSet C =
        robust_control_invariant(sys, r.CT, W, cfg.fixed_point);
    r.Cinf = C.set;
    r.cinf_iterations = C.iterations;
    if (cfg.scheme == Scheme::kProposed) {
      r.first_step = first_step_set(r.Cinf, sys.Bw, W);
      r.region = r.Cinf;
    } else {
      r.region = project(r.CT, keep);
    }
  }
  r.terminal_margin = terminal_margin(r.Xinf, r.Xf);
  if (r.terminal_margin <= 0.0) {
    r.warnings.push_back("mRPI set is not inside the terminal set");
  }
  return r;
}

SetPipelineResult run_pipeline(const ProblemConfig& cfg,
                               const ControllerGains& gains,
                               const PlainQuantiles& plain) {
  return assemble_sets(cfg, gains, build_schedule(cfg, gains, plain));
}

}  // namespace smpc
