#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smpc/controller.hpp"
#include "smpc/disturbance.hpp"
#include "smpc/invariant.hpp"
#include "smpc/tightening.hpp"

namespace smpc {

/// proposed: stochastic tightening plus first-step constraint z_1 ∈ C_∞ ⊖ Bw W.
/// tube: mixed schedule with W_f = W, no first-step constraint.
/// robust: tube MPC with constraints tightened by the mRPI set Z, free
/// initial nominal state x − z_0 ∈ Z.
enum class Scheme { kProposed, kTube, kRobust };
std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);

struct ProblemConfig {
  LtiSystem sys;
  ConstraintSpec constraints;
  std::optional<DisturbanceModel> disturbance;
  Scheme scheme = Scheme::kProposed;
  /// Mixed schedule with W_f covering 1 − ε_f of the mass; plain when unset.
  std::optional<double> eps_f;
  SamplingSettings sampling;
  TighteningMethod method = TighteningMethod::kSampled;
  FixedPointSettings fixed_point;
  double mrpi_eps = 1e-3;
  int mrpi_facets = 0;
  Eigen::Index confidence_samples = 1000000;

  const DisturbanceModel& model() const;
  void validate() const;
};

/// Untightened quantile offsets shared by every variant: index l holds the
/// offsets against e_l, l = 0..T.
struct PlainQuantiles {
  std::vector<VectorXd> state;
  std::vector<VectorXd> input;
  std::vector<VectorXd> terminal;
  Polytope Xf_tilde;
  TerminalSet Xf;
  std::vector<SampledQuantileCertificate> certificates;
};

PlainQuantiles plain_quantiles(const ProblemConfig& cfg,
                               const ControllerGains& gains);

/// Stochastic schedule (plain, or mixed when eps_f is given).
TighteningSchedule stochastic_schedule(const ProblemConfig& cfg,
                                       const ControllerGains& gains,
                                       const PlainQuantiles& plain,
                                       std::optional<double> eps_f);

struct SetPipelineResult {
  Scheme scheme = Scheme::kProposed;
  ControllerGains gains;
  TighteningSchedule schedule;
  Polytope Xf_tilde;
  Polytope Xf;
  Polytope Zf;
  Polytope Xinf;
  Polytope CT;
  Polytope Cinf;
  std::optional<Polytope> first_step;
  std::optional<Polytope> tube;
  std::optional<Polytope> initial;
  /// Set of states from which the online problem is feasible.
  Polytope region;
  int xf_iterations = 0;
  bool xf_maximal = true;
  int cinf_iterations = 0;
  int mrpi_terms = 0;
  bool mrpi_invariant = false;
  double terminal_margin = 0.0;
  /// Whether the tightened terminal rows alone already lie in Z_T; Zf is
  /// intersected with Z_T otherwise.
  bool zf_in_zt = false;
  std::vector<std::string> warnings;

  NominalConstraints constraints(const ConstraintSpec& c) const;
  ControllerSpec controller_spec(const ProblemConfig& cfg) const;
};

/// Schedule of the configured scheme. The robust scheme ignores `plain`.
TighteningSchedule build_schedule(const ProblemConfig& cfg,
                                  const ControllerGains& gains,
                                  const PlainQuantiles& plain);

/// Terminal, T-step and invariant sets for a given schedule.
SetPipelineResult assemble_sets(const ProblemConfig& cfg,
                                const ControllerGains& gains,
                                const TighteningSchedule& schedule);

/// Full offline pipeline: gains, schedule, terminal and invariant sets.
SetPipelineResult run_pipeline(const ProblemConfig& cfg);
/// Same, reusing precomputed gains and plain quantiles.
SetPipelineResult run_pipeline(const ProblemConfig& cfg,
                               const ControllerGains& gains,
                               const PlainQuantiles& plain);

}  // namespace smpc
