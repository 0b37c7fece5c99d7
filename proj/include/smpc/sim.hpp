#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "smpc/controller.hpp"
#include "smpc/pipeline.hpp"

namespace smpc {

/// Runs fn(index) for index in [0, count) on `jobs` threads (0 = hardware
/// concurrency). Work is claimed in index order; the first exception is
/// rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned jobs,
                  const std::function<void(std::size_t)>& fn);

/// How the true system's disturbances are drawn.
enum class DisturbanceMode {
  kModel,     // samples of the disturbance model
  kVertices,  // uniformly chosen vertices of the support polytope
  kMixed,     // per step, a vertex or a model sample with probability ½
  kZero,
};
std::string_view to_string(DisturbanceMode m);

struct TraceStep {
  int k = 0;
  VectorXd x;
  VectorXd u;
  qp::Status status = qp::Status::kOptimal;
  double stage_cost = 0.0;
  /// Empty at k = 0 and after an infeasible step.
  std::optional<bool> candidate_feasible;
  bool in_terminal = false;
  double dist_xinf = 0.0;
  double value = 0.0;  // optimal predicted cost
};

struct ClosedLoopTrace {
  std::vector<TraceStep> steps;  // x_0..x_{N}; the last step carries no input
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t config_hash = 0;

  int infeasible_count() const;
};

struct SimulationOptions {
  int steps = 15;
  std::uint64_t seed = 1;
  DisturbanceMode mode = DisturbanceMode::kModel;
  /// Skip the x0 ∈ region check (out-of-region studies).
  bool allow_outside_region = false;
  std::uint64_t config_hash = 0;
};

/// Context shared read-only by all runs of a study.
class ClosedLoopSimulator {
 public:
  ClosedLoopSimulator(const ProblemConfig& cfg, const SetPipelineResult& sets);

  /// One run using RNG stream `stream`; x_{k+1} = A x_k + B u_k + Bw w_k.
  ClosedLoopTrace run(MpcController& controller, const VectorXd& x0,
                      std::uint64_t stream, const SimulationOptions& opt) const;

  /// Runs x0s[i] on stream i, one controller per worker thread.
  std::vector<ClosedLoopTrace> run_many(const std::vector<VectorXd>& x0s,
                                        const SimulationOptions& opt,
                                        unsigned jobs = 0) const;

  const ControllerSpec& spec() const { return spec_; }
  const SetPipelineResult& sets() const { return sets_; }
  const ProblemConfig& config() const { return cfg_; }

 private:
  VectorXd draw(Rng& rng, DisturbanceMode mode) const;

  const ProblemConfig& cfg_;
  const SetPipelineResult& sets_;
  ControllerSpec spec_;
  std::vector<VectorXd> vertices_;
};

/// Euclidean distance from x to a polytope (0 inside).
double distance_to(const Polytope& P, const VectorXd& x);

/// Uniform samples from a bounded polytope by rejection from its box.
std::vector<VectorXd> sample_polytope(const Polytope& P, std::size_t count,
                                      std::uint64_t seed);

struct Proportion {
  double estimate = 0.0;
  double low = 0.0;   // Wilson 95 % interval
  double high = 0.0;
  std::int64_t hits = 0;
  std::int64_t trials = 0;

  double standard_error() const;
};
Proportion wilson(std::int64_t hits, std::int64_t trials, double z = 1.959964);

struct ViolationReport {
  int first_step = 1;
  int last_step = 6;
  /// per_step[j][k] for row j and step k (k = 0..max steps).
  std::vector<std::vector<Proportion>> per_step;
  /// Average over the window of the per-step frequencies, per row.
  std::vector<double> window_average;
  /// Pooled window frequency with its interval, per row.
  std::vector<Proportion> window_pooled;
};

/// Marginal frequencies of H_j x_k > h_j over traces.
ViolationReport violation_stats(const std::vector<ClosedLoopTrace>& traces,
                                const MatrixXd& H, const VectorXd& h,
                                int first_step = 1, int last_step = 6);

/// P{H_j x_{k+1} > h_j | x_k} by redrawing `draws` disturbances at recorded
/// (x_k, u_k) pairs for k in [first_step, last_step] on every `stride`-th trace.
std::vector<Proportion> conditional_violation(
    const LtiSystem& sys, const DisturbanceModel& model,
    const std::vector<ClosedLoopTrace>& traces, const MatrixXd& H,
    const VectorXd& h, int first_step, int last_step, int stride, int draws,
    std::uint64_t seed);

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double low = 0.0;   // mean ± 1.96 SE
  double high = 0.0;
  std::int64_t count = 0;
};

/// Time-and-ensemble average of ‖x_k‖²_Q for k ≥ burn_in; the standard error
/// treats per-trace time averages as independent.
MeanEstimate average_cost(const std::vector<ClosedLoopTrace>& traces,
                          const MatrixXd& Q, int burn_in = 20);

/// E‖Bw w‖²_P by Monte Carlo.
MeanEstimate expected_disturbance_cost(const DisturbanceModel& model,
                                       const MatrixXd& Bw, const MatrixXd& P,
                                       Eigen::Index samples = 1000000,
                                       std::uint64_t stream = 0xC057);

/// trace(Q Σ) with Σ = Acl Σ Aclᵀ + Bw Σ_w Bwᵀ.
double stationary_state_cost(const MatrixXd& Acl, const MatrixXd& Bw,
                             const MatrixXd& Sigma_w, const MatrixXd& Q);

struct RegionEstimate {
  std::vector<VectorXd> vertices;  // CCW, exact mode only
  double area = 0.0;
  std::string method;              // "exact_2d" or "hit_or_miss"
  std::int64_t samples = 0;
  double standard_error = 0.0;
};

RegionEstimate exact_region(const Polytope& region);
RegionEstimate hit_or_miss_region(const Polytope& region, const VectorXd& lower,
                                  const VectorXd& upper, std::int64_t samples,
                                  std::uint64_t seed);

struct SweepRow {
  double eps_f = 0.0;
  double area = 0.0;
  double relative = 0.0;  // area / area at ε_f = 0
};

/// Feasible-region area of the proposed scheme with the mixed schedule at
/// every ε_f of the grid.
std::vector<SweepRow> epsf_sweep(const ProblemConfig& cfg,
                                 const std::vector<double>& grid,
                                 unsigned jobs = 0);

struct ConvergenceReport {
  std::vector<int> first_entry;  // first k with x_k ∈ X_f, −1 if never
  std::vector<int> k_prime;
  /// Fraction of traces with sup_{k ≥ k'} dist(x_k, X_∞) < eps2.
  std::vector<double> fraction_below;
  double eps2 = 0.0;
};

ConvergenceReport convergence_diagnostics(
    const std::vector<ClosedLoopTrace>& traces, double eps2,
    const std::vector<int>& k_prime);

/// Ĉ = L̂ · max_w ‖Bw w‖ with L̂ the largest |V(x) − V(y)| / ‖x − y‖ over
/// `pairs` random nearby pairs of states in the region.
double lipschitz_cost_estimate(const SetPipelineResult& sets,
                               const ControllerSpec& spec, const Polytope& W,
                               int pairs, std::uint64_t seed);

/// Trace CSV (RFC 4180): run, k, x1..xn, u1..um, status, stage_cost,
/// candidate_feasible, in_terminal, dist_Xinf.
void write_traces_csv(std::ostream& os,
                      const std::vector<ClosedLoopTrace>& traces);

}  // namespace smpc
