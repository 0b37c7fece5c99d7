#include "smpc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "smpc/lp.hpp"

namespace smpc {
namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Vertices of W: exact in 2-D, otherwise LP maximizers along ±e_i and the
// box diagonals.
std::vector<VectorXd> support_vertices(const Polytope& W) {
  if (W.dim() == 2) return vertices_2d(W);
  std::vector<VectorXd> out;
  const Eigen::Index n = W.dim();
  const Eigen::Index corners = Eigen::Index{1} << std::min<Eigen::Index>(n, 10);
  for (Eigen::Index c = 0; c < corners; ++c) {
    VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = ((c >> (i % 10)) & 1) ? 1.0 : -1.0;
    const lp::Result r = lp::maximize(W.normals(), W.offsets(), d);
    if (r.status == lp::Status::kOptimal) out.push_back(r.x);
  }
  return out;
}

}  // namespace

void parallel_for(std::size_t count, unsigned jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::string_view to_string(DisturbanceMode m) {
  switch (m) {
    case DisturbanceMode::kModel: return "model";
    case DisturbanceMode::kVertices: return "vertices";
    case DisturbanceMode::kMixed: return "mixed";
    case DisturbanceMode::kZero: return "zero";
  }
  return "unknown";
}

int ClosedLoopTrace::infeasible_count() const {
  int count = 0;
  for (const TraceStep& s : steps) {
    if (s.status != qp::Status::kOptimal) ++count;
  }
  return count;
}

double distance_to(const Polytope& P, const VectorXd& x) {
  if (P.contains_point(x, 0.0)) return 0.0;
  const Eigen::Index n = P.dim();
  const qp::Solution s =
      qp::solve(MatrixXd::Identity(n, n), -x, P.normals(), P.offsets());
  require(s.status == qp::Status::kOptimal, Errc::kEmptySet,
          "distance to an empty set");
  return (s.y - x).norm();
}

std::vector<VectorXd> sample_polytope(const Polytope& P, std::size_t count,
                                      std::uint64_t seed) {
  const auto [lo, hi] = bounding_box(P);
  Rng rng = make_rng(seed, 0x5A3B1E);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count) {
    require(++attempts < 1000 * count + 100000, Errc::kEmptySet,
            "rejection sampling found no interior points");
    VectorXd x(P.dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
    }
    if (P.contains_point(x, 0.0)) out.push_back(std::move(x));
  }
  return out;
}

ClosedLoopSimulator::ClosedLoopSimulator(const ProblemConfig& cfg,
                                         const SetPipelineResult& sets)
    : cfg_(cfg), sets_(sets), spec_(sets.controller_spec(cfg)),
      vertices_(support_vertices(cfg.model().support())) {}

VectorXd ClosedLoopSimulator::draw(Rng& rng, DisturbanceMode mode) const {
  const DisturbanceModel& model = cfg_.model();
  auto vertex = [&] {
    std::uniform_int_distribution<std::size_t> pick(0, vertices_.size() - 1);
    return vertices_[pick(rng)];
  };
  switch (mode) {
    case DisturbanceMode::kModel: return model.draw(rng);
    case DisturbanceMode::kVertices: return vertex();
    case DisturbanceMode::kMixed: {
      std::bernoulli_distribution coin(0.5);
      return coin(rng) ? vertex() : model.draw(rng);
    }
    case DisturbanceMode::kZero: return VectorXd::Zero(model.dim());
  }
  return VectorXd::Zero(model.dim());
}

ClosedLoopTrace ClosedLoopSimulator::run(MpcController& controller,
                                         const VectorXd& x0,
                                         std::uint64_t stream,
                                         const SimulationOptions& opt) const {
  const LtiSystem& sys = cfg_.sys;
  require(x0.size() == sys.n() && x0.allFinite(), Errc::kBadParams,
          "initial state must be finite with the state dimension");
  if (!opt.allow_outside_region) {
    require(sets_.region.contains_point(x0, 1e-9), Errc::kBadParams,
            "initial state lies outside the feasible region");
  }
  require(opt.steps >= 0, Errc::kBadParams, "step count must be nonnegative");
  ClosedLoopTrace trace;
  trace.seed = opt.seed;
  trace.stream = stream;
  trace.config_hash = opt.config_hash;
  trace.steps.reserve(static_cast<std::size_t>(opt.steps) + 1);
  Rng rng = make_rng(opt.seed, stream);
  controller.reset();
  VectorXd x = x0;
  VectorXd w_prev;
  auto record = [&](int k) {
    TraceStep s;
    s.k = k;
    s.x = x;
    s.in_terminal = sets_.Xf.contains_point(x, 1e-9);
    s.dist_xinf = distance_to(sets_.Xinf, x);
    return s;
  };
  for (int k = 0; k < opt.steps; ++k) {
    TraceStep s = record(k);
    if (k > 0) {
      if (auto cand = controller.candidate(w_prev, x)) {
        s.candidate_feasible = cand->feasible;
      }
    }
    const StepResult r = controller.step(x);
    s.u = r.u;
    s.status = r.solution.status;
    s.value = r.solution.value;
    s.stage_cost = x.dot(sys.Q * x) + r.u.dot(sys.R * r.u);
    trace.steps.push_back(std::move(s));
    w_prev = draw(rng, opt.mode);
    x = sys.A * x + sys.B * r.u + sys.Bw * w_prev;
  }
  TraceStep last = record(opt.steps);
  last.stage_cost = x.dot(sys.Q * x);
  trace.steps.push_back(std::move(last));
  return trace;
}

std::vector<ClosedLoopTrace> ClosedLoopSimulator::run_many(
    const std::vector<VectorXd>& x0s, const SimulationOptions& opt,
    unsigned jobs) const {
  std::vector<ClosedLoopTrace> traces(x0s.size());
  // Runs are grouped in fixed chunks, each with its own controller, so the
  // result depends only on the run index.
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (x0s.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    MpcController controller(spec_);
    const std::size_t end = std::min(x0s.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      traces[i] = run(controller, x0s[i], i, opt);
    }
  });
  return traces;
}

double Proportion::standard_error() const {
  if (trials == 0) return 0.0;
  return std::sqrt(estimate * (1.0 - estimate) / static_cast<double>(trials));
}

Proportion wilson(std::int64_t hits, std::int64_t trials, double z) {
  Proportion p;
  p.hits = hits;
  p.trials = trials;
  if (trials == 0) return p;
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (ph + z2 / (2 * n)) / (1 + z2 / n);
  const double half =
      z * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  p.estimate = ph;
  p.low = std::max(0.0, centre - half);
  p.high = std::min(1.0, centre + half);
  return p;
}

ViolationReport violation_stats(const std::vector<ClosedLoopTrace>& traces,
                                const MatrixXd& H, const VectorXd& h,
                                int first_step, int last_step) {
  require(!traces.empty(), Errc::kBadParams, "no traces");
  require(first_step >= 0 && last_step >= first_step, Errc::kBadParams,
          "violation window");
  std::size_t horizon = 0;
  for (const auto& t : traces) horizon = std::max(horizon, t.steps.size());
  ViolationReport rep;
  rep.first_step = first_step;
  rep.last_step = last_step;
  for (Eigen::Index j = 0; j < H.rows(); ++j) {
    std::vector<std::int64_t> hits(horizon, 0), trials(horizon, 0);
    for (const auto& t : traces) {
      for (const TraceStep& s : t.steps) {
        const auto k = static_cast<std::size_t>(s.k);
        ++trials[k];
        if (H.row(j).dot(s.x) > h(j)) ++hits[k];
      }
    }
    std::vector<Proportion> row;
    std::int64_t wh = 0, wt = 0;
    double avg = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < horizon; ++k) {
      row.push_back(wilson(hits[k], trials[k]));
      if (static_cast<int>(k) >= first_step && static_cast<int>(k) <= last_step) {
        wh += hits[k];
        wt += trials[k];
        avg += row.back().estimate;
        ++cnt;
      }
    }
    rep.per_step.push_back(std::move(row));
    rep.window_average.push_back(cnt > 0 ? avg / cnt : 0.0);
    rep.window_pooled.push_back(wilson(wh, wt));
  }
  return rep;
}

std::vector<Proportion> conditional_violation(
    const LtiSystem& sys, const DisturbanceModel& model,
    const std::vector<ClosedLoopTrace>& traces, const MatrixXd& H,
    const VectorXd& h, int first_step, int last_step, int stride, int draws,
    std::uint64_t seed) {
  require(stride >= 1 && draws >= 1, Errc::kBadParams, "stride and draws");
  std::vector<std::int64_t> hits(static_cast<std::size_t>(H.rows()), 0);
  std::int64_t trials = 0;
  Rng rng = make_rng(seed, 0xC0D1);
  for (std::size_t i = 0; i < traces.size(); i += static_cast<std::size_t>(stride)) {
    for (const TraceStep& s : traces[i].steps) {
      if (s.k < first_step || s.k > last_step || s.u.size() == 0) continue;
      if (s.status != qp::Status::kOptimal) continue;
      const VectorXd nominal = sys.A * s.x + sys.B * s.u;
      const MatrixXd W = model.draws(draws, rng);
      const MatrixXd next = (sys.Bw * W).colwise() + nominal;
      const MatrixXd Hx = H * next;
      for (Eigen::Index j = 0; j < H.rows(); ++j) {
        hits[static_cast<std::size_t>(j)] +=
            (Hx.row(j).array() > h(j)).count();
      }
      trials += draws;
    }
  }
  std::vector<Proportion> out;
  for (auto c : hits) out.push_back(wilson(c, trials));
  return out;
}

MeanEstimate average_cost(const std::vector<ClosedLoopTrace>& traces,
                          const MatrixXd& Q, int burn_in) {
  std::vector<double> per_trace;
  std::int64_t count = 0;
  for (const auto& t : traces) {
    double sum = 0.0;
    int n = 0;
    for (const TraceStep& s : t.steps) {
      if (s.k < burn_in) continue;
      sum += s.x.dot(Q * s.x);
      ++n;
    }
    require(n > 0, Errc::kBadParams, "trace shorter than the burn-in");
    per_trace.push_back(sum / n);
    count += n;
  }
  require(!per_trace.empty(), Errc::kBadParams, "no traces");
  MeanEstimate e;
  const double m = static_cast<double>(per_trace.size());
  for (double v : per_trace) e.mean += v / m;
  double var = 0.0;
  for (double v : per_trace) var += (v - e.mean) * (v - e.mean);
  var /= std::max(1.0, m - 1.0);
  e.standard_error = std::sqrt(var / m);
  e.low = e.mean - 1.959964 * e.standard_error;
  e.high = e.mean + 1.959964 * e.standard_error;
  e.count = count;
  return e;
}

MeanEstimate expected_disturbance_cost(const DisturbanceModel& model,
                                       const MatrixXd& Bw, const MatrixXd& P,
                                       Eigen::Index samples,
                                       std::uint64_t stream) {
  require(samples > 1, Errc::kBadParams, "need at least two samples");
  Rng rng = make_rng(model.seed(), stream);
  const MatrixXd M = Bw.transpose() * P * Bw;
  double sum = 0.0, sum2 = 0.0;
  constexpr Eigen::Index kChunk = 65536;
  for (Eigen::Index done = 0; done < samples; done += kChunk) {
    const Eigen::Index c = std::min(kChunk, samples - done);
    const MatrixXd W = model.draws(c, rng);
    const VectorXd v = (W.array() * (M * W).array()).colwise().sum().transpose();
    sum += v.sum();
    sum2 += v.squaredNorm();
  }
  MeanEstimate e;
  const double n = static_cast<double>(samples);
  e.mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * e.mean * e.mean) / (n - 1));
  e.standard_error = std::sqrt(var / n);
  e.low = e.mean - 1.959964 * e.standard_error;
  e.high = e.mean + 1.959964 * e.standard_error;
  e.count = samples;
  return e;
}

double stationary_state_cost(const MatrixXd& Acl, const MatrixXd& Bw,
                             const MatrixXd& Sigma_w, const MatrixXd& Q) {
  const MatrixXd Sigma =
      lyapunov_solve(Acl.transpose(), Bw * Sigma_w * Bw.transpose());
  return (Q * Sigma).trace();
}

RegionEstimate exact_region(const Polytope& region) {
  require(region.dim() == 2, Errc::kDimensionUnsupported,
          "exact region area needs a 2-D state");
  RegionEstimate r;
  r.method = "exact_2d";
  if (region.is_empty()) return r;
  r.vertices = vertices_2d(region);
  r.area = area_2d(region);
  return r;
}

RegionEstimate hit_or_miss_region(const Polytope& region, const VectorXd& lower,
                                  const VectorXd& upper, std::int64_t samples,
                                  std::uint64_t seed) {
  require(lower.size() == region.dim() && upper.size() == region.dim(),
          Errc::kDimensionMismatch, "bounding box dimension");
  require(samples > 0, Errc::kBadParams, "sample count");
  Rng rng = make_rng(seed, 0x417);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::int64_t hits = 0;
  VectorXd x(region.dim());
  for (std::int64_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = lower(i) + (upper(i) - lower(i)) * unit(rng);
    }
    if (region.contains_point(x, 0.0)) ++hits;
  }
  const double box = (upper - lower).prod();
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  RegionEstimate r;
  r.method = "hit_or_miss";
  r.samples = samples;
  r.area = box * p;
  r.standard_error = box * std::sqrt(p * (1 - p) / static_cast<double>(samples));
  return r;
}

std::vector<SweepRow> epsf_sweep(const ProblemConfig& cfg,
                                 const std::vector<double>& grid,
                                 unsigned jobs) {
  require(!grid.empty(), Errc::kBadParams, "empty ε_f grid");
  for (double e : grid) {
    require(e >= 0.0 && e < 1.0, Errc::kBadParams, "ε_f grid must lie in [0, 1)");
  }
  cfg.validate();
  const ControllerGains gains = lqr_synthesize(cfg.sys);
  const PlainQuantiles plain = plain_quantiles(cfg, gains);
  std::vector<double> eps = grid;
  const bool has_zero = std::find(grid.begin(), grid.end(), 0.0) != grid.end();
  if (!has_zero) eps.push_back(0.0);
  std::vector<double> area(eps.size());
  parallel_for(eps.size(), jobs, [&](std::size_t i) {
    ProblemConfig c = cfg;
    c.scheme = Scheme::kProposed;
    c.eps_f = eps[i];
    const SetPipelineResult r = run_pipeline(c, gains, plain);
    area[i] = r.region.dim() == 2 ? area_2d(r.region)
                                  : hit_or_miss_region(r.region,
                                                       bounding_box(r.region).first,
                                                       bounding_box(r.region).second,
                                                       200000, 1).area;
  });
  const double base = area[static_cast<std::size_t>(
      std::find(eps.begin(), eps.end(), 0.0) - eps.begin())];
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows.push_back({grid[i], area[i], base > 0.0 ? area[i] / base : 0.0});
  }
  return rows;
}

ConvergenceReport convergence_diagnostics(
    const std::vector<ClosedLoopTrace>& traces, double eps2,
    const std::vector<int>& k_prime) {
  ConvergenceReport rep;
  rep.eps2 = eps2;
  rep.k_prime = k_prime;
  for (const auto& t : traces) {
    int first = -1;
    for (const TraceStep& s : t.steps) {
      if (s.in_terminal) {
        first = s.k;
        break;
      }
    }
    rep.first_entry.push_back(first);
  }
  for (int kp : k_prime) {
    std::size_t below = 0;
    for (const auto& t : traces) {
      double sup = 0.0;
      for (const TraceStep& s : t.steps) {
        if (s.k >= kp) sup = std::max(sup, s.dist_xinf);
      }
      if (sup < eps2) ++below;
    }
    rep.fraction_below.push_back(
        traces.empty() ? 0.0
                       : static_cast<double>(below) / static_cast<double>(traces.size()));
  }
  return rep;
}

double lipschitz_cost_estimate(const SetPipelineResult& sets,
                               const ControllerSpec& spec, const Polytope& W,
                               int pairs, std::uint64_t seed) {
  require(pairs > 0, Errc::kBadParams, "pair count");
  const CondensedQp cq(spec);
  const qp::Solver solver(cq.hessian(), cq.constraint_rows());
  auto value = [&](const VectorXd& x, double& v) {
    const QpProblem p = cq.at(x);
    const qp::Solution s = solver.solve(p.linear, p.offsets);
    if (s.status != qp::Status::kOptimal) return false;
    v = s.value + p.constant;
    return true;
  };
  const auto points = sample_polytope(sets.region, static_cast<std::size_t>(pairs), seed);
  Rng rng = make_rng(seed, 0x11F);
  std::normal_distribution<double> normal;
  const auto [lo, hi] = bounding_box(sets.region);
  const double step = 0.02 * (hi - lo).norm();
  double L = 0.0;
  for (const VectorXd& x : points) {
    VectorXd d(x.size());
    for (auto& c : d) c = normal(rng);
    const VectorXd y = x + step * d.normalized();
    if (!sets.region.contains_point(y, 0.0)) continue;
    double vx = 0.0, vy = 0.0;
    if (!value(x, vx) || !value(y, vy)) continue;
    L = std::max(L, std::abs(vx - vy) / (x - y).norm());
  }
  double wmax = 0.0;
  for (const VectorXd& w : support_vertices(W)) {
    wmax = std::max(wmax, (spec.sys.Bw * w).norm());
  }
  return L * wmax;
}

void write_traces_csv(std::ostream& os,
                      const std::vector<ClosedLoopTrace>& traces) {
  Eigen::Index n = 0, m = 0;
  for (const auto& t : traces) {
    for (const TraceStep& s : t.steps) {
      n = std::max(n, s.x.size());
      m = std::max(m, s.u.size());
    }
  }
  os << "run,k";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u" << i + 1;
  os << ",status,stage_cost,candidate_feasible,in_terminal,dist_Xinf\r\n";
  for (std::size_t r = 0; r < traces.size(); ++r) {
    for (const TraceStep& s : traces[r].steps) {
      os << r << ',' << s.k;
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(s.x(i));
      for (Eigen::Index i = 0; i < m; ++i) {
        os << ',';
        if (i < s.u.size()) os << format_double(s.u(i));
      }
      os << ',' << qp::to_string(s.status) << ',' << format_double(s.stage_cost)
         << ',';
      if (s.candidate_feasible) os << (*s.candidate_feasible ? 1 : 0);
      os << ',' << (s.in_terminal ? 1 : 0) << ',' << format_double(s.dist_xinf)
         << "\r\n";
    }
  }
}

}  // namespace smpc
