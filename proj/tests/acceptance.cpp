// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [--jobs N] [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "smpc/study.hpp"

using namespace smpc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned g_jobs = 0;

// Shared studies, built on first use.
const StudyConfig& flagship_study() {
  static const StudyConfig s = load_study(SMPC_CONFIG_DIR "/converter_single_row.json");
  return s;
}

const StudyConfig& box_study() {
  static const StudyConfig s = load_study(SMPC_CONFIG_DIR "/converter_box.json");
  return s;
}

struct BoxContext {
  ControllerGains gains;
  PlainQuantiles plain;
};

const BoxContext& box_context() {
  static const BoxContext ctx = [] {
    const ProblemConfig& cfg = box_study().problem;
    BoxContext c;
    c.gains = lqr_synthesize(cfg.sys);
    c.plain = plain_quantiles(cfg, c.gains);
    return c;
  }();
  return ctx;
}

SetPipelineResult box_sets(Scheme scheme, std::optional<double> eps_f) {
  ProblemConfig cfg = box_study().problem;
  cfg.scheme = scheme;
  cfg.eps_f = eps_f;
  const BoxContext& ctx = box_context();
  return run_pipeline(cfg, ctx.gains, ctx.plain);
}

ProblemConfig box_config(std::optional<double> eps_f) {
  ProblemConfig cfg = box_study().problem;
  cfg.scheme = Scheme::kProposed;
  cfg.eps_f = eps_f;
  return cfg;
}

const SetPipelineResult& box_plain_sets() {
  static const SetPipelineResult r = box_sets(Scheme::kProposed, std::nullopt);
  return r;
}

double binomial_se(double p, std::int64_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// 1. Marginal violation frequency of x1 ≤ 2 over steps 1..6.
Outcome flagship_violation() {
  const StudyConfig& st = flagship_study();
  const ProblemConfig& cfg = st.problem;
  const SetPipelineResult sets = study_sets(st, study_schedule(st));
  const SimulationSettings& s = st.simulation;
  const ClosedLoopSimulator sim(cfg, sets);
  SimulationOptions opt;
  opt.steps = 15;
  opt.seed = s.seed;
  const std::vector<VectorXd> x0s(10000, *s.x0);
  const auto traces = sim.run_many(x0s, opt, g_jobs);
  int infeasible = 0;
  for (const auto& t : traces) infeasible += t.infeasible_count();
  const ViolationReport v = violation_stats(traces, cfg.constraints.H, cfg.constraints.h, 1, 6);
  const double avg = v.window_average.at(0);
  const auto cond = conditional_violation(cfg.sys, cfg.model(), traces, cfg.constraints.H,
                                          cfg.constraints.h, 0, 5, 10, 200, 7);
  return {avg >= 0.18 && avg <= 0.22,
          fmt("10000 runs, average violation over steps 1..6 = %.4f (band [0.18, 0.22]); "
              "conditional one-step %.4f; QP infeasibilities %d",
              avg, cond.at(0).estimate, infeasible)};
}

// 2. Feasible-region ratios and containment robust ⊆ tube ⊆ proposed.
Outcome region_ratios() {
  const Polytope proposed = box_plain_sets().region;
  const Polytope tube = box_sets(Scheme::kTube, std::nullopt).region;
  const Polytope robust = box_sets(Scheme::kRobust, std::nullopt).region;
  const double ap = area_2d(proposed), at = area_2d(tube), ar = area_2d(robust);
  const double r1 = ap / at, r2 = ap / ar;
  const bool nested = contains(tube, robust, 1e-7) && contains(proposed, tube, 1e-7);
  const bool pass = nested && r1 >= 1.36 && r1 <= 2.04 && r2 >= 2.7 && r2 <= 4.1;
  return {pass, fmt("areas proposed %.3f, tube %.3f, robust %.3f; proposed/tube %.3f "
                    "(band [1.36, 2.04]), proposed/robust %.3f (band [2.7, 4.1]); "
                    "robust ⊆ tube ⊆ proposed: %s",
                    ap, at, ar, r1, r2, nested ? "yes" : "no")};
}

// 3. No QP infeasibility from x0 uniform in the region.
Outcome recursive_feasibility() {
  std::ostringstream os;
  int total = 0;
  std::int64_t steps = 0;
  struct Campaign {
    std::optional<double> eps_f;
    DisturbanceMode mode;
  };
  const Campaign campaigns[] = {{std::nullopt, DisturbanceMode::kMixed},
                                {std::nullopt, DisturbanceMode::kVertices},
                                {0.05, DisturbanceMode::kMixed},
                                {0.05, DisturbanceMode::kVertices}};
  for (const Campaign& c : campaigns) {
    const ProblemConfig cfg = box_config(c.eps_f);
    const SetPipelineResult sets = c.eps_f ? box_sets(Scheme::kProposed, c.eps_f)
                                           : box_plain_sets();
    const ClosedLoopSimulator sim(cfg, sets);
    SimulationOptions opt;
    opt.steps = 30;
    opt.seed = 3;
    opt.mode = c.mode;
    const auto x0s = sample_polytope(sets.region, 10000, 3);
    const auto traces = sim.run_many(x0s, opt, g_jobs);
    int infeasible = 0;
    for (const auto& t : traces) infeasible += t.infeasible_count();
    total += infeasible;
    steps += 10000 * 30;
    os << (c.eps_f ? fmt("mixed eps_f %.2f", *c.eps_f) : std::string("plain")) << "/"
       << to_string(c.mode) << ": " << infeasible << "; ";
  }
  return {total == 0, fmt("%lld closed-loop steps, infeasible QPs ", static_cast<long long>(steps)) +
                          os.str() + fmt("total %d", total)};
}

// 4. Candidate-infeasibility frequency under the mixed schedule.
Outcome candidate_feasibility() {
  bool pass = true;
  std::ostringstream os;
  for (double eps_f : {0.05, 0.2}) {
    const ProblemConfig cfg = box_config(eps_f);
    const SetPipelineResult sets = box_sets(Scheme::kProposed, eps_f);
    const ClosedLoopSimulator sim(cfg, sets);
    SimulationOptions opt;
    opt.steps = 11;
    opt.seed = 5;
    const auto x0s = sample_polytope(sets.region, 1000, 5);
    const auto traces = sim.run_many(x0s, opt, g_jobs);
    std::int64_t n = 0, bad = 0;
    for (const auto& t : traces) {
      for (const auto& s : t.steps) {
        if (!s.candidate_feasible) continue;
        ++n;
        bad += *s.candidate_feasible ? 0 : 1;
      }
    }
    const double freq = static_cast<double>(bad) / static_cast<double>(n);
    const double limit = eps_f + 3.0 * binomial_se(eps_f, n);
    pass = pass && n >= 10000 && freq <= limit;
    os << fmt("eps_f %.2f: %lld/%lld = %.4f (limit %.4f); ", eps_f,
              static_cast<long long>(bad), static_cast<long long>(n), freq, limit);
  }
  return {pass, os.str()};
}

// 5. Average stage cost against E‖Bw w‖²_P.
Outcome average_cost_bound() {
  const ProblemConfig cfg = box_config(std::nullopt);
  const SetPipelineResult& sets = box_plain_sets();
  const ClosedLoopSimulator sim(cfg, sets);
  SimulationOptions opt;
  opt.steps = 120;
  opt.seed = 11;
  const std::vector<VectorXd> x0s(2000, Eigen::Vector2d(2.5, 2.8));
  const auto traces = sim.run_many(x0s, opt, g_jobs);
  const MeanEstimate cost = average_cost(traces, cfg.sys.Q, 20);
  const MeanEstimate bound = expected_disturbance_cost(cfg.model(), cfg.sys.Bw, sets.gains.P);
  const double margin =
      1.959964 * std::hypot(cost.standard_error, bound.standard_error);
  return {cost.mean - bound.mean <= margin,
          fmt("2000 runs x 120 steps, burn-in 20: average |x|_Q^2 = %.5f [%.5f, %.5f], "
              "E|Bw w|_P^2 = %.5f [%.5f, %.5f]; difference %.5f <= %.5f",
              cost.mean, cost.low, cost.high, bound.mean, bound.low, bound.high,
              cost.mean - bound.mean, margin)};
}

// 6. Inside X_f the controller is the LQR law and X_f is never left.
Outcome terminal_equivalence() {
  const ProblemConfig cfg = box_config(std::nullopt);
  const SetPipelineResult& sets = box_plain_sets();
  const auto xs = sample_polytope(sets.Xf, 1000, 9);
  MpcController ctl(sets.controller_spec(cfg));
  double worst = 0.0;
  int failed = 0;
  for (const VectorXd& x : xs) {
    const StepResult r = ctl.step(x);
    failed += r.solution.status == qp::Status::kOptimal ? 0 : 1;
    worst = std::max(worst, (r.u - sets.gains.K * x).norm());
  }
  const ClosedLoopSimulator sim(cfg, sets);
  SimulationOptions opt;
  opt.steps = 30;
  opt.seed = 9;
  int exits = 0;
  for (DisturbanceMode mode : {DisturbanceMode::kModel, DisturbanceMode::kVertices}) {
    opt.mode = mode;
    for (const auto& t : sim.run_many(xs, opt, g_jobs)) {
      for (const auto& s : t.steps) exits += s.in_terminal ? 0 : 1;
    }
  }
  return {worst <= 1e-6 && failed == 0 && exits == 0,
          fmt("1000 states in X_f: max |u - Kx| = %.2e, QP failures %d; "
              "1000 runs x 30 steps (model and vertex disturbances): %d states outside X_f",
              worst, failed, exits)};
}

// 7. Sampled against convolution quantiles on 1-D distributions.
Outcome tightening_cross_validation() {
  struct Case {
    std::string name;
    DisturbanceModel model;
    double acl;
    int l;
  };
  const double sigma = 0.5;
  std::vector<Case> cases;
  cases.push_back({"uniform", DisturbanceModel::uniform_box(VectorXd::Constant(1, -1.0),
                                                            VectorXd::Constant(1, 1.0), 21),
                   1.0, 1});
  cases.push_back({"triangular", DisturbanceModel::uniform_box(VectorXd::Constant(1, 0.0),
                                                               VectorXd::Constant(1, 1.0), 22),
                   1.0, 2});
  cases.push_back({"gaussian",
                   DisturbanceModel::truncated_gaussian(MatrixXd::Constant(1, 1, sigma * sigma),
                                                        100.0 * sigma * sigma, 8, 23),
                   0.5, 3});
  SamplingSettings sampling;
  bool pass = true;
  std::ostringstream os;
  int checks = 0;
  for (const Case& c : cases) {
    const ErrorPropagation prop(MatrixXd::Constant(1, 1, c.acl), MatrixXd::Identity(1, 1), c.l);
    const QuantileTightener q(prop, c.model, sampling);
    const auto marginals = independent_marginals(c.model);
    for (double sign : {1.0, -1.0}) {
      for (double eps : {0.05, 0.2}) {
        const MatrixXd row = MatrixXd::Constant(1, 1, sign);
        const double quantile =
            -q.tighten(row, VectorXd::Zero(1), VectorXd::Constant(1, eps), c.l, 31)[c.l](0);
        std::vector<Marginal> ms;
        std::vector<double> coef;
        for (int k = 0; k < c.l; ++k) {
          ms.push_back(marginals.at(0));
          coef.push_back(sign * std::pow(c.acl, c.l - 1 - k));
        }
        const double eps_l = sampling.bracket_low * eps, eps_u = sampling.bracket_high * eps;
        const double lo = convolution_quantile(ms, coef, eps_u);
        const double hi = convolution_quantile(ms, coef, eps_l);
        const double grid_tol = 1e-3 * (hi - lo) + 1e-6;
        const bool within = quantile >= lo - grid_tol && quantile <= hi + grid_tol;

        // Fresh-sample violation frequency.
        const std::int64_t fresh = 200000;
        const DisturbanceBatch batch = c.model.sample(fresh, c.l, 977);
        const MatrixXd e = error_samples(prop, batch, c.l);
        std::int64_t hits = 0;
        for (Eigen::Index i = 0; i < e.cols(); ++i) hits += sign * e(0, i) > quantile ? 1 : 0;
        const double freq = static_cast<double>(hits) / static_cast<double>(fresh);
        const double f_lo = eps_l - 3.0 * binomial_se(eps_l, fresh);
        const double f_hi = eps_u + 3.0 * binomial_se(eps_u, fresh);
        const bool freq_ok = freq >= f_lo && freq <= f_hi;
        ++checks;
        if (!within || !freq_ok) {
          pass = false;
          os << fmt("%s sign %+.0f eps %.2f: q %.5f not in [%.5f, %.5f] or freq %.4f not in "
                    "[%.4f, %.4f]; ",
                    c.name.c_str(), sign, eps, quantile, lo, hi, freq, f_lo, f_hi);
        }
      }
    }
  }
  if (pass) {
    os << fmt("%d cases (uniform, triangular, gaussian; both row signs; eps 0.05, 0.2): "
              "sampled quantiles inside the convolution bracket and fresh-sample "
              "frequencies inside [eps_l - 3SE, eps_u + 3SE]",
              checks);
  }
  return {pass, os.str()};
}

// Brute-force vertex enumeration for dimension ≤ 3: every d-subset of rows.
std::vector<VectorXd> brute_vertices(const MatrixXd& H, const VectorXd& h) {
  const int d = static_cast<int>(H.cols());
  const int m = static_cast<int>(H.rows());
  std::vector<VectorXd> out;
  std::vector<int> idx(d);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == d) {
      MatrixXd A(d, d);
      VectorXd b(d);
      for (int i = 0; i < d; ++i) {
        A.row(i) = H.row(idx[i]);
        b(i) = h(idx[i]);
      }
      Eigen::FullPivLU<MatrixXd> lu(A);
      if (lu.rank() < d) return;
      const VectorXd x = lu.solve(b);
      if (((H * x - h).array() <= 1e-9 * (1.0 + h.cwiseAbs().maxCoeff())).all()) {
        out.push_back(x);
      }
      return;
    }
    for (int i = start; i < m; ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

double vertex_support(const std::vector<VectorXd>& V, const VectorXd& d) {
  double best = -std::numeric_limits<double>::infinity();
  for (const VectorXd& v : V) best = std::max(best, d.dot(v));
  return best;
}

// Random bounded polytope: random unit normals plus a bounding box.
Polytope random_polytope(int dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const int extra = dim == 2 ? 5 : 7;
  MatrixXd H(extra + 2 * dim, dim);
  VectorXd h(extra + 2 * dim);
  for (int i = 0; i < extra; ++i) {
    VectorXd n(dim);
    for (int k = 0; k < dim; ++k) n(k) = g(rng);
    H.row(i) = n.normalized().transpose();
    h(i) = scale * u(rng);
  }
  for (int k = 0; k < dim; ++k) {
    H.row(extra + 2 * k) = VectorXd::Unit(dim, k).transpose();
    H.row(extra + 2 * k + 1) = -VectorXd::Unit(dim, k).transpose();
    h(extra + 2 * k) = scale * u(rng) * 1.2;
    h(extra + 2 * k + 1) = scale * u(rng) * 1.2;
  }
  return Polytope(H, h);
}

std::vector<VectorXd> directions(int dim, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<VectorXd> out;
  for (int i = 0; i < count; ++i) {
    VectorXd d(dim);
    for (int k = 0; k < dim; ++k) d(k) = g(rng);
    out.push_back(d.normalized());
  }
  return out;
}

// Largest support-function gap between a computed set and an oracle vertex set.
double support_gap(const Polytope& computed, const std::vector<VectorXd>& oracle,
                   const std::vector<VectorXd>& dirs) {
  const auto V = brute_vertices(computed.normals(), computed.offsets());
  double gap = 0.0;
  for (const VectorXd& d : dirs) {
    gap = std::max(gap, std::abs(vertex_support(V, d) - vertex_support(oracle, d)));
  }
  return gap;
}

// 8. Polytope operations against brute-force oracles.
Outcome polytope_oracles() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int grid_mismatch = 0, not_contained = 0, instances = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = trial < 100 ? 2 : 3;
    const Polytope P = random_polytope(dim, 1.0, rng);
    const Polytope Q = random_polytope(dim, 0.2, rng);
    const auto VP = brute_vertices(P.normals(), P.offsets());
    const auto VQ = brute_vertices(Q.normals(), Q.offsets());
    const auto dirs = directions(dim, 40, rng);
    ++instances;

    // Minkowski sum: vertices of P ⊕ Q are among pairwise vertex sums.
    std::vector<VectorXd> sums;
    for (const auto& a : VP) {
      for (const auto& b : VQ) sums.push_back(a + b);
    }
    worst = std::max(worst, support_gap(minkowski_sum(P, Q), sums, dirs));

    // Pontryagin difference: H x ≤ h − max_q H q over the vertices of Q.
    const Polytope D = pontryagin_diff(P, Q);
    VectorXd shrunk = P.offsets();
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      shrunk(i) -= vertex_support(VQ, P.normals().row(i).transpose());
    }
    const auto VD = brute_vertices(P.normals(), shrunk);
    if (!VD.empty() && !D.is_empty()) {
      worst = std::max(worst, support_gap(D, VD, dirs));
      // Grid membership against the definition x + q ∈ P for all vertices q.
      const auto [lo, hi] = bounding_box(P);
      const int n = dim == 2 ? 25 : 9;
      std::vector<int> c(dim, 0);
      for (int cell = 0; cell < static_cast<int>(std::pow(n, dim)); ++cell) {
        int r = cell;
        VectorXd x(dim);
        for (int k = 0; k < dim; ++k) {
          x(k) = lo(k) + (hi(k) - lo(k)) * (r % n) / (n - 1.0);
          r /= n;
        }
        double slack = std::numeric_limits<double>::infinity();
        for (const auto& q : VQ) {
          slack = std::min(slack, (P.offsets() - P.normals() * (x + q)).minCoeff());
        }
        if (std::abs(slack) < 1e-6) continue;
        if ((slack > 0) != D.contains_point(x, 0.0)) ++grid_mismatch;
      }
      // (P ⊖ Q) ⊕ Q ⊆ P.
      const Polytope back = minkowski_sum(D, Q);
      for (const auto& v : brute_vertices(back.normals(), back.offsets())) {
        if (((P.normals() * v - P.offsets()).array() > 1e-6).any()) {
          ++not_contained;
          break;
        }
      }
    }

    // Projection onto the leading coordinates: hull of projected vertices.
    const Eigen::Index keep_dim = dim - 1;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < keep_dim; ++k) keep.push_back(k);
    std::vector<VectorXd> proj;
    for (const auto& v : VP) proj.push_back(v.head(keep_dim));
    const Polytope Pr = project(P, keep);
    worst = std::max(worst, support_gap(Pr, proj, directions(static_cast<int>(keep_dim), 20, rng)));

    // Affine preimage {x | M x + c ∈ P} has vertices M⁻¹(v − c).
    MatrixXd M = MatrixXd::Identity(dim, dim);
    for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] += 0.5 * u(rng);
    VectorXd c(dim);
    for (int k = 0; k < dim; ++k) c(k) = 0.2 * u(rng);
    if (std::abs(M.determinant()) < 0.2) continue;
    std::vector<VectorXd> pre;
    for (const auto& v : VP) pre.push_back(M.fullPivLu().solve(v - c));
    worst = std::max(worst, support_gap(affine_preimage(P, M, c), pre, dirs));
  }
  return {worst <= 1e-6 && grid_mismatch == 0 && not_contained == 0,
          fmt("%d instances (100 2-D, 100 3-D): max support gap %.2e (tol 1e-6), "
              "grid membership mismatches %d, (P - Q) + Q not in P: %d",
              instances, worst, grid_mismatch, not_contained)};
}

// 9. Region area against ε_f.
Outcome epsf_monotonicity() {
  const std::vector<double> grid = {0.0, 0.01, 0.05, 0.1, 0.2, 0.4};
  const auto rows = epsf_sweep(box_config(std::nullopt), grid, g_jobs);
  bool monotone = true, strict = false;
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << fmt("%.2f:%.3f ", rows[i].eps_f, rows[i].area);
    if (i == 0) continue;
    const double d = rows[i].area - rows[i - 1].area;
    if (d < -1e-9) monotone = false;
    if (d > 1e-6) strict = true;
  }
  return {monotone && strict,
          "areas " + os.str() + fmt("; non-decreasing %s, strict increase %s",
                                     monotone ? "yes" : "no", strict ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"flagship violation rate", flagship_violation},
      {"feasible-region ratios and containment", region_ratios},
      {"recursive feasibility", recursive_feasibility},
      {"candidate feasibility", candidate_feasibility},
      {"average-cost bound", average_cost_bound},
      {"terminal equivalence", terminal_equivalence},
      {"tightening cross-validation", tightening_cross_validation},
      {"polytope oracle suite", polytope_oracles},
      {"eps_f sweep monotonicity", epsf_monotonicity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--jobs" && i + 1 < argc) {
      g_jobs = static_cast<unsigned>(std::stoul(argv[++i]));
    } else {
      selected.insert(std::stoi(arg));
    }
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " ("
              << criteria[i].first << "): " << o.detail << fmt(" [%.1f s]", secs)
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
