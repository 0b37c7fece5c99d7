#include "smpc/study.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace smpc {

namespace fs = std::filesystem;

namespace {

constexpr double kContainmentTol = 1e-7;

void check_keys(const Json& obj, std::initializer_list<const char*> allowed,
                const std::string& what) {
  require(obj.is_object(), Errc::kSchema, what + " must be an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!names.count(key)) fail(Errc::kSchema, "unknown key '" + key + "' in " + what);
  }
}

const Json& field(const Json& obj, const char* key, const std::string& what) {
  auto it = obj.find(key);
  require(it != obj.end(), Errc::kSchema, what + "." + key + " is required");
  return *it;
}

template <class T>
T value_or(const Json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  return it->get<T>();
}

double number(const Json& j, const std::string& what) {
  require(j.is_number(), Errc::kSchema, what + " must be a number");
  return j.get<double>();
}

std::uint64_t unsigned_number(const Json& j, const std::string& what) {
  require(j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0),
          Errc::kSchema, what + " must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

int positive_int(const Json& j, const std::string& what, int min = 1) {
  require(j.is_number_integer(), Errc::kSchema, what + " must be an integer");
  const std::int64_t v = j.get<std::int64_t>();
  require(v >= min && v <= 100000000, Errc::kSchema, what + " is out of range");
  return static_cast<int>(v);
}

TighteningMethod method_from_string(std::string_view s) {
  if (s == "sampled") return TighteningMethod::kSampled;
  if (s == "convolution") return TighteningMethod::kConvolution;
  if (s == "worst_case") return TighteningMethod::kWorstCase;
  fail(Errc::kSchema, "unknown tightening method '" + std::string(s) + "'");
}

DisturbanceMode mode_from_string(std::string_view s) {
  if (s == "model") return DisturbanceMode::kModel;
  if (s == "vertices") return DisturbanceMode::kVertices;
  if (s == "mixed") return DisturbanceMode::kMixed;
  if (s == "zero") return DisturbanceMode::kZero;
  fail(Errc::kSchema, "unknown disturbance mode '" + std::string(s) + "'");
}

MatrixXd read_samples_csv(const fs::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), Errc::kIo, "cannot read " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        require(cell.find_first_not_of(" \t", used) == std::string::npos,
                Errc::kSchema, "");
      } catch (const std::exception&) {
        fail(Errc::kSchema, "non-numeric cell '" + cell + "' in " + file.string());
      }
    }
    require(rows.empty() || row.size() == rows.front().size(), Errc::kSchema,
            "ragged rows in " + file.string());
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), Errc::kSchema, file.string() + " holds no samples");
  MatrixXd M(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return M;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json parse_system(const Json& j, LtiSystem& sys) {
  check_keys(j, {"A", "B", "Bw", "Q", "R", "T"}, "system");
  sys.A = matrix_from_json(field(j, "A", "system"), "system.A");
  sys.B = matrix_from_json(field(j, "B", "system"), "system.B");
  sys.Bw = j.contains("Bw") ? matrix_from_json(j["Bw"], "system.Bw")
                            : MatrixXd::Identity(sys.A.rows(), sys.A.rows());
  sys.Q = matrix_from_json(field(j, "Q", "system"), "system.Q");
  sys.R = matrix_from_json(field(j, "R", "system"), "system.R");
  sys.T = positive_int(field(j, "T", "system"), "system.T");
  sys.validate();
  return {{"A", matrix_to_json(sys.A)}, {"B", matrix_to_json(sys.B)},
          {"Bw", matrix_to_json(sys.Bw)}, {"Q", matrix_to_json(sys.Q)},
          {"R", matrix_to_json(sys.R)}, {"T", sys.T}};
}

Json parse_constraints(const Json& j, ConstraintSpec& c) {
  check_keys(j, {"H", "h", "eps", "G", "g", "eps_u", "eps_terminal"}, "constraints");
  c.H = matrix_from_json(field(j, "H", "constraints"), "constraints.H");
  c.h = vector_from_json(field(j, "h", "constraints"), "constraints.h");
  const Json& eps = field(j, "eps", "constraints");
  c.eps = eps.is_number() ? VectorXd::Constant(c.h.size(), eps.get<double>())
                          : vector_from_json(eps, "constraints.eps");
  c.G = matrix_from_json(field(j, "G", "constraints"), "constraints.G");
  c.g = vector_from_json(field(j, "g", "constraints"), "constraints.g");
  if (j.contains("eps_u")) c.eps_u = number(j["eps_u"], "constraints.eps_u");
  if (j.contains("eps_terminal")) {
    c.eps_terminal = number(j["eps_terminal"], "constraints.eps_terminal");
  }
  return {{"H", matrix_to_json(c.H)}, {"h", vector_to_json(c.h)},
          {"eps", vector_to_json(c.eps)}, {"G", matrix_to_json(c.G)},
          {"g", vector_to_json(c.g)}, {"eps_u", c.eps_u},
          {"eps_terminal", c.eps_terminal}};
}

Json parse_disturbance(const Json& j, const fs::path& base, std::uint64_t seed,
                       std::optional<DisturbanceModel>& out) {
  require(j.is_object(), Errc::kSchema, "disturbance must be an object");
  const std::string kind = field(j, "kind", "disturbance").get<std::string>();
  if (kind == "truncated_gaussian") {
    check_keys(j, {"kind", "covariance", "radius_squared", "support_facets"},
               "disturbance");
    const MatrixXd cov =
        matrix_from_json(field(j, "covariance", "disturbance"), "disturbance.covariance");
    const double r2 =
        number(field(j, "radius_squared", "disturbance"), "disturbance.radius_squared");
    const int facets = j.contains("support_facets")
                           ? positive_int(j["support_facets"], "disturbance.support_facets", 3)
                           : 8;
    out = DisturbanceModel::truncated_gaussian(cov, r2, facets, seed);
    return {{"kind", kind}, {"covariance", matrix_to_json(cov)},
            {"radius_squared", r2}, {"support_facets", facets}};
  }
  if (kind == "uniform_box") {
    check_keys(j, {"kind", "lower", "upper"}, "disturbance");
    const VectorXd lo = vector_from_json(field(j, "lower", "disturbance"), "disturbance.lower");
    const VectorXd hi = vector_from_json(field(j, "upper", "disturbance"), "disturbance.upper");
    out = DisturbanceModel::uniform_box(lo, hi, seed);
    return {{"kind", kind}, {"lower", vector_to_json(lo)}, {"upper", vector_to_json(hi)}};
  }
  if (kind == "uniform_polytope") {
    check_keys(j, {"kind", "H", "h"}, "disturbance");
    const Polytope P = polytope_from_json(j, "disturbance");
    out = DisturbanceModel::uniform_polytope(P, seed);
    return {{"kind", kind}, {"H", matrix_to_json(P.normals())},
            {"h", vector_to_json(P.offsets())}};
  }
  if (kind == "empirical") {
    check_keys(j, {"kind", "file", "samples", "margin"}, "disturbance");
    require(j.contains("file") != j.contains("samples"), Errc::kSchema,
            "empirical disturbance needs exactly one of file and samples");
    MatrixXd samples;
    if (j.contains("file")) {
      fs::path file = j["file"].get<std::string>();
      if (file.is_relative()) file = base / file;
      require(fs::exists(file), Errc::kIo, "sample file " + file.string() + " does not exist");
      samples = read_samples_csv(file);
    } else {
      samples = matrix_from_json(j["samples"], "disturbance.samples");
    }
    const double margin = j.contains("margin") ? number(j["margin"], "disturbance.margin") : 0.0;
    out = DisturbanceModel::empirical(samples, margin, seed);
    return {{"kind", kind}, {"samples", matrix_to_json(samples)}, {"margin", margin}};
  }
  fail(Errc::kSchema, "unknown disturbance kind '" + kind + "'");
}

StudyConfig parse_impl(const Json& j, const fs::path& base) {
  check_keys(j,
             {"name", "system", "constraints", "disturbance", "scheme", "eps_f",
              "sampling", "tolerances", "simulation", "sweep", "region"},
             "config");
  StudyConfig st;
  ProblemConfig& cfg = st.problem;
  Json c;
  if (j.contains("name")) c["name"] = j["name"].get<std::string>();
  c["system"] = parse_system(field(j, "system", "config"), cfg.sys);
  c["constraints"] = parse_constraints(field(j, "constraints", "config"), cfg.constraints);

  const Json sampling = j.value("sampling", Json::object());
  check_keys(sampling, {"beta", "bracket", "seed", "method"}, "sampling");
  if (sampling.contains("beta")) cfg.sampling.beta = number(sampling["beta"], "sampling.beta");
  if (sampling.contains("bracket")) {
    const VectorXd b = vector_from_json(sampling["bracket"], "sampling.bracket");
    require(b.size() == 2, Errc::kSchema, "sampling.bracket must hold two factors");
    cfg.sampling.bracket_low = b(0);
    cfg.sampling.bracket_high = b(1);
  }
  if (sampling.contains("seed")) {
    cfg.sampling.seed = unsigned_number(sampling["seed"], "sampling.seed");
  }
  cfg.method = method_from_string(value_or<std::string>(sampling, "method", "sampled"));
  require(cfg.method != TighteningMethod::kWorstCase, Errc::kSchema,
          "sampling.method must be sampled or convolution");
  c["sampling"] = {{"beta", cfg.sampling.beta},
                   {"bracket", {cfg.sampling.bracket_low, cfg.sampling.bracket_high}},
                   {"seed", cfg.sampling.seed},
                   {"method", std::string(to_string(cfg.method))}};

  c["disturbance"] = parse_disturbance(field(j, "disturbance", "config"), base,
                                       cfg.sampling.seed, cfg.disturbance);
  cfg.scheme = scheme_from_string(value_or<std::string>(j, "scheme", "proposed"));
  c["scheme"] = std::string(to_string(cfg.scheme));
  if (j.contains("eps_f") && !j["eps_f"].is_null()) {
    cfg.eps_f = number(j["eps_f"], "eps_f");
    c["eps_f"] = *cfg.eps_f;
  } else {
    c["eps_f"] = nullptr;
  }

  const Json tol = j.value("tolerances", Json::object());
  check_keys(tol,
             {"set_equality", "terminal_cap", "control_invariant_cap", "mrpi_cap",
              "mrpi_eps", "mrpi_facets", "confidence_samples"},
             "tolerances");
  FixedPointSettings& fp = cfg.fixed_point;
  if (tol.contains("set_equality")) {
    fp.equality_tol = number(tol["set_equality"], "tolerances.set_equality");
    require(fp.equality_tol > 0.0, Errc::kSchema, "tolerances.set_equality must be positive");
  }
  if (tol.contains("terminal_cap")) fp.terminal_cap = positive_int(tol["terminal_cap"], "tolerances.terminal_cap");
  if (tol.contains("control_invariant_cap")) {
    fp.control_invariant_cap =
        positive_int(tol["control_invariant_cap"], "tolerances.control_invariant_cap");
  }
  if (tol.contains("mrpi_cap")) fp.mrpi_cap = positive_int(tol["mrpi_cap"], "tolerances.mrpi_cap");
  if (tol.contains("mrpi_eps")) cfg.mrpi_eps = number(tol["mrpi_eps"], "tolerances.mrpi_eps");
  if (tol.contains("mrpi_facets")) {
    cfg.mrpi_facets = positive_int(tol["mrpi_facets"], "tolerances.mrpi_facets", 0);
  }
  if (tol.contains("confidence_samples")) {
    cfg.confidence_samples =
        positive_int(tol["confidence_samples"], "tolerances.confidence_samples", 100);
  }
  c["tolerances"] = {{"set_equality", fp.equality_tol},
                     {"terminal_cap", fp.terminal_cap},
                     {"control_invariant_cap", fp.control_invariant_cap},
                     {"mrpi_cap", fp.mrpi_cap},
                     {"mrpi_eps", cfg.mrpi_eps},
                     {"mrpi_facets", cfg.mrpi_facets},
                     {"confidence_samples", cfg.confidence_samples}};

  const Json sim = j.value("simulation", Json::object());
  check_keys(sim,
             {"x0", "runs", "steps", "seed", "mode", "window", "burn_in",
              "conditional_stride", "conditional_draws", "eps2", "k_prime"},
             "simulation");
  SimulationSettings& s = st.simulation;
  if (sim.contains("x0") && !sim["x0"].is_null()) {
    s.x0 = vector_from_json(sim["x0"], "simulation.x0");
    require(s.x0->size() == cfg.sys.n(), Errc::kSchema,
            "simulation.x0 must have the state dimension");
  }
  if (sim.contains("runs")) s.runs = positive_int(sim["runs"], "simulation.runs");
  if (sim.contains("steps")) s.steps = positive_int(sim["steps"], "simulation.steps");
  if (sim.contains("seed")) s.seed = unsigned_number(sim["seed"], "simulation.seed");
  s.mode = mode_from_string(value_or<std::string>(sim, "mode", "model"));
  if (sim.contains("window")) {
    const Json& w = sim["window"];
    require(w.is_array() && w.size() == 2, Errc::kSchema,
            "simulation.window must be [first, last]");
    s.window_first = positive_int(w[0], "simulation.window", 0);
    s.window_last = positive_int(w[1], "simulation.window", 0);
    require(s.window_first <= s.window_last, Errc::kSchema, "simulation.window is reversed");
  }
  if (sim.contains("burn_in")) s.burn_in = positive_int(sim["burn_in"], "simulation.burn_in", 0);
  if (sim.contains("conditional_stride")) {
    s.conditional_stride = positive_int(sim["conditional_stride"], "simulation.conditional_stride");
  }
  if (sim.contains("conditional_draws")) {
    s.conditional_draws = positive_int(sim["conditional_draws"], "simulation.conditional_draws", 0);
  }
  if (sim.contains("eps2")) {
    s.eps2 = number(sim["eps2"], "simulation.eps2");
    require(s.eps2 > 0.0, Errc::kSchema, "simulation.eps2 must be positive");
  }
  if (sim.contains("k_prime")) {
    require(sim["k_prime"].is_array(), Errc::kSchema, "simulation.k_prime must be an array");
    s.k_prime.clear();
    for (const Json& k : sim["k_prime"]) s.k_prime.push_back(positive_int(k, "simulation.k_prime", 0));
  }
  c["simulation"] = {{"x0", s.x0 ? vector_to_json(*s.x0) : Json(nullptr)},
                     {"runs", s.runs},
                     {"steps", s.steps},
                     {"seed", s.seed},
                     {"mode", std::string(to_string(s.mode))},
                     {"window", {s.window_first, s.window_last}},
                     {"burn_in", s.burn_in},
                     {"conditional_stride", s.conditional_stride},
                     {"conditional_draws", s.conditional_draws},
                     {"eps2", s.eps2},
                     {"k_prime", s.k_prime}};

  const Json sweep = j.value("sweep", Json::object());
  check_keys(sweep, {"eps_f_grid"}, "sweep");
  if (sweep.contains("eps_f_grid")) {
    const VectorXd g = vector_from_json(sweep["eps_f_grid"], "sweep.eps_f_grid");
    require(g.size() > 0, Errc::kSchema, "sweep.eps_f_grid is empty");
    st.sweep_grid.assign(g.data(), g.data() + g.size());
    for (double e : st.sweep_grid) {
      require(e >= 0.0 && e < 1.0, Errc::kSchema, "sweep.eps_f_grid entries must lie in [0, 1)");
    }
  }
  c["sweep"] = {{"eps_f_grid", st.sweep_grid}};

  const Json region = j.value("region", Json::object());
  check_keys(region, {"schemes"}, "region");
  if (region.contains("schemes")) {
    require(region["schemes"].is_array() && !region["schemes"].empty(), Errc::kSchema,
            "region.schemes must be a nonempty array");
    st.region_schemes.clear();
    for (const Json& name : region["schemes"]) {
      st.region_schemes.push_back(scheme_from_string(name.get<std::string>()));
    }
  }
  Json names = Json::array();
  for (Scheme sc : st.region_schemes) names.push_back(std::string(to_string(sc)));
  c["region"] = {{"schemes", names}};

  cfg.validate();
  st.canonical = std::move(c);
  st.hash = fnv1a(st.canonical.dump());
  return st;
}

Json proportion_json(const Proportion& p) {
  return {{"estimate", p.estimate}, {"low", p.low}, {"high", p.high},
          {"hits", p.hits}, {"trials", p.trials}, {"standard_error", p.standard_error()}};
}

Json mean_json(const MeanEstimate& m) {
  return {{"mean", m.mean}, {"standard_error", m.standard_error}, {"low", m.low},
          {"high", m.high}, {"count", m.count}};
}

Json set_json(const Polytope& P, const std::string& stage, int iterations) {
  Json j = polytope_to_json(P);
  j["stage"] = stage;
  j["iterations"] = iterations;
  j["tolerances"] = {{"set_equality", kSetEqualityTol}, {"redundancy", kRedundancyTol}};
  return j;
}

Json region_json(const Polytope& region) {
  Json j;
  if (region.dim() == 2) {
    const RegionEstimate e = exact_region(region);
    Json verts = Json::array();
    for (const VectorXd& v : e.vertices) verts.push_back(vector_to_json(v));
    j = {{"method", e.method}, {"area", e.area}, {"vertices", verts}};
  } else if (region.dim() == 1) {
    const auto [lo, hi] = bounding_box(region);
    j = {{"method", "exact_1d"}, {"area", hi(0) - lo(0)},
         {"vertices", {lo(0), hi(0)}}};
  } else {
    const auto [lo, hi] = bounding_box(region);
    const RegionEstimate e = hit_or_miss_region(region, lo, hi, 200000, 1);
    j = {{"method", e.method}, {"area", e.area}, {"samples", e.samples},
         {"standard_error", e.standard_error}};
  }
  return j;
}

void check_schedule_matches(const StudyConfig& study, const TighteningSchedule& s) {
  const ProblemConfig& cfg = study.problem;
  require(s.horizon() == cfg.sys.T, Errc::kSchema, "schedule horizon differs from system.T");
  switch (cfg.scheme) {
    case Scheme::kRobust:
      require(s.variant == "robust", Errc::kSchema, "schedule was not built for the robust scheme");
      break;
    case Scheme::kTube:
      require(s.variant == "mixed" && s.eps_f == 0.0, Errc::kSchema,
              "schedule was not built for the tube scheme");
      break;
    case Scheme::kProposed:
      if (cfg.eps_f) {
        require(s.variant == "mixed" && s.eps_f == *cfg.eps_f, Errc::kSchema,
                "schedule ε_f differs from the configuration");
      } else {
        require(s.variant == "plain", Errc::kSchema, "configuration expects a plain schedule");
      }
      break;
  }
}

}  // namespace

std::string StudyConfig::hash_hex() const { return hex(hash); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

StudyConfig parse_study(const Json& j, const fs::path& base_dir) {
  try {
    return parse_impl(j, base_dir);
  } catch (const Json::exception& e) {
    fail(Errc::kSchema, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kIo || e.code() == Errc::kSchema) throw;
    throw Error(Errc::kSchema, e.what());
  }
}

StudyConfig load_study(const fs::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), Errc::kIo, "cannot read " + file.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(Errc::kSchema, file.string() + ": " + e.what());
  }
  return parse_study(j, file.parent_path());
}

StudyConfig with_overrides(const StudyConfig& study, const Json& patch) {
  require(patch.is_object(), Errc::kSchema, "override patch must be an object");
  Json j = study.canonical;
  j.merge_patch(patch);
  return parse_study(j);
}

Json matrix_to_json(const MatrixXd& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), Errc::kSchema, what + " must be a nonempty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  require(cols > 0, Errc::kSchema, what + " rows must be nonempty arrays");
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array() && j[i].size() == cols, Errc::kSchema, what + " is ragged");
    for (std::size_t k = 0; k < cols; ++k) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = number(j[i][k], what);
    }
  }
  return M;
}

VectorXd vector_from_json(const Json& j, const std::string& what) {
  require(j.is_array(), Errc::kSchema, what + " must be an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  }
  return v;
}

Json polytope_to_json(const Polytope& P) {
  Json H = Json::array();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    H.push_back(vector_to_json(P.normals().row(i).transpose()));
  }
  return {{"H", H}, {"h", vector_to_json(P.offsets())}, {"dim", P.dim()}};
}

Polytope polytope_from_json(const Json& j, const std::string& what) {
  require(j.is_object(), Errc::kSchema, what + " must be an object");
  const VectorXd h = vector_from_json(field(j, "h", what), what + ".h");
  const Json& Hj = field(j, "H", what);
  if (h.size() == 0) {
    const Eigen::Index dim = j.contains("dim") ? j["dim"].get<Eigen::Index>() : 0;
    require(dim > 0, Errc::kSchema, what + " without rows needs a positive dim");
    return Polytope::universe(dim);
  }
  const MatrixXd H = matrix_from_json(Hj, what + ".H");
  require(H.rows() == h.size(), Errc::kSchema, what + ": H and h differ in rows");
  if (j.contains("dim")) {
    require(j["dim"].get<Eigen::Index>() == H.cols(), Errc::kSchema, what + ": dim mismatch");
  }
  return Polytope(H, h);
}

Json schedule_to_json(const TighteningSchedule& s) {
  Json eta = Json::array();
  for (const VectorXd& e : s.eta) eta.push_back(vector_to_json(e));
  Json mu = Json::array();
  for (const VectorXd& m : s.mu) mu.push_back(vector_to_json(m));
  Json certs = Json::array();
  for (const SampledQuantileCertificate& c : s.certificates) {
    certs.push_back({{"samples", c.samples}, {"discard", c.discard}, {"beta", c.beta},
                     {"eps_l", c.eps_l}, {"eps_u", c.eps_u}});
  }
  return {{"eta", eta},
          {"mu", mu},
          {"eta_f", vector_to_json(s.eta_f)},
          {"variant", s.variant},
          {"eps_f", s.eps_f},
          {"method", std::string(to_string(s.method))},
          {"certificate", {{"entries", certs}}},
          {"seed", s.seed},
          {"terminal", polytope_to_json(s.terminal)},
          {"terminal_constraint", polytope_to_json(s.terminal_constraint)},
          {"terminal_iterations", s.terminal_iterations},
          {"terminal_maximal", s.terminal_maximal}};
}

TighteningSchedule schedule_from_json(const Json& j) {
  try {
    require(j.is_object(), Errc::kSchema, "schedule must be an object");
    TighteningSchedule s;
    for (const Json& e : field(j, "eta", "schedule")) s.eta.push_back(vector_from_json(e, "schedule.eta"));
    for (const Json& m : field(j, "mu", "schedule")) s.mu.push_back(vector_from_json(m, "schedule.mu"));
    require(!s.eta.empty() && s.eta.size() == s.mu.size(), Errc::kSchema,
            "schedule.eta and schedule.mu must have the horizon length");
    s.eta_f = vector_from_json(field(j, "eta_f", "schedule"), "schedule.eta_f");
    s.variant = field(j, "variant", "schedule").get<std::string>();
    require(s.variant == "plain" || s.variant == "mixed" || s.variant == "robust",
            Errc::kSchema, "unknown schedule variant '" + s.variant + "'");
    s.eps_f = value_or<double>(j, "eps_f", 0.0);
    s.method = method_from_string(value_or<std::string>(j, "method", "sampled"));
    if (j.contains("certificate")) {
      for (const Json& c : j["certificate"].value("entries", Json::array())) {
        s.certificates.push_back({c.at("samples").get<std::int64_t>(),
                                  c.at("discard").get<std::int64_t>(), c.at("beta").get<double>(),
                                  c.at("eps_l").get<double>(), c.at("eps_u").get<double>()});
      }
    }
    s.seed = value_or<std::uint64_t>(j, "seed", 0);
    s.terminal = polytope_from_json(field(j, "terminal", "schedule"), "schedule.terminal");
    s.terminal_constraint = polytope_from_json(field(j, "terminal_constraint", "schedule"),
                                               "schedule.terminal_constraint");
    require(s.terminal.rows() == s.eta_f.size(), Errc::kSchema,
            "schedule.eta_f must have one entry per terminal row");
    s.terminal_iterations = value_or<int>(j, "terminal_iterations", 0);
    s.terminal_maximal = value_or<bool>(j, "terminal_maximal", true);
    return s;
  } catch (const Json::exception& e) {
    fail(Errc::kSchema, std::string("schedule: ") + e.what());
  }
}

Json bundle_to_json(const SetPipelineResult& r) {
  Json sets = {{"Xf_tilde", set_json(r.Xf_tilde, "terminal_constraint", 0)},
               {"Xf", set_json(r.Xf, "terminal", r.xf_iterations)},
               {"Zf", set_json(r.Zf, "tightened_terminal", 0)},
               {"Xinf", set_json(r.Xinf, "mrpi", r.mrpi_terms)},
               {"CT", set_json(r.CT, "t_step", 0)},
               {"Cinf", set_json(r.Cinf, r.scheme == Scheme::kRobust ? "robust_feasible"
                                                                     : "control_invariant",
                                 r.cinf_iterations)},
               {"region", set_json(r.region, "feasible_region", 0)}};
  if (r.first_step) sets["first_step"] = set_json(*r.first_step, "first_step", 0);
  if (r.tube) sets["tube"] = set_json(*r.tube, "tube", 0);
  if (r.initial) sets["initial"] = set_json(*r.initial, "initial", 0);
  Json log = Json::array({
      Json{{"stage", "terminal"}, {"iterations", r.xf_iterations}, {"converged", r.xf_maximal}},
      Json{{"stage", "mrpi"}, {"iterations", r.mrpi_terms}, {"converged", r.mrpi_invariant}},
      Json{{"stage", "control_invariant"}, {"iterations", r.cinf_iterations}, {"converged", true}},
  });
  return {{"scheme", std::string(to_string(r.scheme))},
          {"gains", {{"K", matrix_to_json(r.gains.K)},
                     {"P", matrix_to_json(r.gains.P)},
                     {"Acl", matrix_to_json(r.gains.Acl)},
                     {"spectral_radius", r.gains.spectral_radius}}},
          {"schedule", schedule_to_json(r.schedule)},
          {"sets", sets},
          {"diagnostics", {{"xf_iterations", r.xf_iterations},
                           {"xf_maximal", r.xf_maximal},
                           {"cinf_iterations", r.cinf_iterations},
                           {"mrpi_terms", r.mrpi_terms},
                           {"mrpi_invariant", r.mrpi_invariant},
                           {"terminal_margin", r.terminal_margin},
                           {"zf_in_zt", r.zf_in_zt}}},
          {"log", log},
          {"warnings", r.warnings}};
}

SetPipelineResult bundle_from_json(const Json& j) {
  try {
    require(j.is_object(), Errc::kSchema, "set bundle must be an object");
    SetPipelineResult r;
    r.scheme = scheme_from_string(field(j, "scheme", "bundle").get<std::string>());
    const Json& g = field(j, "gains", "bundle");
    r.gains.K = matrix_from_json(field(g, "K", "gains"), "gains.K");
    r.gains.P = matrix_from_json(field(g, "P", "gains"), "gains.P");
    r.gains.Acl = matrix_from_json(field(g, "Acl", "gains"), "gains.Acl");
    r.gains.spectral_radius = value_or<double>(g, "spectral_radius", 0.0);
    r.schedule = schedule_from_json(field(j, "schedule", "bundle"));
    const Json& sets = field(j, "sets", "bundle");
    auto get = [&](const char* name) {
      return polytope_from_json(field(sets, name, "sets"), std::string("sets.") + name);
    };
    r.Xf_tilde = get("Xf_tilde");
    r.Xf = get("Xf");
    r.Zf = get("Zf");
    r.Xinf = get("Xinf");
    r.CT = get("CT");
    r.Cinf = get("Cinf");
    r.region = get("region");
    if (sets.contains("first_step")) r.first_step = get("first_step");
    if (sets.contains("tube")) r.tube = get("tube");
    if (sets.contains("initial")) r.initial = get("initial");
    const Json d = j.value("diagnostics", Json::object());
    r.xf_iterations = value_or<int>(d, "xf_iterations", 0);
    r.xf_maximal = value_or<bool>(d, "xf_maximal", true);
    r.cinf_iterations = value_or<int>(d, "cinf_iterations", 0);
    r.mrpi_terms = value_or<int>(d, "mrpi_terms", 0);
    r.mrpi_invariant = value_or<bool>(d, "mrpi_invariant", false);
    r.terminal_margin = value_or<double>(d, "terminal_margin", 0.0);
    r.zf_in_zt = value_or<bool>(d, "zf_in_zt", false);
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const Json::exception& e) {
    fail(Errc::kSchema, std::string("set bundle: ") + e.what());
  }
}

TighteningSchedule study_schedule(const StudyConfig& study) {
  const ProblemConfig& cfg = study.problem;
  cfg.validate();
  const ControllerGains gains = lqr_synthesize(cfg.sys);
  const PlainQuantiles plain =
      cfg.scheme == Scheme::kRobust ? PlainQuantiles{} : plain_quantiles(cfg, gains);
  return build_schedule(cfg, gains, plain);
}

SetPipelineResult study_sets(const StudyConfig& study,
                             const TighteningSchedule& schedule) {
  check_schedule_matches(study, schedule);
  const ControllerGains gains = lqr_synthesize(study.problem.sys);
  return assemble_sets(study.problem, gains, schedule);
}

SimulationOutput study_simulate(const StudyConfig& study,
                                const SetPipelineResult& sets, unsigned jobs) {
  const ProblemConfig& cfg = study.problem;
  const SimulationSettings& s = study.simulation;
  require(sets.scheme == cfg.scheme, Errc::kSchema,
          "set bundle scheme differs from the configuration");
  std::vector<VectorXd> x0s;
  if (s.x0) {
    x0s.assign(static_cast<std::size_t>(s.runs), *s.x0);
  } else {
    x0s = sample_polytope(sets.region, static_cast<std::size_t>(s.runs), s.seed);
  }
  const ClosedLoopSimulator sim(cfg, sets);
  SimulationOptions opt;
  opt.steps = s.steps;
  opt.seed = s.seed;
  opt.mode = s.mode;
  opt.config_hash = study.hash;
  SimulationOutput out;
  out.traces = sim.run_many(x0s, opt, jobs);

  const ConstraintSpec& c = cfg.constraints;
  std::int64_t infeasible = 0, infeasible_runs = 0, cand = 0, cand_fail = 0;
  for (const ClosedLoopTrace& t : out.traces) {
    const int count = t.infeasible_count();
    infeasible += count;
    infeasible_runs += count > 0 ? 1 : 0;
    for (const TraceStep& st : t.steps) {
      if (!st.candidate_feasible) continue;
      ++cand;
      cand_fail += *st.candidate_feasible ? 0 : 1;
    }
  }
  const int last = std::min(s.window_last, s.steps);
  const int first = std::min(s.window_first, last);
  const ViolationReport v = violation_stats(out.traces, c.H, c.h, first, last);
  Json rows = Json::array();
  for (std::size_t j = 0; j < v.window_pooled.size(); ++j) {
    Json per_step = Json::array();
    for (std::size_t k = 0; k < v.per_step[j].size(); ++k) {
      Json p = proportion_json(v.per_step[j][k]);
      p["k"] = k;
      per_step.push_back(std::move(p));
    }
    rows.push_back({{"row", j},
                    {"eps", c.eps(static_cast<Eigen::Index>(j))},
                    {"window_average", v.window_average[j]},
                    {"window_pooled", proportion_json(v.window_pooled[j])},
                    {"per_step", per_step}});
  }
  Json& rep = out.report;
  rep["config_hash"] = study.hash_hex();
  rep["scheme"] = std::string(to_string(cfg.scheme));
  rep["runs"] = s.runs;
  rep["steps"] = s.steps;
  rep["seed"] = s.seed;
  rep["mode"] = std::string(to_string(s.mode));
  rep["x0"] = s.x0 ? vector_to_json(*s.x0) : Json("uniform_in_region");
  rep["infeasible_steps"] = infeasible;
  rep["infeasible_runs"] = infeasible_runs;
  rep["candidate_infeasible"] = proportion_json(wilson(cand_fail, cand));
  rep["violation"] = {{"window", {first, last}}, {"rows", rows}};
  if (!cfg.model().is_degenerate() && s.conditional_draws > 0 && last >= 1) {
    // Conditioning on x_k covers violations at k + 1 in the window.
    const int from = std::max(first - 1, 0);
    const auto cond =
        conditional_violation(cfg.sys, cfg.model(), out.traces, c.H, c.h, from, last - 1,
                              s.conditional_stride, s.conditional_draws, s.seed);
    Json cj = Json::array();
    for (const Proportion& p : cond) cj.push_back(proportion_json(p));
    rep["conditional_violation"] = {{"conditioned_steps", {from, last - 1}}, {"rows", cj}};
  }
  if (s.steps > s.burn_in) {
    rep["average_cost"] = mean_json(average_cost(out.traces, cfg.sys.Q, s.burn_in));
    rep["average_cost"]["burn_in"] = s.burn_in;
    rep["disturbance_cost_bound"] =
        mean_json(expected_disturbance_cost(cfg.model(), cfg.sys.Bw, sets.gains.P));
  }
  const ConvergenceReport conv = convergence_diagnostics(out.traces, s.eps2, s.k_prime);
  rep["convergence"] = {{"eps2", conv.eps2},
                        {"k_prime", conv.k_prime},
                        {"fraction_below", conv.fraction_below},
                        {"first_terminal_entry", conv.first_entry}};
  return out;
}

Json study_regions(const StudyConfig& study, unsigned jobs) {
  const ProblemConfig& base = study.problem;
  base.validate();
  const ControllerGains gains = lqr_synthesize(base.sys);
  const bool needs_plain =
      std::any_of(study.region_schemes.begin(), study.region_schemes.end(),
                  [](Scheme s) { return s != Scheme::kRobust; });
  const PlainQuantiles plain = needs_plain ? plain_quantiles(base, gains) : PlainQuantiles{};
  const std::vector<Scheme>& schemes = study.region_schemes;
  std::vector<Polytope> regions(schemes.size());
  parallel_for(schemes.size(), jobs, [&](std::size_t i) {
    ProblemConfig cfg = base;
    cfg.scheme = schemes[i];
    regions[i] = assemble_sets(cfg, gains, build_schedule(cfg, gains, plain)).region;
  });
  Json out;
  out["config_hash"] = study.hash_hex();
  std::map<Scheme, std::pair<Polytope, double>> by_scheme;
  Json list = Json::array();
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    Json r = region_json(regions[i]);
    r["scheme"] = std::string(to_string(schemes[i]));
    r["set"] = polytope_to_json(regions[i]);
    by_scheme[schemes[i]] = {regions[i], r["area"].get<double>()};
    list.push_back(std::move(r));
  }
  out["regions"] = list;
  auto has = [&](Scheme s) { return by_scheme.count(s) > 0; };
  const Scheme order[] = {Scheme::kRobust, Scheme::kTube, Scheme::kProposed};
  Json ratios = Json::object();
  Json containment = Json::object();
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      if (!has(order[a]) || !has(order[b])) continue;
      const std::string inner(to_string(order[a])), outer(to_string(order[b]));
      const auto& [Pa, area_a] = by_scheme[order[a]];
      const auto& [Pb, area_b] = by_scheme[order[b]];
      containment[inner + "_in_" + outer] = contains(Pb, Pa, kContainmentTol);
      ratios[outer + "/" + inner] = area_a > 0.0 ? area_b / area_a : 0.0;
    }
  }
  out["ratios"] = ratios;
  out["containment"] = containment;
  return out;
}

Json study_sweep(const StudyConfig& study, unsigned jobs) {
  const std::vector<SweepRow> rows = epsf_sweep(study.problem, study.sweep_grid, jobs);
  std::vector<SweepRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.eps_f < b.eps_f; });
  bool monotone = true, strict = false;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double d = sorted[i].area - sorted[i - 1].area;
    if (d < -1e-9 * std::max(1.0, sorted[i - 1].area)) monotone = false;
    if (d > 1e-9 * std::max(1.0, sorted[i - 1].area)) strict = true;
  }
  Json list = Json::array();
  for (const SweepRow& r : rows) {
    list.push_back({{"eps_f", r.eps_f}, {"area", r.area}, {"relative", r.relative}});
  }
  return {{"config_hash", study.hash_hex()},
          {"rows", list},
          {"non_decreasing", monotone},
          {"strict_increase", strict}};
}

Json study_report(const StudyConfig& study, unsigned jobs) {
  const SetPipelineResult sets = study_sets(study, study_schedule(study));
  const SimulationOutput sim = study_simulate(study, sets, jobs);
  const ControllerSpec spec = sets.controller_spec(study.problem);
  Json r;
  r["config_hash"] = study.hash_hex();
  r["scheme"] = std::string(to_string(sets.scheme));
  r["region"] = region_json(sets.region);
  r["diagnostics"] = bundle_to_json(sets)["diagnostics"];
  r["warnings"] = sets.warnings;
  r["lipschitz_cost_estimate"] = {
      {"value", lipschitz_cost_estimate(sets, spec, study.problem.model().support(), 200,
                                        study.simulation.seed)},
      {"note", "estimate from sampled state pairs"}};
  r["simulation"] = sim.report;
  return r;
}

std::string schedule_summary(const TighteningSchedule& s) {
  std::ostringstream os;
  os << "variant " << s.variant;
  if (s.variant == "mixed") os << " (eps_f " << s.eps_f << ")";
  os << ", method " << to_string(s.method) << ", horizon " << s.horizon() << "\n";
  for (std::size_t l = 0; l < s.eta.size(); ++l) {
    os << "  eta_" << l + 1 << " = " << s.eta[l].transpose() << "\n";
  }
  for (std::size_t l = 0; l < s.mu.size(); ++l) {
    os << "  mu_" << l << " = " << s.mu[l].transpose() << "\n";
  }
  os << "  terminal rows " << s.eta_f.size() << "\n";
  for (const SampledQuantileCertificate& c : s.certificates) {
    os << "  certificate N=" << c.samples << " r=" << c.discard << " beta=" << c.beta
       << " eps in [" << c.eps_l << ", " << c.eps_u << "]\n";
  }
  return os.str();
}

std::string sets_summary(const SetPipelineResult& r) {
  std::ostringstream os;
  os << "scheme " << to_string(r.scheme) << "\n"
     << "  Xf: " << r.Xf.rows() << " rows, " << r.xf_iterations << " iterations"
     << (r.xf_maximal ? "" : " (cap reached)") << "\n"
     << "  Xinf: " << r.Xinf.rows() << " rows, " << r.mrpi_terms << " terms"
     << (r.mrpi_invariant ? "" : " (not invariant)") << "\n"
     << "  CT: " << r.CT.rows() << " rows\n"
     << "  Cinf: " << r.Cinf.rows() << " rows, " << r.cinf_iterations << " iterations\n"
     << "  region: " << r.region.rows() << " rows";
  if (r.region.dim() == 2) os << ", area " << area_2d(r.region);
  os << "\n  terminal margin " << r.terminal_margin << "\n";
  for (const std::string& w : r.warnings) os << "  warning: " << w << "\n";
  return os.str();
}

}  // namespace smpc
