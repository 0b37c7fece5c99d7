#include "smpc/study.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

namespace smpc {
namespace {

namespace fs = std::filesystem;

Json scalar_config() {
  return Json::parse(R"({
    "system": {"A": [[1.1]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]], "T": 3},
    "constraints": {"H": [[1.0], [-1.0]], "h": [2.0, 2.0], "eps": 0.2,
                    "G": [[1.0], [-1.0]], "g": [1.0, 1.0]},
    "disturbance": {"kind": "uniform_box", "lower": [-0.1], "upper": [0.1]},
    "simulation": {"runs": 20, "steps": 10}
  })");
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::kBadParams;
}

TEST(Fnv1a, MatchesPublishedVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(PolytopeJson, RoundTripIsBitExact) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  MatrixXd H(6, 3);
  VectorXd h(6);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < 6; ++i) h(i) = 1.0 + std::abs(g(rng)) / 3.0;
  const Polytope P(H, h);
  const Json j = Json::parse(polytope_to_json(P).dump());
  const Polytope Q = polytope_from_json(j);
  EXPECT_EQ(Q.normals(), P.normals());
  EXPECT_EQ(Q.offsets(), P.offsets());
}

TEST(PolytopeJson, RejectsMismatchedRows) {
  const Json j = Json::parse(R"({"H": [[1.0], [-1.0]], "h": [1.0]})");
  EXPECT_EQ(code_of([&] { polytope_from_json(j); }), Errc::kSchema);
}

TEST(ScheduleJson, RoundTripIsBitExact) {
  TighteningSchedule s;
  s.eta = {Eigen::Vector2d(0.1 / 3.0, 2.0 / 7.0), Eigen::Vector2d(1e-17, 1.0 / 9.0)};
  s.mu = {Eigen::Vector2d(0.2, 0.2), Eigen::Vector2d(std::nextafter(0.2, 0.0), 0.19)};
  s.terminal = Polytope::box(Eigen::Vector2d(-1.0 / 3.0, -2.0), Eigen::Vector2d(0.5, 1.0));
  s.terminal_constraint = Polytope::box(2, 3.0);
  s.eta_f = s.terminal.offsets() * 0.9;
  s.variant = "mixed";
  s.eps_f = 0.05;
  s.certificates = {{47066, 9457, 1e-4, 0.19, 0.21}};
  s.seed = 18446744073709551615ULL;
  s.terminal_iterations = 4;
  const Json j = schedule_to_json(s);
  const TighteningSchedule r = schedule_from_json(Json::parse(j.dump()));
  ASSERT_EQ(r.horizon(), 2);
  for (int l = 0; l < 2; ++l) {
    EXPECT_EQ(r.eta[l], s.eta[l]);
    EXPECT_EQ(r.mu[l], s.mu[l]);
  }
  EXPECT_EQ(r.eta_f, s.eta_f);
  EXPECT_EQ(r.seed, s.seed);
  EXPECT_EQ(r.certificates.at(0).samples, 47066);
  EXPECT_EQ(schedule_to_json(r).dump(), j.dump());
}

TEST(ScheduleJson, RejectsUnknownVariant) {
  TighteningSchedule s;
  s.eta = {VectorXd::Ones(1)};
  s.mu = {VectorXd::Ones(1)};
  s.terminal = Polytope::box(1, 1.0);
  s.terminal_constraint = s.terminal;
  s.eta_f = s.terminal.offsets();
  Json j = schedule_to_json(s);
  j["variant"] = "bogus";
  EXPECT_EQ(code_of([&] { schedule_from_json(j); }), Errc::kSchema);
}

TEST(StudyConfig, FillsDefaultsAndHashesCanonicalForm) {
  const StudyConfig a = parse_study(scalar_config());
  EXPECT_EQ(a.problem.scheme, Scheme::kProposed);
  EXPECT_FALSE(a.problem.eps_f.has_value());
  EXPECT_EQ(a.problem.constraints.eps, VectorXd::Constant(2, 0.2));
  EXPECT_EQ(a.canonical["sampling"]["method"], "sampled");
  EXPECT_EQ(a.canonical["system"]["Bw"], Json::parse("[[1.0]]"));
  EXPECT_EQ(a.hash, fnv1a(a.canonical.dump()));
  EXPECT_EQ(a.hash_hex().size(), 16u);

  // Re-parsing the canonical form is a fixed point.
  const StudyConfig b = parse_study(a.canonical);
  EXPECT_EQ(b.hash, a.hash);
  EXPECT_EQ(b.canonical, a.canonical);
}

TEST(StudyConfig, HashTracksEverySetting) {
  const StudyConfig a = parse_study(scalar_config());
  const StudyConfig b = with_overrides(a, Json::parse(R"({"simulation": {"seed": 2}})"));
  const StudyConfig c = with_overrides(a, Json::parse(R"({"scheme": "robust"})"));
  EXPECT_NE(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
  EXPECT_EQ(c.problem.scheme, Scheme::kRobust);
  EXPECT_EQ(b.simulation.seed, 2u);
}

TEST(StudyConfig, SchemaViolationsAreReported) {
  auto with = [](const char* patch) {
    Json j = scalar_config();
    j.merge_patch(Json::parse(patch));
    return j;
  };
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"bogus": 1})")); }), Errc::kSchema);
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"constraints": {"eps": 1.5}})")); }),
            Errc::kSchema);
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"scheme": "nominal"})")); }), Errc::kSchema);
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"system": {"A": [[1.0, 2.0]]}})")); }),
            Errc::kSchema);
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"system": {"T": 0}})")); }), Errc::kSchema);
  EXPECT_EQ(code_of([&] { parse_study(with(R"({"simulation": {"x0": [1.0, 2.0]}})")); }),
            Errc::kSchema);
  EXPECT_EQ(code_of([&] {
              parse_study(with(R"({"disturbance": {"kind": "empirical", "lower": null,
                                   "upper": null, "file": "missing.csv"}})"),
                          fs::temp_directory_path());
            }),
            Errc::kIo);
}

TEST(StudyConfig, EmpiricalSamplesAreInlined) {
  const fs::path dir = fs::temp_directory_path() / "smpc_study_test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "w.csv");
    out << "0.05\r\n-0.05\n0.02\n\n-0.01\n";
  }
  Json j = scalar_config();
  j["disturbance"] = {{"kind", "empirical"}, {"file", "w.csv"}};
  const StudyConfig st = parse_study(j, dir);
  EXPECT_EQ(st.problem.model().kind(), DisturbanceKind::kEmpirical);
  EXPECT_EQ(st.problem.model().samples().rows(), 4);
  EXPECT_FALSE(st.canonical["disturbance"].contains("file"));
  EXPECT_EQ(st.canonical["disturbance"]["samples"].size(), 4u);
  fs::remove_all(dir);
}

TEST(StudyCommands, ZeroDisturbanceEchoesRawBounds) {
  Json j = scalar_config();
  j["disturbance"] = {{"kind", "uniform_box"}, {"lower", {0.0}}, {"upper", {0.0}}};
  const StudyConfig st = parse_study(j);
  const TighteningSchedule s = study_schedule(st);
  for (const VectorXd& eta : s.eta) EXPECT_EQ(eta, st.problem.constraints.h);
  for (const VectorXd& mu : s.mu) EXPECT_EQ(mu, st.problem.constraints.g);
}

TEST(StudyCommands, ZeroDisturbanceRunInsideTerminalSetIsLqr) {
  Json j = scalar_config();
  j["disturbance"] = {{"kind", "uniform_box"}, {"lower", {0.0}}, {"upper", {0.0}}};
  j["simulation"] = {{"runs", 1}, {"steps", 12}, {"x0", {0.3}}};
  const StudyConfig st = parse_study(j);
  const SetPipelineResult sets = study_sets(st, study_schedule(st));
  ASSERT_TRUE(sets.Xf.contains_point(*st.simulation.x0));
  const SimulationOutput out = study_simulate(st, sets, 1);
  ASSERT_EQ(out.traces.size(), 1u);
  const LtiSystem& sys = st.problem.sys;
  double x = 0.3;
  for (const TraceStep& step : out.traces[0].steps) {
    EXPECT_NEAR(step.x(0), x, 1e-9);
    if (step.u.size() == 0) break;
    const double u = sets.gains.K(0, 0) * x;
    EXPECT_NEAR(step.u(0), u, 1e-9);
    x = sys.A(0, 0) * x + sys.B(0, 0) * u;
  }
  EXPECT_EQ(out.report["infeasible_steps"], 0);
}

TEST(StudyCommands, BundleRoundTripPreservesSets) {
  const StudyConfig st = parse_study(scalar_config());
  const SetPipelineResult r = study_sets(st, study_schedule(st));
  const Json j = bundle_to_json(r);
  const SetPipelineResult back = bundle_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.region.normals(), r.region.normals());
  EXPECT_EQ(back.region.offsets(), r.region.offsets());
  EXPECT_EQ(back.gains.K, r.gains.K);
  EXPECT_EQ(back.first_step.has_value(), r.first_step.has_value());
  EXPECT_EQ(bundle_to_json(back).dump(), j.dump());
  EXPECT_EQ(j["sets"]["Xf"]["stage"], "terminal");
  EXPECT_EQ(j["sets"]["Xf"]["iterations"], r.xf_iterations);
}

TEST(StudyCommands, ScheduleOfAnotherSchemeIsRejected) {
  const StudyConfig st = parse_study(scalar_config());
  const TighteningSchedule plain = study_schedule(st);
  const StudyConfig robust = with_overrides(st, Json::parse(R"({"scheme": "robust"})"));
  EXPECT_EQ(code_of([&] { study_sets(robust, plain); }), Errc::kSchema);
}

TEST(StudyCommands, SimulationIsIndependentOfThreadCount) {
  const StudyConfig st = parse_study(scalar_config());
  const SetPipelineResult sets = study_sets(st, study_schedule(st));
  const SimulationOutput a = study_simulate(st, sets, 1);
  const SimulationOutput b = study_simulate(st, sets, 4);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.report["config_hash"], st.hash_hex());
  EXPECT_EQ(a.report["runs"], 20);
}

TEST(StudyCommands, RegionsReportContainmentAndRatios) {
  const StudyConfig st = parse_study(scalar_config());
  const Json r = study_regions(st, 2);
  ASSERT_EQ(r["regions"].size(), 3u);
  EXPECT_TRUE(r["containment"]["robust_in_tube"].get<bool>());
  EXPECT_TRUE(r["containment"]["tube_in_proposed"].get<bool>());
  EXPECT_GE(r["ratios"]["proposed/robust"].get<double>(), 1.0);
}

}  // namespace
}  // namespace smpc
