#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smpc/pipeline.hpp"
#include "smpc/sim.hpp"

namespace smpc {

using Json = nlohmann::json;

struct SimulationSettings {
  /// Common initial state; when unset, x_0 is drawn uniformly in the region.
  std::optional<VectorXd> x0;
  int runs = 100;
  int steps = 15;
  std::uint64_t seed = 1;
  DisturbanceMode mode = DisturbanceMode::kModel;
  int window_first = 1;
  int window_last = 6;
  int burn_in = 20;
  int conditional_stride = 10;
  int conditional_draws = 200;
  double eps2 = 1e-2;
  std::vector<int> k_prime = {5, 10, 20};
};

/// A parsed study configuration. `canonical` holds every setting with
/// defaults filled in and external sample files inlined; the hash is FNV-1a
/// of its compact dump.
struct StudyConfig {
  Json canonical;
  ProblemConfig problem;
  SimulationSettings simulation;
  std::vector<double> sweep_grid = {0.0, 0.01, 0.05, 0.1, 0.2, 0.4};
  std::vector<Scheme> region_schemes = {Scheme::kProposed, Scheme::kTube,
                                        Scheme::kRobust};
  std::uint64_t hash = 0;

  std::string hash_hex() const;
};

/// Throws Error(kSchema) on malformed input and Error(kIo) on unreadable
/// sample files. Relative file names resolve against `base_dir`.
StudyConfig parse_study(const Json& j, const std::filesystem::path& base_dir = {});
StudyConfig load_study(const std::filesystem::path& file);
/// JSON merge patch (RFC 7386) applied to the canonical form, then re-parsed.
StudyConfig with_overrides(const StudyConfig& study, const Json& patch);

std::uint64_t fnv1a(std::string_view bytes);

Json matrix_to_json(const MatrixXd& M);
Json vector_to_json(const VectorXd& v);
MatrixXd matrix_from_json(const Json& j, const std::string& what);
VectorXd vector_from_json(const Json& j, const std::string& what);

/// {"H": [[...]], "h": [...]}; rows round-trip bit-exactly.
Json polytope_to_json(const Polytope& P);
Polytope polytope_from_json(const Json& j, const std::string& what = "polytope");

Json schedule_to_json(const TighteningSchedule& s);
TighteningSchedule schedule_from_json(const Json& j);

/// Set bundle with per-set provenance (stage, iterations, tolerances).
Json bundle_to_json(const SetPipelineResult& r);
SetPipelineResult bundle_from_json(const Json& j);

/// Study-level commands. Every result carries the config hash.
TighteningSchedule study_schedule(const StudyConfig& study);
/// Verifies that the schedule belongs to the configured scheme and horizon.
SetPipelineResult study_sets(const StudyConfig& study,
                             const TighteningSchedule& schedule);

struct SimulationOutput {
  std::vector<ClosedLoopTrace> traces;
  Json report;
};
SimulationOutput study_simulate(const StudyConfig& study,
                                const SetPipelineResult& sets, unsigned jobs);
Json study_regions(const StudyConfig& study, unsigned jobs);
Json study_sweep(const StudyConfig& study, unsigned jobs);
/// Sets, simulation statistics and set diagnostics in one document.
Json study_report(const StudyConfig& study, unsigned jobs);

std::string schedule_summary(const TighteningSchedule& s);
std::string sets_summary(const SetPipelineResult& r);

}  // namespace smpc
