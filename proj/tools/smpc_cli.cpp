#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smpc/smpc.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitRuntime = 5;

struct Failure {
  int code;
  std::string message;
};

int exit_code(smpc_status s) {
  switch (s) {
    case SMPC_OK: return 0;
    case SMPC_ERR_INVALID_ARGUMENT:
    case SMPC_ERR_SCHEMA: return kExitSchema;
    case SMPC_ERR_TIGHTENING:
    case SMPC_ERR_SET_EMPTY:
    case SMPC_ERR_RUNTIME: return static_cast<int>(s);
    case SMPC_ERR_INFEASIBLE: return kExitRuntime;
  }
  return kExitRuntime;
}

void check(smpc_status s) {
  if (s != SMPC_OK) throw Failure{exit_code(s), smpc_last_error()};
}

// Owns a string handed out by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  smpc_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitSchema, "cannot read " + path};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{kExitRuntime, "cannot write " + path.string()};
}

// Writes to --out when given, otherwise to stdout.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
  std::optional<int> runs;
  std::optional<int> steps;
  std::string scheme;
  std::string eps_f;
  std::vector<double> eps_f_grid;
  std::string method;
  std::string mode;
  std::vector<std::string> schemes;
  std::string schedule;
  std::string bundle;
};

template <class T>
struct Handle {
  T* ptr = nullptr;
  void (*release)(T*);
  explicit Handle(void (*r)(T*)) : release(r) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (ptr) release(ptr);
  }
};

// Loads the config and applies command-line overrides as a JSON merge patch.
void load_study(const Options& o, Handle<smpc_study>& study) {
  check(smpc_study_load(o.config.c_str(), &study.ptr));
  nlohmann::json patch = nlohmann::json::object();
  if (o.seed) {
    patch["sampling"]["seed"] = *o.seed;
    patch["simulation"]["seed"] = *o.seed;
  }
  if (o.runs) patch["simulation"]["runs"] = *o.runs;
  if (o.steps) patch["simulation"]["steps"] = *o.steps;
  if (!o.mode.empty()) patch["simulation"]["mode"] = o.mode;
  if (!o.scheme.empty()) patch["scheme"] = o.scheme;
  if (!o.method.empty()) patch["sampling"]["method"] = o.method;
  if (o.eps_f == "plain") {
    patch["eps_f"] = nullptr;
  } else if (!o.eps_f.empty()) {
    try {
      patch["eps_f"] = std::stod(o.eps_f);
    } catch (const std::exception&) {
      throw Failure{kExitSchema, "--eps-f must be a number or 'plain'"};
    }
  }
  if (!o.eps_f_grid.empty()) patch["sweep"]["eps_f_grid"] = o.eps_f_grid;
  if (!o.schemes.empty()) patch["region"]["schemes"] = o.schemes;
  if (!patch.empty()) check(smpc_study_override(study.ptr, patch.dump().c_str()));
}

int cmd_synthesize(const Options& o) {
  Handle<smpc_study> study(smpc_study_free);
  load_study(o, study);
  char* json = nullptr;
  check(smpc_synthesize(study.ptr, &json));
  emit(o.out, take(json));
  return 0;
}

int cmd_tighten(const Options& o) {
  Handle<smpc_study> study(smpc_study_free);
  load_study(o, study);
  Handle<smpc_schedule> schedule(smpc_schedule_free);
  check(smpc_tighten(study.ptr, &schedule.ptr));
  char* json = nullptr;
  check(smpc_schedule_json(schedule.ptr, study.ptr, &json));
  emit(o.out, take(json));
  char* text = nullptr;
  check(smpc_schedule_summary(schedule.ptr, &text));
  (o.out.empty() ? std::cerr : std::cout) << take(text);
  return 0;
}

int cmd_sets(const Options& o) {
  Handle<smpc_study> study(smpc_study_free);
  load_study(o, study);
  Handle<smpc_schedule> schedule(smpc_schedule_free);
  if (!o.schedule.empty()) {
    check(smpc_schedule_parse(read_file(o.schedule).c_str(), &schedule.ptr));
  }
  Handle<smpc_sets> sets(smpc_sets_free);
  check(smpc_sets_compute(study.ptr, schedule.ptr, &sets.ptr));
  char* json = nullptr;
  check(smpc_sets_json(sets.ptr, study.ptr, &json));
  emit(o.out, take(json));
  char* text = nullptr;
  check(smpc_sets_summary(sets.ptr, &text));
  (o.out.empty() ? std::cerr : std::cout) << take(text);
  return 0;
}

int cmd_simulate(const Options& o) {
  Handle<smpc_study> study(smpc_study_free);
  load_study(o, study);
  Handle<smpc_sets> sets(smpc_sets_free);
  if (o.bundle.empty()) {
    check(smpc_sets_compute(study.ptr, nullptr, &sets.ptr));
  } else {
    check(smpc_sets_parse(read_file(o.bundle).c_str(), &sets.ptr));
  }
  char* csv = nullptr;
  char* report = nullptr;
  check(smpc_simulate(study.ptr, sets.ptr, o.jobs, &csv, &report));
  const std::string traces = take(csv);
  const std::string rep = take(report);
  if (o.out.empty()) {
    std::cout << rep;
  } else {
    write_file(fs::path(o.out) / "traces.csv", traces);
    write_file(fs::path(o.out) / "report.json", rep);
  }
  return 0;
}

int cmd_json(const Options& o, smpc_status (*fn)(const smpc_study*, unsigned, char**)) {
  Handle<smpc_study> study(smpc_study_free);
  load_study(o, study);
  char* json = nullptr;
  check(fn(study.ptr, o.jobs, &json));
  emit(o.out, take(json));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic MPC toolkit: tightening, invariant sets and closed-loop studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(smpc_version()));
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Study configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output file (directory for simulate)");
    sub->add_option("--seed", o.seed, "Seed for sampling and simulation");
    sub->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
    sub->add_option("--scheme", o.scheme, "proposed | tube | robust")
        ->check(CLI::IsMember({"proposed", "tube", "robust"}));
    sub->add_option("--method", o.method, "Quantile method")
        ->check(CLI::IsMember({"sampled", "convolution"}));
    sub->add_option("--eps-f", o.eps_f, "Mixed-schedule ε_f, or 'plain'");
  };
  auto sim_flags = [&](CLI::App* sub) {
    sub->add_option("--runs", o.runs, "Closed-loop runs")->check(CLI::PositiveNumber);
    sub->add_option("--steps", o.steps, "Steps per run")->check(CLI::PositiveNumber);
    sub->add_option("--mode", o.mode, "Disturbance mode")
        ->check(CLI::IsMember({"model", "vertices", "mixed", "zero"}));
  };

  CLI::App* synth = app.add_subcommand("synthesize", "LQR gain and terminal weight");
  common(synth);
  CLI::App* tighten = app.add_subcommand("tighten", "Tightened constraint schedule");
  common(tighten);
  CLI::App* sets = app.add_subcommand("sets", "Terminal, invariant and feasible sets");
  common(sets);
  sets->add_option("--schedule", o.schedule, "Schedule from 'tighten'")
      ->check(CLI::ExistingFile);
  CLI::App* simulate = app.add_subcommand("simulate", "Closed-loop Monte Carlo");
  common(simulate);
  sim_flags(simulate);
  simulate->add_option("--bundle", o.bundle, "Set bundle from 'sets'")
      ->check(CLI::ExistingFile);
  CLI::App* region = app.add_subcommand("region", "Feasible regions of several schemes");
  common(region);
  region->add_option("--schemes", o.schemes, "Schemes to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"proposed", "tube", "robust"}));
  CLI::App* sweep = app.add_subcommand("sweep", "Feasible-region area against ε_f");
  common(sweep);
  sweep->add_option("--eps-f-grid", o.eps_f_grid, "Comma-separated ε_f values")
      ->delimiter(',');
  CLI::App* report = app.add_subcommand("report", "Sets and closed-loop statistics");
  common(report);
  sim_flags(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitSchema;
  }

  try {
    if (*synth) return cmd_synthesize(o);
    if (*tighten) return cmd_tighten(o);
    if (*sets) return cmd_sets(o);
    if (*simulate) return cmd_simulate(o);
    if (*region) return cmd_json(o, smpc_regions);
    if (*sweep) return cmd_json(o, smpc_sweep);
    if (*report) return cmd_json(o, smpc_report);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
