#include "smpc/smpc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>

#include "smpc/study.hpp"

using smpc::Errc;
using smpc::Json;

struct smpc_study {
  smpc::StudyConfig rep;
};

struct smpc_schedule {
  smpc::TighteningSchedule rep;
};

struct smpc_sets {
  smpc::SetPipelineResult rep;
};

struct smpc_controller {
  std::unique_ptr<smpc::MpcController> rep;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
};

namespace {

thread_local std::string last_error;

smpc_status status_of(Errc code) {
  switch (code) {
    case Errc::kSchema:
    case Errc::kIo:
      return SMPC_ERR_SCHEMA;
    case Errc::kTighteningInfeasible:
      return SMPC_ERR_TIGHTENING;
    case Errc::kEmptySet:
    case Errc::kEmptyTerminalSet:
      return SMPC_ERR_SET_EMPTY;
    case Errc::kBadParams:
    case Errc::kDimensionMismatch:
      return SMPC_ERR_INVALID_ARGUMENT;
    case Errc::kInfeasible:
      return SMPC_ERR_INFEASIBLE;
    default:
      return SMPC_ERR_RUNTIME;
  }
}

smpc_status set_error(smpc_status status, const std::string& what) {
  last_error = what;
  return status;
}

template <class F>
smpc_status guard(F&& fn) {
  try {
    fn();
    last_error.clear();
    return SMPC_OK;
  } catch (const smpc::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const Json::exception& e) {
    return set_error(SMPC_ERR_SCHEMA, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SMPC_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SMPC_ERR_RUNTIME, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void need(bool ok, const char* what) {
  if (!ok) smpc::fail(Errc::kBadParams, what);
}

Json parse_text(const char* text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    smpc::fail(Errc::kSchema, std::string(what) + ": " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

extern "C" {

const char* smpc_last_error(void) { return last_error.c_str(); }

const char* smpc_status_name(smpc_status status) {
  switch (status) {
    case SMPC_OK: return "ok";
    case SMPC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SMPC_ERR_SCHEMA: return "schema";
    case SMPC_ERR_TIGHTENING: return "tightening_infeasible";
    case SMPC_ERR_SET_EMPTY: return "set_empty";
    case SMPC_ERR_RUNTIME: return "runtime";
    case SMPC_ERR_INFEASIBLE: return "infeasible";
  }
  return "unknown";
}

const char* smpc_version(void) { return "0.1.0"; }

void smpc_string_free(char* s) { std::free(s); }

smpc_status smpc_study_load(const char* path, smpc_study** out) {
  return guard([&] {
    need(path && out, "null argument");
    *out = nullptr;
    *out = new smpc_study{smpc::load_study(path)};
  });
}

smpc_status smpc_study_parse(const char* json, const char* base_dir,
                             smpc_study** out) {
  return guard([&] {
    need(json && out, "null argument");
    *out = nullptr;
    const Json j = parse_text(json, "config");
    *out = new smpc_study{smpc::parse_study(j, base_dir ? base_dir : "")};
  });
}

smpc_status smpc_study_override(smpc_study* study, const char* patch) {
  return guard([&] {
    need(study && patch, "null argument");
    study->rep = smpc::with_overrides(study->rep, parse_text(patch, "override"));
  });
}

smpc_status smpc_study_canonical(const smpc_study* study, char** json) {
  return guard([&] {
    need(study && json, "null argument");
    *json = copy_string(dump(study->rep.canonical));
  });
}

smpc_status smpc_study_hash(const smpc_study* study, char** hex) {
  return guard([&] {
    need(study && hex, "null argument");
    *hex = copy_string(study->rep.hash_hex());
  });
}

smpc_status smpc_study_dims(const smpc_study* study, size_t* n, size_t* m) {
  return guard([&] {
    need(study && n && m, "null argument");
    *n = static_cast<size_t>(study->rep.problem.sys.n());
    *m = static_cast<size_t>(study->rep.problem.sys.m());
  });
}

void smpc_study_free(smpc_study* study) { delete study; }

smpc_status smpc_synthesize(const smpc_study* study, char** json) {
  return guard([&] {
    need(study && json, "null argument");
    const smpc::ControllerGains g = smpc::lqr_synthesize(study->rep.problem.sys);
    const Json j = {{"config_hash", study->rep.hash_hex()},
                    {"K", smpc::matrix_to_json(g.K)},
                    {"P", smpc::matrix_to_json(g.P)},
                    {"Acl", smpc::matrix_to_json(g.Acl)},
                    {"spectral_radius", g.spectral_radius}};
    *json = copy_string(dump(j));
  });
}

smpc_status smpc_tighten(const smpc_study* study, smpc_schedule** out) {
  return guard([&] {
    need(study && out, "null argument");
    *out = nullptr;
    *out = new smpc_schedule{smpc::study_schedule(study->rep)};
  });
}

smpc_status smpc_schedule_parse(const char* json, smpc_schedule** out) {
  return guard([&] {
    need(json && out, "null argument");
    *out = nullptr;
    *out = new smpc_schedule{smpc::schedule_from_json(parse_text(json, "schedule"))};
  });
}

smpc_status smpc_schedule_json(const smpc_schedule* schedule,
                               const smpc_study* study, char** json) {
  return guard([&] {
    need(schedule && json, "null argument");
    Json j = smpc::schedule_to_json(schedule->rep);
    if (study) {
      j["config_hash"] = study->rep.hash_hex();
      j["scheme"] = std::string(smpc::to_string(study->rep.problem.scheme));
    }
    *json = copy_string(dump(j));
  });
}

smpc_status smpc_schedule_summary(const smpc_schedule* schedule, char** text) {
  return guard([&] {
    need(schedule && text, "null argument");
    *text = copy_string(smpc::schedule_summary(schedule->rep));
  });
}

void smpc_schedule_free(smpc_schedule* schedule) { delete schedule; }

smpc_status smpc_sets_compute(const smpc_study* study,
                              const smpc_schedule* schedule, smpc_sets** out) {
  return guard([&] {
    need(study && out, "null argument");
    *out = nullptr;
    const smpc::TighteningSchedule s =
        schedule ? schedule->rep : smpc::study_schedule(study->rep);
    *out = new smpc_sets{smpc::study_sets(study->rep, s)};
  });
}

smpc_status smpc_sets_parse(const char* json, smpc_sets** out) {
  return guard([&] {
    need(json && out, "null argument");
    *out = nullptr;
    *out = new smpc_sets{smpc::bundle_from_json(parse_text(json, "set bundle"))};
  });
}

smpc_status smpc_sets_json(const smpc_sets* sets, const smpc_study* study,
                           char** json) {
  return guard([&] {
    need(sets && json, "null argument");
    Json j = smpc::bundle_to_json(sets->rep);
    if (study) j["config_hash"] = study->rep.hash_hex();
    *json = copy_string(dump(j));
  });
}

smpc_status smpc_sets_summary(const smpc_sets* sets, char** text) {
  return guard([&] {
    need(sets && text, "null argument");
    *text = copy_string(smpc::sets_summary(sets->rep));
  });
}

smpc_status smpc_sets_region_contains(const smpc_sets* sets, const double* x,
                                      size_t n, int* inside) {
  return guard([&] {
    need(sets && x && inside, "null argument");
    need(static_cast<Eigen::Index>(n) == sets->rep.region.dim(), "state dimension mismatch");
    const Eigen::Map<const smpc::VectorXd> v(x, static_cast<Eigen::Index>(n));
    *inside = sets->rep.region.contains_point(v) ? 1 : 0;
  });
}

void smpc_sets_free(smpc_sets* sets) { delete sets; }

smpc_status smpc_simulate(const smpc_study* study, const smpc_sets* sets,
                          unsigned jobs, char** traces_csv, char** report_json) {
  return guard([&] {
    need(study && sets, "null argument");
    const smpc::SimulationOutput out = smpc::study_simulate(study->rep, sets->rep, jobs);
    std::string csv;
    if (traces_csv) {
      std::ostringstream os;
      smpc::write_traces_csv(os, out.traces);
      csv = os.str();
    }
    std::string report = report_json ? dump(out.report) : std::string();
    if (traces_csv) *traces_csv = copy_string(csv);
    if (report_json) *report_json = copy_string(report);
  });
}

smpc_status smpc_regions(const smpc_study* study, unsigned jobs, char** json) {
  return guard([&] {
    need(study && json, "null argument");
    *json = copy_string(dump(smpc::study_regions(study->rep, jobs)));
  });
}

smpc_status smpc_sweep(const smpc_study* study, unsigned jobs, char** json) {
  return guard([&] {
    need(study && json, "null argument");
    *json = copy_string(dump(smpc::study_sweep(study->rep, jobs)));
  });
}

smpc_status smpc_report(const smpc_study* study, unsigned jobs, char** json) {
  return guard([&] {
    need(study && json, "null argument");
    *json = copy_string(dump(smpc::study_report(study->rep, jobs)));
  });
}

smpc_status smpc_controller_create(const smpc_study* study, const smpc_sets* sets,
                                   smpc_controller** out) {
  return guard([&] {
    need(study && sets && out, "null argument");
    *out = nullptr;
    const smpc::ProblemConfig& cfg = study->rep.problem;
    auto c = std::make_unique<smpc_controller>();
    c->rep = std::make_unique<smpc::MpcController>(sets->rep.controller_spec(cfg));
    c->n = cfg.sys.n();
    c->m = cfg.sys.m();
    *out = c.release();
  });
}

smpc_status smpc_controller_step(smpc_controller* controller, const double* x,
                                 size_t n, double* u, size_t m, int* qp_status) {
  return guard([&] {
    need(controller && x && u, "null argument");
    need(static_cast<Eigen::Index>(n) == controller->n &&
             static_cast<Eigen::Index>(m) == controller->m,
         "dimension mismatch");
    const Eigen::Map<const smpc::VectorXd> xv(x, controller->n);
    const smpc::StepResult r = controller->rep->step(xv);
    Eigen::Map<smpc::VectorXd>(u, controller->m) = r.u;
    if (qp_status) *qp_status = static_cast<int>(r.solution.status);
  });
}

void smpc_controller_reset(smpc_controller* controller) {
  if (controller) controller->rep->reset();
}

void smpc_controller_free(smpc_controller* controller) { delete controller; }

}  // extern "C"
