#ifndef SMPC_SMPC_H
#define SMPC_SMPC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SMPC_API __declspec(dllexport)
#else
#define SMPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 0 and 2..5 double as CLI exit codes. */
typedef enum smpc_status {
  SMPC_OK = 0,
  SMPC_ERR_INVALID_ARGUMENT = 1,
  SMPC_ERR_SCHEMA = 2,
  SMPC_ERR_TIGHTENING = 3,
  SMPC_ERR_SET_EMPTY = 4,
  SMPC_ERR_RUNTIME = 5,
  SMPC_ERR_INFEASIBLE = 6
} smpc_status;

typedef struct smpc_study smpc_study;
typedef struct smpc_schedule smpc_schedule;
typedef struct smpc_sets smpc_sets;
typedef struct smpc_controller smpc_controller;

/* Message of the last failed call on this thread; "" if none. */
SMPC_API const char* smpc_last_error(void);
SMPC_API const char* smpc_status_name(smpc_status status);
SMPC_API const char* smpc_version(void);

/* Strings returned through char** out-parameters are NUL-terminated, UTF-8
 * and owned by the caller. */
SMPC_API void smpc_string_free(char* s);

/* Study configuration (JSON). Relative sample-file names resolve against
 * base_dir, which may be NULL. */
SMPC_API smpc_status smpc_study_load(const char* path, smpc_study** out);
SMPC_API smpc_status smpc_study_parse(const char* json, const char* base_dir,
                                      smpc_study** out);
/* Applies a JSON merge patch to the study in place. */
SMPC_API smpc_status smpc_study_override(smpc_study* study, const char* patch);
SMPC_API smpc_status smpc_study_canonical(const smpc_study* study, char** json);
SMPC_API smpc_status smpc_study_hash(const smpc_study* study, char** hex);
SMPC_API smpc_status smpc_study_dims(const smpc_study* study, size_t* n,
                                     size_t* m);
SMPC_API void smpc_study_free(smpc_study* study);

/* LQR gain K, terminal weight P and closed-loop matrix as JSON. */
SMPC_API smpc_status smpc_synthesize(const smpc_study* study, char** json);

/* Offline tightening. */
SMPC_API smpc_status smpc_tighten(const smpc_study* study, smpc_schedule** out);
SMPC_API smpc_status smpc_schedule_parse(const char* json, smpc_schedule** out);
SMPC_API smpc_status smpc_schedule_json(const smpc_schedule* schedule,
                                        const smpc_study* study, char** json);
SMPC_API smpc_status smpc_schedule_summary(const smpc_schedule* schedule,
                                           char** text);
SMPC_API void smpc_schedule_free(smpc_schedule* schedule);

/* Terminal, invariant and feasible sets. A NULL schedule is computed. */
SMPC_API smpc_status smpc_sets_compute(const smpc_study* study,
                                       const smpc_schedule* schedule,
                                       smpc_sets** out);
SMPC_API smpc_status smpc_sets_parse(const char* json, smpc_sets** out);
SMPC_API smpc_status smpc_sets_json(const smpc_sets* sets,
                                    const smpc_study* study, char** json);
SMPC_API smpc_status smpc_sets_summary(const smpc_sets* sets, char** text);
SMPC_API smpc_status smpc_sets_region_contains(const smpc_sets* sets,
                                               const double* x, size_t n,
                                               int* inside);
SMPC_API void smpc_sets_free(smpc_sets* sets);

/* Closed-loop Monte Carlo: trace CSV (RFC 4180) and report JSON. Either
 * output pointer may be NULL. jobs = 0 uses all cores. */
SMPC_API smpc_status smpc_simulate(const smpc_study* study,
                                   const smpc_sets* sets, unsigned jobs,
                                   char** traces_csv, char** report_json);
/* Feasible regions of the configured schemes with ratios and containment. */
SMPC_API smpc_status smpc_regions(const smpc_study* study, unsigned jobs,
                                  char** json);
SMPC_API smpc_status smpc_sweep(const smpc_study* study, unsigned jobs,
                                char** json);
SMPC_API smpc_status smpc_report(const smpc_study* study, unsigned jobs,
                                 char** json);

/* Receding-horizon controller over a set bundle. */
SMPC_API smpc_status smpc_controller_create(const smpc_study* study,
                                            const smpc_sets* sets,
                                            smpc_controller** out);
/* Writes m inputs to u. *qp_status is 0 when the QP was solved, 1 when it
 * was infeasible and 2 at the iteration cap; u falls back to K x then. */
SMPC_API smpc_status smpc_controller_step(smpc_controller* controller,
                                          const double* x, size_t n, double* u,
                                          size_t m, int* qp_status);
SMPC_API void smpc_controller_reset(smpc_controller* controller);
SMPC_API void smpc_controller_free(smpc_controller* controller);

#ifdef __cplusplus
}
#endif

#endif
