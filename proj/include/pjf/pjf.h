/* C interface to the predictable-jump filtering library. */
#ifndef PJF_H
#define PJF_H

#include <stddef.h>
#include <stdint.h>

#if defined(PJF_BUILDING_LIBRARY)
#define PJF_API __attribute__((visibility("default")))
#else
#define PJF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pjf_status {
  PJF_OK = 0,
  PJF_INVALID_CONFIG,
  PJF_NON_PSD_COVARIANCE,
  PJF_NON_INCREASING_TIMES,
  PJF_INVALID_SCHEDULE,
  PJF_HORIZON_TOO_SHORT,
  PJF_UNKNOWN_FUNCTION_DESCRIPTOR,
  PJF_NON_FINITE_FUNCTION,
  PJF_ZERO_CONDITIONAL_MASS,
  PJF_NUMERICAL_BLOWUP,
  PJF_NEGATIVE_DT,
  PJF_SINGULAR_S,
  PJF_WEIGHT_COLLAPSE,
  PJF_ZERO_REFERENCE_DENSITY,
  PJF_ZERO_MASS,
  PJF_NONPOSITIVE_R,
  PJF_BOUNDARY_LEAK,
  PJF_ZERO_LIKELIHOOD_MASS,
  PJF_UNSUPPORTED_SCENARIO,
  PJF_INCOMPATIBLE_METHOD,
  PJF_IO,
  PJF_CHECK_FAILED, /* a diagnostic check did not pass */
  PJF_INTERNAL
} pjf_status;

typedef struct pjf_scenario pjf_scenario;
typedef struct pjf_events pjf_events;
typedef struct pjf_table pjf_table;

PJF_API const char* pjf_version(void);
PJF_API const char* pjf_status_name(pjf_status status);
/* Message of the last failure on the calling thread ("" if none). */
PJF_API const char* pjf_last_error(void);
/* Process exit code for a status: 0 ok, 1 check or run failure, 2 config or
 * IO error, 3 incompatible method or unsupported scenario. */
PJF_API int pjf_exit_code(pjf_status status);
PJF_API void pjf_string_free(char* s);

/* Scenarios. Every constructor validates; the handle is only set on PJF_OK. */
PJF_API pjf_status pjf_scenario_load(const char* path, pjf_scenario** out);
PJF_API pjf_status pjf_scenario_parse(const char* json, pjf_scenario** out);
PJF_API pjf_status pjf_scenario_preset(const char* name, pjf_scenario** out);
PJF_API void pjf_scenario_free(pjf_scenario* scenario);
PJF_API pjf_status pjf_scenario_to_json(const pjf_scenario* scenario, char** out);
/* Validates without building a handle; `report` (may be NULL) receives one
 * line per violation. Returns the first violation's status. */
PJF_API pjf_status pjf_validate_json(const char* json, char** report);
PJF_API pjf_status pjf_preset_json(const char* name, char** out);

/* Observation records. */
PJF_API pjf_status pjf_simulate(const pjf_scenario* scenario, uint64_t seed, uint64_t path_index,
                                pjf_events** out);
PJF_API pjf_status pjf_events_load(const pjf_scenario* scenario, const char* csv_path, pjf_events** out);
PJF_API size_t pjf_events_count(const pjf_events* events);
PJF_API double pjf_events_time(const pjf_events* events, size_t i);
PJF_API double pjf_events_dy(const pjf_events* events, size_t i, size_t component);
PJF_API void pjf_events_free(pjf_events* events);

typedef enum pjf_method {
  PJF_METHOD_KALMAN = 0,
  PJF_METHOD_KS_PARTICLE,
  PJF_METHOD_ZAKAI_PARTICLE,
  PJF_METHOD_GRID
} pjf_method;

typedef struct pjf_filter_options {
  size_t particles; /* 0: scenario setting */
  uint64_t seed;
  int threads;
} pjf_filter_options;

PJF_API void pjf_filter_options_init(pjf_filter_options* options);

/* Filter output as a table of doubles: columns t, side (0 interior, 1 pre,
 * 2 post), event_index, then per method: kalman m_1..m_m, P_11..P_mm;
 * particle filters one estimate column per battery function; grid mean, var. */
PJF_API pjf_status pjf_filter(const pjf_scenario* scenario, const pjf_events* events, pjf_method method,
                              const pjf_filter_options* options, pjf_table** out);
PJF_API size_t pjf_table_rows(const pjf_table* table);
PJF_API size_t pjf_table_cols(const pjf_table* table);
PJF_API const char* pjf_table_column(const pjf_table* table, size_t col);
PJF_API double pjf_table_value(const pjf_table* table, size_t row, size_t col);
PJF_API void pjf_table_free(pjf_table* table);

/* Command-level runs that write CSV/JSON artifacts and a manifest. */
typedef struct pjf_run_options {
  const char* out_dir;       /* NULL: default output root */
  const char* command_line;  /* recorded in the manifest */
  const char* scenario_path; /* recorded in the manifest */
  uint64_t seed;
  int has_seed; /* 0: use the scenario seed */
  size_t paths;
  size_t particles;
  size_t runs;
  int threads;
  const char* events_path; /* filter: NULL simulates one record */
  const char* checks;      /* diagnose: comma-separated, NULL for all applicable */
  int negative_control;
  int snapshots;
} pjf_run_options;

PJF_API void pjf_run_options_init(pjf_run_options* options);
PJF_API pjf_status pjf_run_simulate(const pjf_scenario* scenario, const pjf_run_options* options);
PJF_API pjf_status pjf_run_filter(const pjf_scenario* scenario, const char* method, const pjf_run_options* options);
/* PJF_CHECK_FAILED when any reported check fails; `table` (may be NULL)
 * receives the human-readable summary either way. */
PJF_API pjf_status pjf_run_diagnose(const pjf_scenario* scenario, const pjf_run_options* options, char** table);

#ifdef __cplusplus
}
#endif

#endif /* PJF_H */
