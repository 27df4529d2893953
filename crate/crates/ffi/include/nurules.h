#ifndef NURULES_H
#define NURULES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NrStatus {
  NR_STATUS_OK = 0,
  NR_STATUS_NULL_POINTER = 1,
  NR_STATUS_INVALID_UTF8 = 2,
  NR_STATUS_CONFIG = 3,
  NR_STATUS_SCENARIO = 4,
  NR_STATUS_ENGINE = 5,
  NR_STATUS_ORACLE = 6,
  NR_STATUS_NOT_FOUND = 7,
  NR_STATUS_INTERNAL = 8,
} NrStatus;

/**
 * Exact outcome law.
 */
typedef struct NrLaw NrLaw;

/**
 * Ensemble statistics.
 */
typedef struct NrReport NrReport;

/**
 * Validated scenario.
 */
typedef struct NrScenario NrScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *nr_last_error(void);

/**
 * Loads a built-in scenario by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NrStatus nr_scenario_builtin(const char *name, struct NrScenario **out);

/**
 * Parses and validates a TOML scenario document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NrStatus nr_scenario_from_toml(const char *toml, struct NrScenario **out);

/**
 * Serializes a scenario to TOML.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be writable.
 */
enum NrStatus nr_scenario_to_toml(const struct NrScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library, freed once.
 */
void nr_scenario_free(struct NrScenario *scenario);

/**
 * Runs `trials` trajectories. `parallelism` 0 picks the default worker
 * count. Results depend only on the scenario, `master_seed` and `trials`.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be writable.
 */
enum NrStatus nr_run_ensemble(const struct NrScenario *scenario,
                              uint64_t trials,
                              uint64_t master_seed,
                              size_t parallelism,
                              struct NrReport **out);

/**
 * Observed frequency of `label`; zero when it never occurred.
 *
 * # Safety
 * `report` must come from this library; `label` must be NUL-terminated.
 */
enum NrStatus nr_report_frequency(const struct NrReport *report, const char *label, double *out);

/**
 * Full report as JSON.
 *
 * # Safety
 * `report` must come from this library; `out` must be writable.
 */
enum NrStatus nr_report_to_json(const struct NrReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle from this library, freed once.
 */
void nr_report_free(struct NrReport *report);

/**
 * Exact outcome law of a scenario.
 *
 * # Safety
 * `scenario` must come from this library; `out` must be writable.
 */
enum NrStatus nr_outcome_law(const struct NrScenario *scenario, struct NrLaw **out);

/**
 * Probability of `label`; [`NrStatus::NotFound`] for labels the law does
 * not list.
 *
 * # Safety
 * `law` must come from this library; `label` must be NUL-terminated.
 */
enum NrStatus nr_law_probability(const struct NrLaw *law, const char *label, double *out);

/**
 * Law as a JSON object mapping labels to probabilities.
 *
 * # Safety
 * `law` must come from this library; `out` must be writable.
 */
enum NrStatus nr_law_to_json(const struct NrLaw *law, char **out);

/**
 * # Safety
 * `law` must be null or a handle from this library, freed once.
 */
void nr_law_free(struct NrLaw *law);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void nr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NURULES_H */
