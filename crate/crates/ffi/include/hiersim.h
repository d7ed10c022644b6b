#ifndef HIERSIM_H
#define HIERSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_ARGUMENT = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  /**
   * The scenario text or its data files are invalid.
   */
  HS_STATUS_INVALID_SCENARIO = 3,
  HS_STATUS_RUNTIME = 4,
  HS_STATUS_IO = 5,
  /**
   * Unknown bundled scenario or column name.
   */
  HS_STATUS_NOT_FOUND = 6,
  /**
   * The simulation already ran all of its steps.
   */
  HS_STATUS_FINISHED = 7,
  HS_STATUS_PANIC = 8,
} HsStatus;

/**
 * A parsed and validated scenario.
 */
typedef struct HsScenario HsScenario;

/**
 * An initialized simulation.
 */
typedef struct HsSim HsSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next hiersim call on the same thread.
 */
const char *hs_last_error(void);

/**
 * Parses and validates scenario text. Relative data paths resolve against
 * `base_dir`; NULL means the current directory.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `base_dir` NULL or one, and `out`
 * a writable pointer.
 */
enum HsStatus hs_scenario_from_text(const char *text,
                                    const char *base_dir,
                                    struct HsScenario **out);

/**
 * Loads one of the scenarios shipped with the library by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HsStatus hs_scenario_bundled(const char *name, struct HsScenario **out);

/**
 * Replaces the scenario seed.
 *
 * # Safety
 * `sc` must come from this library and not be freed.
 */
enum HsStatus hs_scenario_set_seed(struct HsScenario *sc, uint64_t seed);

/**
 * Number of steps the scenario runs.
 *
 * # Safety
 * `sc` must be NULL or a live scenario.
 */
uint64_t hs_scenario_steps(const struct HsScenario *sc);

/**
 * Runs the whole scenario and writes its output files into `out_dir`.
 * `cluster_energy_kwh` may be NULL.
 *
 * # Safety
 * `sc` must be a live scenario, `out_dir` a NUL-terminated string.
 */
enum HsStatus hs_scenario_run(const struct HsScenario *sc,
                              const char *out_dir,
                              double *cluster_energy_kwh);

/**
 * # Safety
 * `sc` must be NULL or a scenario not yet freed.
 */
void hs_scenario_free(struct HsScenario *sc);

/**
 * Builds and initializes a simulation. The scenario may be freed afterwards.
 *
 * # Safety
 * `sc` must be a live scenario and `out` a writable pointer.
 */
enum HsStatus hs_sim_new(const struct HsScenario *sc, struct HsSim **out);

/**
 * Advances one step. Returns `HS_STATUS_FINISHED` once all steps ran.
 *
 * # Safety
 * `sim` must be a live simulation.
 */
enum HsStatus hs_sim_step(struct HsSim *sim);

/**
 * Steps completed so far.
 *
 * # Safety
 * `sim` must be NULL or a live simulation.
 */
uint64_t hs_sim_timestep(const struct HsSim *sim);

/**
 * Number of values in the latest frame.
 *
 * # Safety
 * `sim` must be NULL or a live simulation.
 */
size_t hs_sim_column_count(struct HsSim *sim);

/**
 * Name of column `i` of the latest frame, in the same
 * `cluster.domain.system.component.variable.kind` form as the CSV output.
 * NULL when out of range. Valid until the next step or free.
 *
 * # Safety
 * `sim` must be NULL or a live simulation.
 */
const char *hs_sim_column_name(struct HsSim *sim, size_t i);

/**
 * Reads one value of the latest frame by column name.
 *
 * # Safety
 * `sim` must be a live simulation, `column` a NUL-terminated string and
 * `value` a writable pointer.
 */
enum HsStatus hs_sim_get(struct HsSim *sim, const char *column, double *value);

/**
 * # Safety
 * `sim` must be NULL or a simulation not yet freed.
 */
void hs_sim_free(struct HsSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIERSIM_H */
