#ifndef HSLAB_H
#define HSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Fields that can be copied out of a snapshot.
 */
typedef enum HslabField {
  HSLAB_FIELD_DENSITY = 0,
  HSLAB_FIELD_NORMALIZED = 1,
  HSLAB_FIELD_PRESSURE = 2,
} HslabField;

/*
 Parameters that may be overridden on a loaded scenario.
 */
typedef enum HslabParam {
  HSLAB_PARAM_K = 0,
  HSLAB_PARAM_T_END = 1,
  HSLAB_PARAM_CELLS = 2,
  HSLAB_PARAM_OUTPUTS = 3,
} HslabParam;

/*
 Result codes. `HSLAB_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum HslabStatus {
  HSLAB_STATUS_OK = 0,
  HSLAB_STATUS_NULL_POINTER = 1,
  HSLAB_STATUS_INVALID_ARGUMENT = 2,
  HSLAB_STATUS_PARSE = 3,
  HSLAB_STATUS_VALIDATION = 4,
  HSLAB_STATUS_NUMERICAL = 5,
  HSLAB_STATUS_IO = 6,
  HSLAB_STATUS_OUT_OF_RANGE = 7,
  HSLAB_STATUS_PANIC = 8,
} HslabStatus;

/*
 Opaque scenario handle.
 */
typedef struct HslabScenario HslabScenario;

/*
 Opaque handle to a finished run.
 */
typedef struct HslabTrajectory HslabTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes excluding
 the terminator, or 0 when there is none.

 # Safety
 `buf` must be null or valid for `len` bytes of writes.
 */
size_t hslab_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *hslab_version(void);

/*
 Loads a builtin scenario by name or a scenario file by path.

 # Safety
 `name` must be a valid NUL-terminated string; `out` must be valid for a
 pointer write.
 */
enum HslabStatus hslab_scenario_load(const char *name, struct HslabScenario **out);

/*
 Releases a scenario. Null is ignored.

 # Safety
 `s` must be null or a handle from [`hslab_scenario_load`] not yet freed.
 */
void hslab_scenario_free(struct HslabScenario *s);

/*
 Sets a scenario parameter and revalidates; on failure the scenario is
 left unchanged.

 # Safety
 `s` must be a live scenario handle.
 */
enum HslabStatus hslab_scenario_set(struct HslabScenario *s, enum HslabParam param, double value);

/*
 Number of grid cells of the scenario, or 0 for a null handle.

 # Safety
 `s` must be null or a live scenario handle.
 */
size_t hslab_scenario_cells(const struct HslabScenario *s);

/*
 Runs the scenario with its current solver settings.

 # Safety
 `s` must be a live scenario handle; `out` must be valid for a pointer write.
 */
enum HslabStatus hslab_simulate(const struct HslabScenario *s, struct HslabTrajectory **out);

/*
 Releases a trajectory. Null is ignored.

 # Safety
 `t` must be null or a handle from [`hslab_simulate`] not yet freed.
 */
void hslab_trajectory_free(struct HslabTrajectory *t);

/*
 Number of stored snapshots, or 0 for a null handle.

 # Safety
 `t` must be null or a live trajectory handle.
 */
size_t hslab_trajectory_len(const struct HslabTrajectory *t);

/*
 Copies one field of snapshot `index` into `buf`, which must hold exactly
 the number of grid cells; also writes the snapshot time to `time` when
 non-null.

 # Safety
 `t` must be a live trajectory handle, `buf` valid for `len` `double`
 writes and `time` null or valid for one write.
 */
enum HslabStatus hslab_trajectory_field(const struct HslabTrajectory *t,
                                        size_t index,
                                        enum HslabField field,
                                        double *buf,
                                        size_t len,
                                        double *time);

/*
 Mass-balance defect `|M(T) - M(0) - int f rho| - clamped` of the run.

 # Safety
 `t` must be a live trajectory handle and `out` valid for one write.
 */
enum HslabStatus hslab_trajectory_mass_defect(const struct HslabTrajectory *t, double *out);

/*
 Scalar bound `((k-1)/k)^(k-1) / (k-1)` on `p (1 - v)`; NaN for `k <= 1`.
 */
double hslab_complementarity_bound(double k);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSLAB_H */
