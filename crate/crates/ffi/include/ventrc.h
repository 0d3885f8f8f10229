#ifndef VENTRC_H
#define VENTRC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VentrcStatus {
  VENTRC_STATUS_OK = 0,
  VENTRC_STATUS_NULL_POINTER = 1,
  VENTRC_STATUS_INVALID_ARGUMENT = 2,
  VENTRC_STATUS_PARSE = 3,
  VENTRC_STATUS_IO = 4,
  VENTRC_STATUS_NUMERIC = 5,
  /**
   * robust-stability check failed
   */
  VENTRC_STATUS_UNSTABLE = 6,
  VENTRC_STATUS_IDENTIFICATION = 7,
  /**
   * a Rust panic was caught at the boundary
   */
  VENTRC_STATUS_PANIC = 8,
} VentrcStatus;

/**
 * Integral controller with optional repetitive add-on.
 */
typedef struct VentrcController VentrcController;

/**
 * Repetitive-control filter set (`L_c`, shift, `Q`, period).
 */
typedef struct VentrcFilterSet VentrcFilterSet;

/**
 * Hose, leak and one-compartment lung simulator for one scenario.
 */
typedef struct VentrcPlant VentrcPlant;

typedef struct VentrcPlantOutput {
  /**
   * airway pressure after the measurement delay (mbar)
   */
  double measured_p_aw;
  double p_aw;
  /**
   * blower outlet pressure (mbar)
   */
  double p_out;
  double p_lung;
  /**
   * patient flow (L/s)
   */
  double q_pat;
} VentrcPlantOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ventrc_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ventrc_last_error_message(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum VentrcStatus ventrc_filterset_read(const char *path, struct VentrcFilterSet **out);

/**
 * # Safety
 * `filterset` must come from this library; `path` must be NUL-terminated.
 */
enum VentrcStatus ventrc_filterset_write(const struct VentrcFilterSet *filterset, const char *path);

/**
 * Period `N` in samples, or 0 for a null handle.
 *
 * # Safety
 * `filterset` must be null or come from this library.
 */
size_t ventrc_filterset_period(const struct VentrcFilterSet *filterset);

/**
 * Copy of `filterset` with its memory retargeted to `period_n` samples.
 *
 * # Safety
 * `filterset` must come from this library; `out` must be writable.
 */
enum VentrcStatus ventrc_filterset_with_period(const struct VentrcFilterSet *filterset,
                                               size_t period_n,
                                               struct VentrcFilterSet **out);

/**
 * Checks the filter set against the exact loop model of a scenario file.
 * Writes `max |Q(1-TL)|` to `max_gain` (if non-null) and returns
 * `VENTRC_STATUS_UNSTABLE` when it is not below 1.
 *
 * # Safety
 * `filterset` must come from this library; `scenario_path` must be
 * NUL-terminated; `max_gain` must be null or writable.
 */
enum VentrcStatus ventrc_filterset_verify(const struct VentrcFilterSet *filterset,
                                          const char *scenario_path,
                                          double *max_gain);

/**
 * # Safety
 * `filterset` must be null or come from this library, and not be used afterwards.
 */
void ventrc_filterset_free(struct VentrcFilterSet *filterset);

/**
 * Creates a controller. A null `filterset` gives the plain integral
 * controller; `output_limits` is null (unlimited) or points at `{lo, hi}`.
 *
 * # Safety
 * Pointers must be null or valid as described; `out` must be writable.
 */
enum VentrcStatus ventrc_controller_new(const struct VentrcFilterSet *filterset,
                                        double integral_gain,
                                        const double *output_limits,
                                        struct VentrcController **out);

/**
 * Gain used by the benchmark loop.
 */
double ventrc_default_integral_gain(void);

/**
 * Command to apply at the current sample, or NaN for a null handle.
 *
 * # Safety
 * `controller` must be null or come from this library.
 */
double ventrc_controller_command(const struct VentrcController *controller);

/**
 * Feeds one reference/measurement pair and writes the next command.
 *
 * # Safety
 * `controller` must come from this library; `command` must be null or writable.
 */
enum VentrcStatus ventrc_controller_step(struct VentrcController *controller,
                                         double reference,
                                         double measurement,
                                         double *command);

/**
 * Whether the repetitive part shut itself off after an overflow.
 *
 * # Safety
 * `controller` must be null or come from this library.
 */
bool ventrc_controller_rc_faulted(const struct VentrcController *controller);

/**
 * # Safety
 * `controller` must come from this library.
 */
enum VentrcStatus ventrc_controller_reset(struct VentrcController *controller);

/**
 * # Safety
 * `controller` must be null or come from this library, and not be used afterwards.
 */
void ventrc_controller_free(struct VentrcController *controller);

/**
 * Loads a scenario file and builds its plant, starting at rest.
 *
 * # Safety
 * `scenario_path` must be NUL-terminated; `out` must be writable.
 */
enum VentrcStatus ventrc_plant_load(const char *scenario_path, struct VentrcPlant **out);

/**
 * Advances the plant one sample under control pressure `p_control`.
 *
 * # Safety
 * `plant` must come from this library; `output` must be null or writable.
 */
enum VentrcStatus ventrc_plant_step(struct VentrcPlant *plant,
                                    double p_control,
                                    struct VentrcPlantOutput *output);

/**
 * Copies up to `capacity` samples of one breath of the pressure reference
 * into `buffer` and stores the breath length in `length`. Pass a null
 * buffer to query the length only.
 *
 * # Safety
 * `plant` must come from this library; `buffer` must be null or hold
 * `capacity` doubles; `length` must be writable.
 */
enum VentrcStatus ventrc_plant_reference(const struct VentrcPlant *plant,
                                         double *buffer,
                                         size_t capacity,
                                         size_t *length);

/**
 * # Safety
 * `plant` must come from this library.
 */
enum VentrcStatus ventrc_plant_reset(struct VentrcPlant *plant);

/**
 * # Safety
 * `plant` must be null or come from this library, and not be used afterwards.
 */
void ventrc_plant_free(struct VentrcPlant *plant);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VENTRC_H */
