#ifndef REAPT_H
#define REAPT_H

/* Generated by cbindgen from the reapt-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible call.
 */
typedef enum ReaptStatus {
  REAPT_OK = 0,
  /*
   A NULL pointer or a length that does not match the model.
   */
  REAPT_INVALID_ARGUMENT = 1,
  /*
   The configuration could not be parsed or is dimensionally wrong.
   */
  REAPT_CONFIG_ERROR = 2,
  /*
   The configuration is well-formed but fails validation
   (controllability, observability, target, horizon, region of
   attraction).
   */
  REAPT_VALIDATION_ERROR = 3,
  /*
   A numerical failure inside the solver.
   */
  REAPT_NUMERICAL_ERROR = 4,
  /*
   The controller has not been started yet.
   */
  REAPT_NOT_STARTED = 5,
  /*
   A panic escaped the library; the handle should be discarded.
   */
  REAPT_INTERNAL_ERROR = 6,
} ReaptStatus;

/*
 Opaque controller handle.
 */
typedef struct ReaptController ReaptController;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *reapt_version(void);

/*
 Message describing the most recent failure on the calling thread.
 The pointer stays valid until the next failing call on this thread.
 */
const char *reapt_last_error_message(void);

/*
 Create a controller from a JSON configuration string (same schema as
 the CLI configuration files). Returns NULL on failure; consult
 `reapt_last_error_message`.

 # Safety
 `config_json` must be a valid NUL-terminated string.
 */
struct ReaptController *reapt_controller_new_from_json(const char *config_json);

/*
 Create a controller from a configuration file path.

 # Safety
 `path` must be a valid NUL-terminated string.
 */
struct ReaptController *reapt_controller_new_from_file(const char *path);

/*
 Destroy a controller created by one of the constructors. NULL is
 accepted and ignored.

 # Safety
 `handle` must be a pointer previously returned by a constructor and
 not freed yet.
 */
void reapt_controller_free(struct ReaptController *handle);

/*
 Number of plant states the controller expects in a measurement.

 # Safety
 `handle` must be a live controller pointer or NULL.
 */
uintptr_t reapt_controller_num_states(const struct ReaptController *handle);

/*
 Number of control inputs the controller produces.

 # Safety
 `handle` must be a live controller pointer or NULL.
 */
uintptr_t reapt_controller_num_inputs(const struct ReaptController *handle);

/*
 Number of plant outputs.

 # Safety
 `handle` must be a live controller pointer or NULL.
 */
uintptr_t reapt_controller_num_outputs(const struct ReaptController *handle);

/*
 Start (or restart) the controller at the given initial state. Fails
 with a validation error when the state is outside the region of
 attraction.

 # Safety
 `x0` must point to `x0_len` readable doubles.
 */
enum ReaptStatus reapt_controller_start(struct ReaptController *handle,
                                        const double *x0,
                                        uintptr_t x0_len);

/*
 Feed the measurement for the current sampling instant and receive the
 input to apply now. The solver then runs for `budget_iterations`
 flow steps to prepare the input of the next instant.

 # Safety
 `x` must point to `x_len` readable doubles and `u_out` to `u_len`
 writable doubles.
 */
enum ReaptStatus reapt_controller_step(struct ReaptController *handle,
                                       const double *x,
                                       uintptr_t x_len,
                                       uint64_t budget_iterations,
                                       double *u_out,
                                       uintptr_t u_len);

/*
 Like `reapt_controller_step` with a wall-clock budget in
 milliseconds instead of an iteration count.

 # Safety
 `x` must point to `x_len` readable doubles and `u_out` to `u_len`
 writable doubles.
 */
enum ReaptStatus reapt_controller_step_deadline(struct ReaptController *handle,
                                                const double *x,
                                                uintptr_t x_len,
                                                double deadline_ms,
                                                double *u_out,
                                                uintptr_t u_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REAPT_H */
