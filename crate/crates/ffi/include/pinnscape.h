#ifndef PINNSCAPE_H
#define PINNSCAPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_CONFIG = 3,
  PS_STATUS_NON_FINITE = 4,
  PS_STATUS_PROBE_FAILED = 5,
  PS_STATUS_IO = 6,
  PS_STATUS_BUFFER_TOO_SMALL = 7,
  PS_STATUS_INTERNAL = 8,
} PsStatus;

typedef enum PsObjectiveKind {
  PS_OBJECTIVE_KIND_DRM1D = 0,
  PS_OBJECTIVE_KIND_PINN1D = 1,
  PS_OBJECTIVE_KIND_DRM2D = 2,
  PS_OBJECTIVE_KIND_PINN2D = 3,
} PsObjectiveKind;

typedef enum PsOptimizerKind {
  PS_OPTIMIZER_KIND_ADAM = 0,
  PS_OPTIMIZER_KIND_GD = 1,
} PsOptimizerKind;

// Opaque experiment configuration.
typedef struct PsConfig PsConfig;

// Opaque objective handle.
typedef struct PsObjective PsObjective;

// Opaque training result.
typedef struct PsTrajectory PsTrajectory;

// Full-batch optimizer settings; ADAM moments use the usual defaults.
typedef struct PsOptimizer {
  enum PsOptimizerKind kind;
  double learning_rate;
  size_t epochs;
  uint64_t seed;
} PsOptimizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from the same thread.
const char *ps_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// Objective with the default quadrature and a two-hidden-layer tanh
// network of the given width.
//
// # Safety
// `out` must be valid for writes.
enum PsStatus ps_objective_new(enum PsObjectiveKind kind, size_t width, struct PsObjective **out);

// Objective described by a configuration.
//
// # Safety
// `config` must be a live handle and `out` valid for writes.
enum PsStatus ps_objective_from_config(const struct PsConfig *config, struct PsObjective **out);

// # Safety
// `objective` must be null or a handle from this library, not yet freed.
void ps_objective_free(struct PsObjective *objective);

// Number of network parameters, 0 for a null handle.
//
// # Safety
// `objective` must be null or a live handle.
size_t ps_objective_param_count(const struct PsObjective *objective);

// Default initialization scaled by `scale`, written to `params[0..len]`.
//
// # Safety
// `params` must be valid for `len` writes.
enum PsStatus ps_objective_init_params(const struct PsObjective *objective,
                                       uint64_t seed,
                                       double scale,
                                       double *params,
                                       size_t len);

// # Safety
// `params` must be valid for `len` reads and `loss` for one write.
enum PsStatus ps_objective_evaluate(const struct PsObjective *objective,
                                    const double *params,
                                    size_t len,
                                    double *loss);

// Loss and gradient; `grad` receives `len` values.
//
// # Safety
// `params` and `grad` must be valid for `len` elements, `loss` for one.
enum PsStatus ps_objective_gradient(const struct PsObjective *objective,
                                    const double *params,
                                    size_t len,
                                    double *loss,
                                    double *grad);

// Hessian-vector product `H(params) · direction` into `out`.
//
// # Safety
// All three arrays must be valid for `len` elements.
enum PsStatus ps_objective_hvp(const struct PsObjective *objective,
                               const double *params,
                               const double *direction,
                               size_t len,
                               double *out);

// Trains from `init` and returns the trajectory (losses and final
// parameters; snapshots are not kept).
//
// # Safety
// `init` must be valid for `len` reads and `out` for one write.
enum PsStatus ps_train(const struct PsObjective *objective,
                       const double *init,
                       size_t len,
                       struct PsOptimizer optimizer,
                       struct PsTrajectory **out);

// # Safety
// `trajectory` must be null or a live handle.
void ps_trajectory_free(struct PsTrajectory *trajectory);

// Number of recorded losses (epochs + 1), 0 for a null handle.
//
// # Safety
// `trajectory` must be null or a live handle.
size_t ps_trajectory_loss_count(const struct PsTrajectory *trajectory);

// # Safety
// `losses` must be valid for `len` writes; `len` must equal
// [`ps_trajectory_loss_count`].
enum PsStatus ps_trajectory_losses(const struct PsTrajectory *trajectory,
                                   double *losses,
                                   size_t len);

// # Safety
// `params` must be valid for `len` writes.
enum PsStatus ps_trajectory_final_params(const struct PsTrajectory *trajectory,
                                         double *params,
                                         size_t len);

// Parses and validates a JSON experiment configuration.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for one write.
enum PsStatus ps_config_from_json(const char *json, struct PsConfig **out);

// # Safety
// `config` must be null or a live handle.
void ps_config_free(struct PsConfig *config);

// # Safety
// `config` must be a live handle.
enum PsStatus ps_config_set_seed(struct PsConfig *config, uint64_t seed);

// Runs an experiment subcommand (e.g. "train", "hessian-walk") under
// `out_root` and writes the run directory path, NUL-terminated, to
// `dir_buf`. When the buffer is too short nothing is written to it and
// `BufferTooSmall` is returned; `dir_len` (if not null) always receives the
// length the path needs, terminator included. A probe failure still
// produces a run directory and reports `ProbeFailed`.
//
// # Safety
// Strings must be NUL-terminated; `dir_buf` must be valid for `buf_len`
// writes, or null with `buf_len` 0.
enum PsStatus ps_run_experiment(const struct PsConfig *config,
                                const char *subcommand,
                                const char *out_root,
                                char *dir_buf,
                                size_t buf_len,
                                size_t *dir_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINNSCAPE_H */
