#ifndef PHASESADDLE_H
#define PHASESADDLE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PsBackend {
  PS_BACKEND_FINITE_DIFFERENCE = 0,
  PS_BACKEND_SPECTRAL = 1,
} PsBackend;

typedef enum PsMethod {
  PS_METHOD_IMF_PROJECTED = 0,
  PS_METHOD_IMF_H1 = 1,
  PS_METHOD_GAD_PROJECTED = 2,
  PS_METHOD_GAD_L2 = 3,
} PsMethod;

typedef enum PsMetric {
  PS_METRIC_PROJECTED_L2 = 0,
  PS_METRIC_H_MINUS1 = 1,
} PsMetric;

typedef enum PsSearchStatus {
  PS_SEARCH_STATUS_CONVERGED = 0,
  PS_SEARCH_STATUS_MAX_CYCLES = 1,
  PS_SEARCH_STATUS_DIVERGED = 2,
} PsSearchStatus;

// Result code of every fallible call.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_INVALID_GRID = 3,
  PS_STATUS_GRID_MISMATCH = 4,
  PS_STATUS_NON_FINITE = 5,
  PS_STATUS_PRECONDITION = 6,
  PS_STATUS_NOT_CONVERGED = 7,
  PS_STATUS_BREAKDOWN = 8,
  PS_STATUS_DEGENERATE_DIRECTION = 9,
  PS_STATUS_CONFIG = 10,
  PS_STATUS_IO = 11,
  PS_STATUS_FORMAT = 12,
  PS_STATUS_PANIC = 13,
} PsStatus;

// Opaque energy model.
typedef struct PsModel PsModel;

// Opaque search result.
typedef struct PsResult PsResult;

typedef struct PsMinMode {
  double eigenvalue;
  double residual;
  size_t iterations;
  bool converged;
} PsMinMode;

// Search settings. Negative `stabilization` or `rank_one_shift` selects the
// model default.
typedef struct PsSearchConfig {
  enum PsMethod method;
  double alpha;
  double beta;
  double dt;
  size_t inner_iters;
  double inner_tol;
  size_t max_inner_iters;
  double outer_tol;
  size_t max_cycles;
  double gad_gamma;
  uint64_t seed;
  double stabilization;
  double rank_one_shift;
  double minmode_tol;
  size_t minmode_max_iters;
  // GAD start direction: 0 seeded random, 1 min mode at φ0.
  bool v0_minmode;
  bool wall_time;
} PsSearchConfig;

typedef struct PsTraceRecord {
  size_t cycle;
  size_t inner_iters;
  double residual_l2;
  double energy;
  double min_eig;
  double wall_s;
} PsTraceRecord;

typedef struct PsIndexReport {
  double lambda1;
  double lambda2;
  bool is_index1;
  bool degenerate;
  double residual;
  double mean;
  size_t translation_modes;
} PsIndexReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *ps_last_error_message(void);

// Ginzburg-Landau model on a 1D periodic grid of `n` points over `[0, length)`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsStatus ps_model_gl_new(size_t n,
                              double length,
                              double kappa,
                              double mass,
                              enum PsBackend backend_kind,
                              struct PsModel **out);

// Landau-Brazovskii model on a 2D periodic `nx × ny` spectral grid.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsStatus ps_model_lb_new(size_t nx,
                              size_t ny,
                              double lx,
                              double ly,
                              double tau,
                              double xi,
                              double gamma,
                              double mass,
                              struct PsModel **out);

// Model described by the `[model]` table of a TOML run config.
//
// # Safety
// `path` must be a NUL-terminated string; `out` as for [`ps_model_gl_new`].
enum PsStatus ps_model_from_config(const char *path, struct PsModel **out);

// # Safety
// `model` must be null or a handle from a `ps_model_*` constructor that has
// not been freed.
void ps_model_free(struct PsModel *model);

// Number of grid points, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ps_model_len(const struct PsModel *model);

// `F(φ)`.
//
// # Safety
// `phi` must point to `len` doubles; `energy` to one writable double.
enum PsStatus ps_energy(const struct PsModel *model, const double *phi, size_t len, double *energy);

// The unprojected L² gradient `δF/δφ`.
//
// # Safety
// `phi` and `out` must each point to `len` doubles.
enum PsStatus ps_gradient(const struct PsModel *model, const double *phi, size_t len, double *out);

// Minimum mode of the Hessian at `phi`. On non-convergence the best
// iterate is still written and `PsStatus::NotConverged` is returned.
//
// # Safety
// `phi` and `eigenvector` must each point to `len` doubles; `info` to one
// writable [`PsMinMode`].
enum PsStatus ps_min_mode(const struct PsModel *model,
                          const double *phi,
                          size_t len,
                          enum PsMetric which,
                          double tolerance,
                          size_t max_iterations,
                          uint64_t seed,
                          double *eigenvector,
                          struct PsMinMode *info);

// Default settings for `which`.
struct PsSearchConfig ps_search_config_default(enum PsMethod which);

// Runs a saddle search from `phi0`. A diverged search still yields a result
// handle; inspect it with [`ps_result_status`].
//
// # Safety
// `phi0` must point to `len` doubles, `config` to one [`PsSearchConfig`],
// `out` to writable storage for one handle.
enum PsStatus ps_search(const struct PsModel *model,
                        const double *phi0,
                        size_t len,
                        const struct PsSearchConfig *config,
                        struct PsResult **out);

// # Safety
// `result` must be null or a live handle from [`ps_search`].
void ps_result_free(struct PsResult *result);

// # Safety
// `result` must be a live handle.
enum PsSearchStatus ps_result_status(const struct PsResult *result);

// Final eigenvalue estimate, NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double ps_result_lambda(const struct PsResult *result);

// Final ‖PδF‖, NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double ps_result_residual(const struct PsResult *result);

// Largest mass drift over the run, NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double ps_result_mass_drift(const struct PsResult *result);

// Copies the final state into `out`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum PsStatus ps_result_phi(const struct PsResult *result, double *out, size_t len);

// Copies the final direction into `out`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum PsStatus ps_result_v(const struct PsResult *result, double *out, size_t len);

// Number of trace records, 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t ps_result_trace_len(const struct PsResult *result);

// # Safety
// `out` must point to one writable [`PsTraceRecord`].
enum PsStatus ps_result_trace_record(const struct PsResult *result,
                                     size_t index,
                                     struct PsTraceRecord *out);

// Writes the trace as CSV.
//
// # Safety
// `path` must be a NUL-terminated string.
enum PsStatus ps_result_write_trace(const struct PsResult *result, const char *path);

// Index-1 check of `phi` with the projected-L² Hessian.
//
// # Safety
// `phi` must point to `len` doubles; `report` to one writable [`PsIndexReport`].
enum PsStatus ps_verify_index1(const struct PsModel *model,
                               const double *phi,
                               size_t len,
                               double tolerance,
                               struct PsIndexReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASESADDLE_H */
