#ifndef QDOPT_H
#define QDOPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QdStatus {
  QD_STATUS_OK = 0,
  QD_STATUS_INVALID_ARGUMENT = 1,
  QD_STATUS_LENGTH_MISMATCH = 2,
  QD_STATUS_NOT_CONVERGED = 3,
  QD_STATUS_CONDITIONS_VIOLATED = 4,
  QD_STATUS_IO = 5,
  QD_STATUS_NULL_POINTER = 6,
  QD_STATUS_BUFFER_TOO_SMALL = 7,
  QD_STATUS_PANIC = 8,
} QdStatus;

typedef enum QdStart {
  QD_START_ADVERSARIAL = 0,
  QD_START_SCHWARZ = 1,
  QD_START_RANDOM = 2,
} QdStart;

// Opaque mesh handle.
typedef struct QdMesh QdMesh;

// Opaque optimization result.
typedef struct QdReport QdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *qd_last_error_message(void);

// # Safety
// `out` must be a valid pointer to a `QdMesh*`.
enum QdStatus qd_mesh_disk_radial(double radius, size_t n, struct QdMesh **out);

// # Safety
// `out` must be a valid pointer to a `QdMesh*`.
enum QdStatus qd_mesh_disk_polar(double radius, size_t n_r, size_t n_t, struct QdMesh **out);

// # Safety
// `out` must be a valid pointer to a `QdMesh*`.
enum QdStatus qd_mesh_rectangle(double a, double b, size_t nx, size_t ny, struct QdMesh **out);

// # Safety
// `mesh` must be null or a handle returned by a mesh constructor, freed once.
void qd_mesh_free(struct QdMesh *mesh);

// Number of cells; 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live mesh handle.
size_t qd_mesh_len(const struct QdMesh *mesh);

// # Safety
// `mesh` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_mesh_measures(const struct QdMesh *mesh, double *out, size_t len);

// Distance of each cell center from the domain center.
//
// # Safety
// `mesh` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_mesh_radial_distance(const struct QdMesh *mesh, double *out, size_t len);

// Nonlinear ground state for fixed `p`, `q` (one value per cell).
// `u_out` may be null; otherwise it receives the normalized state.
//
// # Safety
// `p`, `q` and a non-null `u_out` must each hold `len` doubles; `lambda_out`
// must be valid.
enum QdStatus qd_solve(const struct QdMesh *mesh,
                       const double *p,
                       const double *q,
                       size_t len,
                       double gamma,
                       double *lambda_out,
                       double *u_out);

// Evaluates both admissibility conditions for classes given by their
// nonzero levels (the rest of the domain is zero).
//
// # Safety
// Level arrays must hold `p_n` / `q_n` doubles; `p_ok`, `q_ok` must be valid.
enum QdStatus qd_check_admissibility(const struct QdMesh *mesh,
                                     const double *p_values,
                                     const double *p_measures,
                                     size_t p_n,
                                     const double *q_values,
                                     const double *q_measures,
                                     size_t q_n,
                                     double gamma,
                                     bool *p_ok,
                                     bool *q_ok);

// Alternating minimization over the classes of p₀ and q₀. `seed` is used
// by the random start only. Admissibility is not checked here.
//
// # Safety
// Level arrays must hold `p_n` / `q_n` doubles; `out` must be valid.
enum QdStatus qd_optimize(const struct QdMesh *mesh,
                          const double *p_values,
                          const double *p_measures,
                          size_t p_n,
                          const double *q_values,
                          const double *q_measures,
                          size_t q_n,
                          double gamma,
                          size_t max_iters,
                          double tol,
                          enum QdStart start,
                          uint64_t seed,
                          struct QdReport **out);

// # Safety
// `report` must be null or a handle from [`qd_optimize`], freed once.
void qd_report_free(struct QdReport *report);

// Final λ; NaN for a null handle.
//
// # Safety
// `report` must be null or a live report handle.
double qd_report_lambda(const struct QdReport *report);

// # Safety
// `report` must be null or a live report handle.
size_t qd_report_iterations(const struct QdReport *report);

// # Safety
// `report` must be null or a live report handle.
bool qd_report_converged(const struct QdReport *report);

// # Safety
// `report` must be null or a live report handle.
bool qd_report_monotone(const struct QdReport *report);

// # Safety
// `report` must be null or a live report handle.
size_t qd_report_history_len(const struct QdReport *report);

// # Safety
// `report` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_report_history(const struct QdReport *report, double *out, size_t len);

// # Safety
// `report` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_report_p(const struct QdReport *report, double *out, size_t len);

// # Safety
// `report` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_report_q(const struct QdReport *report, double *out, size_t len);

// # Safety
// `report` must be a live handle and `out` must hold `len` doubles.
enum QdStatus qd_report_u(const struct QdReport *report, double *out, size_t len);

double qd_bessel_j0(double x);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDOPT_H */
