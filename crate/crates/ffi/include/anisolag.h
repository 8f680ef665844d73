#ifndef ANISOLAG_H
#define ANISOLAG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AnisolagStatus {
  ANISOLAG_STATUS_OK = 0,
  ANISOLAG_STATUS_NULL_POINTER = 1,
  ANISOLAG_STATUS_INVALID_UTF8 = 2,
  ANISOLAG_STATUS_PARSE = 3,
  ANISOLAG_STATUS_DIMENSION = 4,
  ANISOLAG_STATUS_OUTSIDE_DOMAIN = 5,
  ANISOLAG_STATUS_INVALID_PARAM = 6,
  ANISOLAG_STATUS_NON_FINITE = 7,
  ANISOLAG_STATUS_CONFIG = 8,
  ANISOLAG_STATUS_IO = 9,
  ANISOLAG_STATUS_BUFFER_TOO_SMALL = 10,
  ANISOLAG_STATUS_PANIC = 11,
} AnisolagStatus;

typedef enum AnisolagKind {
  ANISOLAG_KIND_EUCLIDEAN = 0,
  ANISOLAG_KIND_ANISOTROPIC = 1,
} AnisolagKind;

typedef enum AnisolagTransform {
  ANISOLAG_TRANSFORM_LIFT = 0,
  ANISOLAG_TRANSFORM_PUSHFORWARD = 1,
  ANISOLAG_TRANSFORM_PROJECT = 2,
} AnisolagTransform;

typedef enum AnisolagCheck {
  ANISOLAG_CHECK_KERNEL_CONSTANCY = 0,
  ANISOLAG_CHECK_CONVEXITY = 1,
} AnisolagCheck;

/**
 * Opaque anisotropy handle.
 */
typedef struct AnisolagAnisotropy AnisolagAnisotropy;

/**
 * Opaque horizontal-graph handle.
 */
typedef struct AnisolagGraph AnisolagGraph;

/**
 * Opaque Lagrangian handle.
 */
typedef struct AnisolagLagrangian AnisolagLagrangian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *anisolag_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t anisolag_last_error(char *buf, uintptr_t len);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer returned through a `char **` out-parameter
 * of this library that has not been freed.
 */
void anisolag_string_free(char *s);

/**
 * Catalog anisotropy with default parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum AnisolagStatus anisolag_anisotropy_builtin(const char *name, struct AnisolagAnisotropy **out);

/**
 * Anisotropy from a JSON config block, e.g. `{"name": "grushin"}` or
 * `{"n": 2, "m": 1, "box": [[0,1],[0,1]], "coeffs": [["1","0"]]}`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum AnisolagStatus anisolag_anisotropy_from_json(const char *config,
                                                  struct AnisolagAnisotropy **out);

/**
 * # Safety
 * `a` must be null or a live handle from this library.
 */
void anisolag_anisotropy_free(struct AnisolagAnisotropy *a);

/**
 * Writes the ambient dimension `n` and field count `m`.
 *
 * # Safety
 * `a` must be a live handle; `n` and `m` must be writable.
 */
enum AnisolagStatus anisolag_anisotropy_dims(const struct AnisolagAnisotropy *a,
                                             uintptr_t *n,
                                             uintptr_t *m);

/**
 * Coefficient matrix `C(x)`, `m x n` row-major, into `out[0..out_len]`.
 *
 * # Safety
 * `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
 */
enum AnisolagStatus anisolag_coefficient_matrix(const struct AnisolagAnisotropy *a,
                                                const double *x,
                                                uintptr_t x_len,
                                                double *out,
                                                uintptr_t out_len);

/**
 * Moore-Penrose pseudo-inverse of the `rows x cols` row-major matrix `c`.
 * Writes the `cols x rows` result row-major into `out` and the numerical
 * rank into `rank`.
 *
 * # Safety
 * `c` must hold `rows * cols` doubles, `out` `out_len` doubles, and `rank`
 * must be writable.
 */
enum AnisolagStatus anisolag_pinv(const double *c,
                                  uintptr_t rows,
                                  uintptr_t cols,
                                  double *out,
                                  uintptr_t out_len,
                                  uintptr_t *rank);

/**
 * Parses a Lagrangian `f(x, q)` over `a`. Euclidean Lagrangians take `n`
 * arguments, anisotropic ones `m`.
 *
 * # Safety
 * `a` must be a live handle, `expr` NUL-terminated, `out` writable.
 */
enum AnisolagStatus anisolag_lagrangian_parse(const struct AnisolagAnisotropy *a,
                                              enum AnisolagKind kind,
                                              const char *expr,
                                              struct AnisolagLagrangian **out);

/**
 * Lift, pushforward or projection of `f` through `a` as a new handle.
 *
 * # Safety
 * `f` and `a` must be live handles; `out` must be writable.
 */
enum AnisolagStatus anisolag_lagrangian_transform(const struct AnisolagLagrangian *f,
                                                  const struct AnisolagAnisotropy *a,
                                                  enum AnisolagTransform transform,
                                                  struct AnisolagLagrangian **out);

/**
 * `f(x, arg)`.
 *
 * # Safety
 * `x` and `arg` must hold `x_len` and `arg_len` doubles; `value` must be
 * writable.
 */
enum AnisolagStatus anisolag_lagrangian_eval(const struct AnisolagLagrangian *f,
                                             const double *x,
                                             uintptr_t x_len,
                                             const double *arg,
                                             uintptr_t arg_len,
                                             double *value);

/**
 * JSON description `{kind, arg_dim, expr}` of `f`.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
enum AnisolagStatus anisolag_lagrangian_describe(const struct AnisolagLagrangian *f, char **out);

/**
 * # Safety
 * `f` must be null or a live handle from this library.
 */
void anisolag_lagrangian_free(struct AnisolagLagrangian *f);

/**
 * Runs a sampled check with about `samples` draws and writes the JSON report
 * to `report`. The status is `Ok` whether or not the check passes; read
 * `"pass"` from the report.
 *
 * # Safety
 * `f` and `a` must be live handles; `report` must be writable.
 */
enum AnisolagStatus anisolag_check(const struct AnisolagLagrangian *f,
                                   const struct AnisolagAnisotropy *a,
                                   enum AnisolagCheck check,
                                   uintptr_t samples,
                                   uint64_t seed,
                                   double tol,
                                   char **report);

/**
 * Horizontal graph over `resolution` cells per axis of the anisotropy
 * domain. `tau_span <= 0` selects the default.
 *
 * # Safety
 * `a` must be a live handle; `out` must be writable.
 */
enum AnisolagStatus anisolag_graph_build(const struct AnisolagAnisotropy *a,
                                         uintptr_t resolution,
                                         uintptr_t radius,
                                         double tau_span,
                                         struct AnisolagGraph **out);

/**
 * Graph distance between the cells nearest `x` and `y` (both of length
 * `dim`). `finite` is set to 0 and `distance` to infinity when `y` is
 * unreachable.
 *
 * # Safety
 * `x`, `y` must hold `dim` doubles; `distance` and `finite` must be writable.
 */
enum AnisolagStatus anisolag_cc_distance(const struct AnisolagGraph *g,
                                         const double *x,
                                         const double *y,
                                         uintptr_t dim,
                                         double *distance,
                                         int32_t *finite);

/**
 * # Safety
 * `g` must be null or a live handle from this library.
 */
void anisolag_graph_free(struct AnisolagGraph *g);

/**
 * Runs the command line `anisolag argv[0] argv[1] ...` (without the program
 * name) in-process. Writes the report to `output` and the exit code to
 * `exit_code`.
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings; `output` and `exit_code`
 * must be writable.
 */
enum AnisolagStatus anisolag_run(uintptr_t argc,
                                 const char *const *argv,
                                 char **output,
                                 int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANISOLAG_H */
