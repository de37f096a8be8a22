#ifndef LAMPERTI_KIT_H
#define LAMPERTI_KIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `LK_STATUS_OK` is zero; everything else is an error.
 */
typedef enum LkStatus {
  LK_STATUS_OK = 0,
  LK_STATUS_NULL_POINTER = 1,
  LK_STATUS_INVALID_UTF8 = 2,
  LK_STATUS_PARSE = 3,
  LK_STATUS_SPEC = 4,
  LK_STATUS_DOMAIN = 5,
  LK_STATUS_GRID = 6,
  LK_STATUS_PARTITION = 7,
  LK_STATUS_REDUCIBLE = 8,
  LK_STATUS_CONDITION = 9,
  LK_STATUS_CONFIG = 10,
  LK_STATUS_IO = 11,
  LK_STATUS_OUT_OF_RANGE = 12,
  LK_STATUS_BUFFER_TOO_SMALL = 13,
  LK_STATUS_PANIC = 99,
} LkStatus;

/**
 * A simulated MAP path `(J, xi)`.
 */
typedef struct LkMapPath LkMapPath;

/**
 * An mssMp path on its time grid.
 */
typedef struct LkMssmpPath LkMssmpPath;

/**
 * A validated MAP specification.
 */
typedef struct LkSpec LkSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lk_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Free it with
 * [`lk_string_free`].
 */
char *lk_last_error_message(void);

/**
 * # Safety
 * `s` is NULL or a string returned by this library, not yet freed.
 */
void lk_string_free(char *s);

/**
 * Parses and validates a spec document.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` points to writable storage.
 */
enum LkStatus lk_spec_from_json(const char *json, struct LkSpec **out);

/**
 * Writes the violations of a spec document as a JSON array of
 * `{"field", "message"}` objects (empty when valid). Returns `LK_STATUS_SPEC` when
 * there is at least one violation.
 *
 * # Safety
 * As for [`lk_spec_from_json`].
 */
enum LkStatus lk_spec_validate_json(const char *json, char **violations);

/**
 * # Safety
 * `spec` is NULL or a live handle.
 */
void lk_spec_free(struct LkSpec *spec);

/**
 * # Safety
 * `spec` is a live handle; `out` points to writable storage.
 */
enum LkStatus lk_spec_to_json(const struct LkSpec *spec, char **out);

/**
 * Dimension `d` of the spec, or 0 for a NULL handle.
 *
 * # Safety
 * `spec` is NULL or a live handle.
 */
size_t lk_spec_dimension(const struct LkSpec *spec);

/**
 * Number of chain states, or 0 for a NULL handle.
 *
 * # Safety
 * `spec` is NULL or a live handle.
 */
size_t lk_spec_states(const struct LkSpec *spec);

/**
 * Fills `out` (row-major, `n * n` doubles) with the matrix exponent `A(u)`.
 * Returns `LK_STATUS_DOMAIN` when some Lévy exponent is infinite at `u`; finite
 * entries are still written and infinite ones are `+inf`.
 *
 * # Safety
 * `u` holds `u_len` doubles and `out` has room for `out_len` doubles.
 */
enum LkStatus lk_exponent_matrix(const struct LkSpec *spec,
                                 const double *u,
                                 size_t u_len,
                                 double *out,
                                 size_t out_len);

/**
 * Classification report as JSON. `alpha` may be NULL to use the spec's
 * index; `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `alpha` is NULL or holds `alpha_len` doubles; `out` points to writable
 * storage.
 */
enum LkStatus lk_classify_json(const struct LkSpec *spec,
                               const double *alpha,
                               size_t alpha_len,
                               double tol,
                               char **out);

/**
 * Samples one MAP path from state 0 at the origin.
 *
 * # Safety
 * `spec` is a live handle; `out` points to writable storage.
 */
enum LkStatus lk_sample_map_path(const struct LkSpec *spec,
                                 double horizon,
                                 double dt,
                                 uint64_t seed,
                                 uint64_t replication,
                                 struct LkMapPath **out);

/**
 * # Safety
 * `path` is NULL or a live handle.
 */
void lk_map_path_free(struct LkMapPath *path);

/**
 * Writes the killing time through `at` and returns 1 if the path was
 * killed, 0 otherwise (also for a NULL handle).
 *
 * # Safety
 * `path` is NULL or a live handle; `at` is NULL or writable.
 */
int32_t lk_map_path_killed_at(const struct LkMapPath *path, double *at);

/**
 * The path as CSV (`t,state_index,J1..Jd,xi1..xid`).
 *
 * # Safety
 * `path` is a live handle; `out` points to writable storage.
 */
enum LkStatus lk_map_path_csv(const struct LkMapPath *path, char **out);

/**
 * Lamperti transform with index `alpha`.
 *
 * # Safety
 * `path` is a live handle; `alpha` holds `alpha_len` doubles; `out` points to
 * writable storage.
 */
enum LkStatus lk_forward_transform(const struct LkMapPath *path,
                                   const double *alpha,
                                   size_t alpha_len,
                                   struct LkMssmpPath **out);

/**
 * Recovers the MAP path from an mssMp path.
 *
 * # Safety
 * As for [`lk_forward_transform`].
 */
enum LkStatus lk_inverse_transform(const struct LkMssmpPath *path,
                                   const double *alpha,
                                   size_t alpha_len,
                                   struct LkMapPath **out);

/**
 * # Safety
 * `path` is NULL or a live handle.
 */
void lk_mssmp_path_free(struct LkMssmpPath *path);

/**
 * Number of grid points, or 0 for a NULL handle.
 *
 * # Safety
 * `path` is NULL or a live handle.
 */
size_t lk_mssmp_path_len(const struct LkMssmpPath *path);

/**
 * Dimension of the path, or 0 for a NULL handle.
 *
 * # Safety
 * `path` is NULL or a live handle.
 */
size_t lk_mssmp_path_dim(const struct LkMssmpPath *path);

/**
 * Grid point `k`: its time, `d` coordinates into `x` and the orthant index
 * (-1 once absorbed).
 *
 * # Safety
 * `path` is a live handle; `t` and `label` are writable; `x` has room for
 * `x_len` doubles.
 */
enum LkStatus lk_mssmp_path_point(const struct LkMssmpPath *path,
                                  size_t k,
                                  double *t,
                                  double *x,
                                  size_t x_len,
                                  int64_t *label);

/**
 * Lifetime: returns 1 and writes `zeta` if absorbed, 0 and writes the
 * censoring time otherwise; -1 for a NULL handle.
 *
 * # Safety
 * `path` is NULL or a live handle; `time` is NULL or writable.
 */
int32_t lk_mssmp_path_lifetime(const struct LkMssmpPath *path, double *time);

/**
 * The path as CSV (`t,X1..Xd,orthant_index`).
 *
 * # Safety
 * `path` is a live handle; `out` points to writable storage.
 */
enum LkStatus lk_mssmp_path_csv(const struct LkMssmpPath *path, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAMPERTI_KIT_H */
