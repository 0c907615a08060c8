#ifndef DIFFHARM_H
#define DIFFHARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DhStatus {
  DH_STATUS_OK = 0,
  DH_STATUS_NULL_POINTER = 1,
  DH_STATUS_INVALID_ARGUMENT = 2,
  DH_STATUS_LENGTH_MISMATCH = 3,
  DH_STATUS_NUMERIC = 4,
  DH_STATUS_PARSE = 5,
  DH_STATUS_PANIC = 6,
} DhStatus;

/**
 * Smoothing filter handle.
 */
typedef struct DhFilter DhFilter;

/**
 * Directed pair handle.
 */
typedef struct DhPair DhPair;

/**
 * Admissible system handle.
 */
typedef struct DhSystem DhSystem;

typedef struct DhFrameCheck {
  double sum_sq;
  double energy;
  double full_energy;
  uint32_t levels;
  bool lower_ok;
  bool upper_ok;
} DhFrameCheck;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dh_last_error(void);

/**
 * Library version as a static string.
 */
const char *dh_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void dh_string_free(char *s);

/**
 * Binomial smoothstep filter of the given order (>= 1).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DhStatus dh_filter_new(uint32_t order, struct DhFilter **out_filter);

/**
 * Sharp cutoff filter.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DhStatus dh_filter_cutoff_new(struct DhFilter **out_filter);

/**
 * # Safety
 * `filter` must be a live handle and `out_value` valid for writes.
 */
enum DhStatus dh_filter_eval(const struct DhFilter *filter, double u, double *out_value);

/**
 * # Safety
 * `filter` must come from this library and not be freed twice.
 */
void dh_filter_free(struct DhFilter *filter);

/**
 * Trigonometric system on `n` equispaced circle points with frequencies up to `max_freq`.
 *
 * # Safety
 * `out_system` must be valid for writes.
 */
enum DhStatus dh_system_circle_new(uintptr_t n, uintptr_t max_freq, struct DhSystem **out_system);

/**
 * Parses a system from its JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_system` valid for writes.
 */
enum DhStatus dh_system_from_json(const char *json, struct DhSystem **out_system);

/**
 * Serializes a system. Release the string with [`dh_string_free`].
 *
 * # Safety
 * `system` must be a live handle; `out_json` valid for writes.
 */
enum DhStatus dh_system_to_json(const struct DhSystem *system, char **out_json);

/**
 * Number of points and number of stored modes.
 *
 * # Safety
 * `system` must be a live handle; outputs valid for writes.
 */
enum DhStatus dh_system_dims(const struct DhSystem *system,
                             uintptr_t *out_points,
                             uintptr_t *out_modes);

/**
 * Copies the eigenvalues into `buf`, which must hold exactly the number of modes.
 *
 * # Safety
 * `system` must be a live handle; `buf` valid for `len` writes.
 */
enum DhStatus dh_system_eigenvalues(const struct DhSystem *system, double *buf, uintptr_t len);

/**
 * Filtered approximation `sigma_n(h, f)` on a system.
 *
 * # Safety
 * Handles must be live; `f_re`/`out_re` hold `len` values, `f_im`/`out_im` may be null.
 */
enum DhStatus dh_system_sigma(const struct DhSystem *system,
                              const struct DhFilter *filter,
                              double n,
                              const double *f_re,
                              const double *f_im,
                              uintptr_t len,
                              double *out_re,
                              double *out_im);

/**
 * # Safety
 * `system` must come from this library and not be freed twice.
 */
void dh_system_free(struct DhSystem *system);

/**
 * Builds a directed pair from a real `n x n` row-major weight matrix, keeping `k` modes.
 *
 * # Safety
 * `data` holds `n * n` values; `out_pair` valid for writes.
 */
enum DhStatus dh_pair_from_matrix(const double *data,
                                  uintptr_t n,
                                  uintptr_t k,
                                  struct DhPair **out_pair);

/**
 * Whether the pair came from an undirected (symmetric) matrix.
 *
 * # Safety
 * `pair` must be a live handle; `out_flag` valid for writes.
 */
enum DhStatus dh_pair_is_degenerate(const struct DhPair *pair, double tol, bool *out_flag);

/**
 * Filtered approximation of `U f` on the base system of a pair.
 *
 * # Safety
 * As for [`dh_system_sigma`].
 */
enum DhStatus dh_pair_sigma(const struct DhPair *pair,
                            const struct DhFilter *filter,
                            double n,
                            const double *f_re,
                            const double *f_im,
                            uintptr_t len,
                            double *out_re,
                            double *out_im);

/**
 * Frame-inequality check for one function.
 *
 * # Safety
 * As for [`dh_pair_sigma`]; `out_check` valid for writes.
 */
enum DhStatus dh_pair_frame_check(const struct DhPair *pair,
                                  const struct DhFilter *filter,
                                  const double *f_re,
                                  const double *f_im,
                                  uintptr_t len,
                                  struct DhFrameCheck *out_check);

/**
 * # Safety
 * `pair` must come from this library and not be freed twice.
 */
void dh_pair_free(struct DhPair *pair);

/**
 * Polar decomposition `W = P U` of a real row-major `n x n` matrix.
 * Both factors are real for real input and are written row-major.
 *
 * # Safety
 * `data`, `out_p`, `out_u` hold `n * n` values; `out_rank` may be null.
 */
enum DhStatus dh_polar_decompose(const double *data,
                                 uintptr_t n,
                                 double *out_p,
                                 double *out_u,
                                 uintptr_t *out_rank);

/**
 * Orthonormal Jacobi polynomial of degree `k` for weight `(1-x)^alpha (1+x)^beta`.
 *
 * # Safety
 * `out_value` must be valid for writes.
 */
enum DhStatus dh_jacobi_eval(double alpha, double beta, uintptr_t k, double x, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFHARM_H */
