#ifndef MINMETRIC_H
#define MINMETRIC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MM_OK 0

#define MM_ERR_NULL_POINTER 1

#define MM_ERR_UTF8 2

#define MM_ERR_PANIC 3

#define MM_ERR_ZERO_DIRECTION 10

#define MM_ERR_DIMENSION_MISMATCH 11

#define MM_ERR_INVALID_INPUT 12

#define MM_ERR_POINT_OUTSIDE 20

#define MM_ERR_OUTSIDE_BOX 21

#define MM_ERR_OUTSIDE_DISC 22

#define MM_ERR_AT_PUNCTURE 23

#define MM_ERR_OUTSIDE_BALL 24

#define MM_ERR_SYNTAX 30

#define MM_ERR_UNKNOWN_VARIABLE 31

#define MM_ERR_DOMAIN 32

#define MM_ERR_NON_FINITE 33

#define MM_ERR_INFEASIBLE 40

#define MM_ERR_NO_CONVERGENCE 41

#define MM_ERR_CANDIDATE_INVALID 50

#define MM_ERR_HYPOTHESIS_FAILED 51

#define MM_ERR_RANK_DEFICIENT 52

#define MM_ERR_NOT_CONTAINED 53

#define MM_ERR_CHAIN_FAILED 60

#define MM_ERR_EMPTY_DOMAIN 61

#define MM_ERR_CONSTRUCTION_FAILED 62

#define MM_ERR_IO 70

typedef enum MmStatus {
  MM_STATUS_COMPLETE_HYPERBOLIC = 0,
  MM_STATUS_HYPERBOLIC = 1,
  MM_STATUS_NON_HYPERBOLIC = 2,
  MM_STATUS_UNKNOWN = 3,
} MmStatus;

/**
 * Opaque domain handle.
 */
typedef struct MmDomain MmDomain;

typedef struct MmSolverConfig {
  size_t degree;
  size_t multistarts;
  uint64_t seed;
  double margin;
} MmSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Free with `mm_string_free`.
 */
char *mm_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void mm_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *mm_version(void);

struct MmSolverConfig mm_solver_config_default(void);

/**
 * Parses a JSON domain description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t mm_domain_from_json(const char *json, struct MmDomain **out);

/**
 * # Safety
 * `d` must be NULL or a handle from `mm_domain_from_json`, not yet freed.
 */
void mm_domain_free(struct MmDomain *d);

/**
 * Ambient dimension, or 0 for NULL.
 *
 * # Safety
 * `d` must be NULL or a live handle.
 */
size_t mm_domain_dim(const struct MmDomain *d);

/**
 * # Safety
 * `p` must point to `n` doubles; `d` and `out` must be valid.
 */
int32_t mm_domain_contains(const struct MmDomain *d,
                           const double *p,
                           size_t n,
                           double margin,
                           bool *out);

/**
 * Exact metric of the unit ball at `x` in direction `u`.
 *
 * # Safety
 * `x` and `u` must point to `n` doubles; `out` must be valid.
 */
int32_t mm_bck_metric(const double *x, const double *u, size_t n, double *out);

/**
 * Best certified lower bound on g(x, v).
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `d` and `out` must be valid.
 */
int32_t mm_lower_bound(const struct MmDomain *d,
                       const double *x,
                       const double *v,
                       size_t n,
                       double *out);

/**
 * Solver upper bound on g(x, v). `cfg` may be NULL for defaults.
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `d` and `out` must be valid.
 */
int32_t mm_upper_bound(const struct MmDomain *d,
                       const double *x,
                       const double *v,
                       size_t n,
                       const struct MmSolverConfig *cfg,
                       double *out);

/**
 * Certified lower bound and chain upper bound on the distance.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; the other pointers must be valid.
 */
int32_t mm_distance(const struct MmDomain *d,
                    const double *x,
                    const double *y,
                    size_t n,
                    double *lower,
                    double *upper);

/**
 * Hyperbolicity verdict. `certificate_json` may be NULL; otherwise it
 * receives the verdict as JSON, to be freed with `mm_string_free`.
 *
 * # Safety
 * `d` and `status` must be valid.
 */
int32_t mm_classify(const struct MmDomain *d, enum MmStatus *status, char **certificate_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINMETRIC_H */
