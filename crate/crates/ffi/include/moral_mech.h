#ifndef MORAL_MECH_H
#define MORAL_MECH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  MM_STATUS_OK = 0,
  MM_STATUS_NULL_POINTER = 1,
  MM_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or rational text.
   */
  MM_STATUS_PARSE = 3,
  /**
   * Well-formed input that the operation does not accept.
   */
  MM_STATUS_INVALID_INPUT = 4,
  /**
   * A mathematical precondition does not hold (not regular, not
   * truthful, hypothesis fails, ...).
   */
  MM_STATUS_PRECONDITION = 5,
  /**
   * The search space exceeds the work cap.
   */
  MM_STATUS_TOO_LARGE = 6,
  /**
   * An internal invariant failed.
   */
  MM_STATUS_INTERNAL = 7,
  MM_STATUS_PANIC = 8,
} MmStatus;

/**
 * A discrete value distribution on an evenly spaced grid.
 */
typedef struct MmDistribution MmDistribution;

/**
 * A joint distribution over value profiles.
 */
typedef struct MmJoint MmJoint;

/**
 * A payment grid run as a profit maximizer.
 */
typedef struct MmMechanism MmMechanism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *mm_last_error(void);

/**
 * Library version as a static string.
 */
const char *mm_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mm_string_free(char *s);

/**
 * Uniform distribution on `points` values `0, 1/(points-1), ..., 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
MmStatus mm_distribution_uniform(size_t points, MmDistribution **out);

/**
 * Parses `{"eps": ..., "mass": [...]}`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
MmStatus mm_distribution_from_json(const char *json, MmDistribution **out);

/**
 * # Safety
 * `d` must come from this library and not be freed twice. Null is ignored.
 */
void mm_distribution_free(MmDistribution *d);

/**
 * Parses `{"n": ..., "atoms": [{"profile": [...], "weight": ...}]}`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
MmStatus mm_joint_from_json(const char *json, MmJoint **out);

/**
 * Independent joint of `n` distributions.
 *
 * # Safety
 * `ds` must point to `n` valid distribution handles; `out` must be valid.
 */
MmStatus mm_joint_product(const MmDistribution *const *ds, size_t n, MmJoint **out);

/**
 * # Safety
 * `j` must come from this library and not be freed twice. Null is ignored.
 */
void mm_joint_free(MmJoint *j);

/**
 * Parses a payment grid file.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
MmStatus mm_mechanism_from_json(const char *json, MmMechanism **out);

/**
 * Serializes a mechanism as a payment grid file.
 *
 * # Safety
 * `m` must be a valid handle and `out` a valid pointer.
 */
MmStatus mm_mechanism_to_json(const MmMechanism *m, char **out);

/**
 * # Safety
 * `m` must come from this library and not be freed twice. Null is ignored.
 */
void mm_mechanism_free(MmMechanism *m);

/**
 * Whether `m` is `alpha`-moral. With `report_json` non-null, the full
 * report (1-based deviators) is returned there.
 *
 * # Safety
 * Pointers must be valid; `alpha` nul-terminated.
 */
MmStatus mm_check_alpha_moral(const MmMechanism *m,
                              const char *alpha,
                              bool *moral,
                              char **report_json);

/**
 * # Safety
 * Pointers must be valid.
 */
MmStatus mm_is_truthful(const MmMechanism *m, bool *truthful);

/**
 * Expected revenue as a rational string.
 *
 * # Safety
 * Pointers must be valid.
 */
MmStatus mm_expected_revenue(const MmMechanism *m, const MmJoint *j, char **out);

/**
 * Revenue-maximizing grid over the joint's supports. `truthful` selects
 * the truthful space; otherwise the `alpha`-moral space is searched.
 * `cap` bounds the search work (0 for the default). The optimal revenue
 * goes to `revenue` when it is non-null.
 *
 * # Safety
 * Pointers must be valid; `alpha` nul-terminated.
 */
MmStatus mm_search_optimal(const MmJoint *j,
                           bool truthful,
                           const char *alpha,
                           uint64_t cap,
                           MmMechanism **out,
                           char **revenue);

/**
 * Closed-form optimal truthful grid for `n` independent regular players.
 *
 * # Safety
 * `ds` must point to `n` valid handles; `out` must be valid.
 */
MmStatus mm_myerson_grid(const MmDistribution *const *ds, size_t n, MmMechanism **out);

/**
 * Lifts a 1-moral grid over iid values from `d` to a truthful grid. The
 * step trace is returned as JSON when `trace_json` is non-null.
 *
 * # Safety
 * Pointers must be valid.
 */
MmStatus mm_lift(const MmMechanism *m,
                 const MmDistribution *d,
                 MmMechanism **out,
                 char **trace_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MORAL_MECH_H */
