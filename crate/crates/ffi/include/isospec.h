#ifndef ISOSPEC_H
#define ISOSPEC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Frobenius bound on `A A^H - I` accepted by [`iso_jmap_conjugate`].
 */
#define UNITARY_TOL 1e-10

/**
 * Result codes of every fallible call.
 */
typedef enum IsoStatus {
  ISO_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ISO_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ISO_STATUS_INVALID_UTF8 = 2,
  /**
   * A parameter is out of range (dimension, step size, tolerance...).
   */
  ISO_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A JSON document did not match its schema.
   */
  ISO_STATUS_SCHEMA = 4,
  /**
   * A numerical precondition failed (singular point, divergence...).
   */
  ISO_STATUS_NUMERICAL = 5,
  /**
   * Two j-maps have different spectra where equal ones are required.
   */
  ISO_STATUS_SPECTRA_DIFFER = 6,
  ISO_STATUS_IO = 7,
  /**
   * A bug: the library panicked. The call had no effect.
   */
  ISO_STATUS_INTERNAL = 8,
} IsoStatus;

/**
 * Opaque j-map handle.
 */
typedef struct IsoJMap IsoJMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call into the library.
 */
const char *iso_last_error_message(void);

/**
 * Library version, a static string.
 */
const char *iso_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void iso_string_free(char *s);

/**
 * Parses a j-map document `{"m": ..., "j1": ..., "j2": ...}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a writable pointer.
 */
enum IsoStatus iso_jmap_from_json(const char *json, struct IsoJMap **out);

/**
 * Canonical JSON text of a j-map.
 *
 * # Safety
 * `j` must be a live handle; `out` a writable pointer.
 */
enum IsoStatus iso_jmap_to_json(const struct IsoJMap *j, char **out);

/**
 * A Gaussian random j-map in `su(m)`, `m >= 3`, drawn from `seed`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum IsoStatus iso_jmap_random(uint64_t seed, size_t m, struct IsoJMap **out);

/**
 * `A j A^H` for a unitary `A` given row-major as `2 m^2` doubles
 * (interleaved real and imaginary parts).
 *
 * # Safety
 * `a` must point to `2 m^2` doubles; `out` must be writable.
 */
enum IsoStatus iso_jmap_conjugate(const struct IsoJMap *j, const double *a, struct IsoJMap **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `j` must come from this library and not have been freed.
 */
void iso_jmap_free(struct IsoJMap *j);

/**
 * Matrix size `m` of the j-map.
 *
 * # Safety
 * `j` must be a live handle; `out` writable.
 */
enum IsoStatus iso_jmap_dim(const struct IsoJMap *j, size_t *out);

/**
 * Largest eigenvalue gap of `j_Z` and `j'_Z` over the sampling directions.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum IsoStatus iso_spectral_deviation(const struct IsoJMap *a,
                                      const struct IsoJMap *b,
                                      double *out);

/**
 * Whether the spectral deviation is at most `tol`.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum IsoStatus iso_is_isospectral_pair(const struct IsoJMap *a,
                                       const struct IsoJMap *b,
                                       double tol,
                                       bool *out);

/**
 * Genericity at the default rank tolerance.
 *
 * # Safety
 * `j` must be live; `out` writable.
 */
enum IsoStatus iso_is_generic(const struct IsoJMap *j, bool *out);

/**
 * `tr((j1^2 + j2^2)^2)`.
 *
 * # Safety
 * `j` must be live; `out` writable.
 */
enum IsoStatus iso_trace_invariant(const struct IsoJMap *j, double *out);

/**
 * Non-equivalence certificate as JSON; `inequivalent` is set when the
 * certificate proves the maps inequivalent. Either output may be null.
 *
 * # Safety
 * Handles must be live; non-null outputs writable.
 */
enum IsoStatus iso_certify(const struct IsoJMap *a,
                           const struct IsoJMap *b,
                           char **json_out,
                           bool *inequivalent);

/**
 * Orbit geometry of the stratum `|v1| = a, |v2| = b` in `S^{2n+1}` with
 * weights `(p, q)`: the Gram matrix (row-major, 4 doubles) and the area.
 *
 * # Safety
 * `gram_out` must hold 4 doubles or be null; `area_out` writable or null.
 */
enum IsoStatus iso_orbit_stratum(size_t n,
                                 uint32_t p,
                                 uint32_t q,
                                 double a,
                                 double b,
                                 double *gram_out,
                                 double *area_out);

/**
 * Angle between the two torus generators on `|v1| = |v2| = a`.
 *
 * # Safety
 * `out` must be writable.
 */
enum IsoStatus iso_orbit_angle(size_t n, uint32_t p, uint32_t q, double a, double *out);

/**
 * Full verification report for a pair, as canonical JSON. `config_json` is
 * a run configuration document or null for the defaults. The call succeeds
 * even when checks fail; `all_passed` (optional) carries the verdict.
 *
 * # Safety
 * Handles must be live; `config_json` null or NUL-terminated; `report_out`
 * writable; `all_passed` writable or null.
 */
enum IsoStatus iso_verify_pair(const struct IsoJMap *a,
                               const struct IsoJMap *b,
                               const char *config_json,
                               char **report_out,
                               bool *all_passed);

/**
 * Traces an isospectral family; writes `{"trivial", "restarts", "members"}`
 * with members in the j-map schema.
 *
 * # Safety
 * `out` must be writable.
 */
enum IsoStatus iso_generate_family(uint64_t seed,
                                   size_t m,
                                   size_t steps,
                                   double step_size,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISOSPEC_H */
