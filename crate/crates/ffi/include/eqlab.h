#ifndef EQLAB_H
#define EQLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum EqlabStatus {
  EQLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  EQLAB_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  EQLAB_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad input: malformed JSON, out-of-range parameters, constraint violations.
   */
  EQLAB_STATUS_VALIDATION = 3,
  /**
   * The numerics failed: no convergence, singular Jacobian, degenerate functional.
   */
  EQLAB_STATUS_NUMERICAL = 4,
  /**
   * A caller-provided buffer is shorter than required.
   */
  EQLAB_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Internal panic caught at the boundary.
   */
  EQLAB_STATUS_PANIC = 6,
} EqlabStatus;

/**
 * Opaque economy handle.
 */
typedef struct EqlabEconomy EqlabEconomy;

/**
 * Opaque handle to a solved equilibrium.
 */
typedef struct EqlabEquilibrium EqlabEquilibrium;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next eqlab call on the same thread.
 */
const char *eqlab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eqlab_version(void);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void eqlab_string_free(char *s);

/**
 * Builds an economy from an economy spec JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum EqlabStatus eqlab_economy_from_json(const char *json, struct EqlabEconomy **out);

/**
 * Generates a scenario economy. `family_json` is either a bare family name
 * (`"dispersed"`) or a JSON object such as `{"family":"sparse","width":3,...}`.
 *
 * # Safety
 * `family_json` must be a NUL-terminated string; `out` must be writable.
 */
enum EqlabStatus eqlab_scenario_generate(const char *family_json,
                                         uint64_t seed,
                                         size_t horizon,
                                         double beta,
                                         size_t agents,
                                         struct EqlabEconomy **out);

/**
 * # Safety
 * `economy` must come from this library and not have been freed already.
 */
void eqlab_economy_free(struct EqlabEconomy *economy);

/**
 * Number of future dates `N`; 0 for a null handle.
 *
 * # Safety
 * `economy` must be null or a live handle.
 */
size_t eqlab_economy_horizon(const struct EqlabEconomy *economy);

/**
 * Number of agents; 0 for a null handle.
 *
 * # Safety
 * `economy` must be null or a live handle.
 */
size_t eqlab_economy_agent_count(const struct EqlabEconomy *economy);

/**
 * Serializes the economy back to spec JSON.
 *
 * # Safety
 * `economy` must be a live handle; `out` must be writable.
 */
enum EqlabStatus eqlab_economy_to_json(const struct EqlabEconomy *economy, char **out);

/**
 * Solves for an equilibrium. `tol <= 0` selects the default tolerance
 * `1e-10 * I`; `starts` is clamped to at least 1.
 *
 * # Safety
 * `economy` must be a live handle; `out` must be writable.
 */
enum EqlabStatus eqlab_solve(const struct EqlabEconomy *economy,
                             double tol,
                             size_t starts,
                             uint64_t seed,
                             struct EqlabEquilibrium **out);

/**
 * # Safety
 * `eq` must come from this library and not have been freed already.
 */
void eqlab_equilibrium_free(struct EqlabEquilibrium *eq);

/**
 * Sup-norm excess-demand residual at the solution; NaN for a null handle.
 *
 * # Safety
 * `eq` must be null or a live handle.
 */
double eqlab_equilibrium_residual(const struct EqlabEquilibrium *eq);

/**
 * Copies the future prices `p_1..p_N` into `buf`, which must hold `N`
 * values.
 *
 * # Safety
 * `eq` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum EqlabStatus eqlab_equilibrium_prices(const struct EqlabEquilibrium *eq,
                                          double *buf,
                                          size_t len);

/**
 * Full equilibrium record (prices, allocation, shadow values, diagnostics)
 * as JSON.
 *
 * # Safety
 * `eq` must be a live handle; `out` must be writable.
 */
enum EqlabStatus eqlab_equilibrium_to_json(const struct EqlabEquilibrium *eq, char **out);

/**
 * Aggregate excess-demand Jacobian, row-major `N x N` with entry
 * `[m * N + n] = dz_(n+1) / dp_(m+1)`.
 *
 * # Safety
 * Handles must be live and belong together; `buf` must point to `len`
 * writable doubles.
 */
enum EqlabStatus eqlab_jacobian(const struct EqlabEconomy *economy,
                                const struct EqlabEquilibrium *eq,
                                double *buf,
                                size_t len);

/**
 * Definiteness verdict at the equilibrium as JSON.
 *
 * # Safety
 * Handles must be live and belong together; `out` must be writable.
 */
enum EqlabStatus eqlab_stability_json(const struct EqlabEconomy *economy,
                                      const struct EqlabEquilibrium *eq,
                                      char **out);

/**
 * Marginal-share alignment report as JSON.
 *
 * # Safety
 * Handles must be live and belong together; `out` must be writable.
 */
enum EqlabStatus eqlab_diversify_json(const struct EqlabEconomy *economy,
                                      const struct EqlabEquilibrium *eq,
                                      char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQLAB_H */
