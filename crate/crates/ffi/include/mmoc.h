#ifndef MMOC_H
#define MMOC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmocStatus {
  MMOC_STATUS_OK = 0,
  MMOC_STATUS_NULL_POINTER = 1,
  MMOC_STATUS_INVALID_ARGUMENT = 2,
  MMOC_STATUS_NUMERICAL = 3,
  MMOC_STATUS_PANIC = 4,
} MmocStatus;

/**
 * Opaque parameter set.
 */
typedef struct MmocScheme MmocScheme;

typedef struct MmocComplex {
  double re;
  double im;
} MmocComplex;

/**
 * First-order susceptibilities in units of 1/γ.
 */
typedef struct MmocSusceptibilities {
  struct MmocComplex chi43_m;
  struct MmocComplex chi43_l;
  struct MmocComplex chi61_m;
  struct MmocComplex chi61_l;
} MmocSusceptibilities;

/**
 * Beam-splitter coefficients and the efficiency at complete conversion.
 */
typedef struct MmocCoefficients {
  struct MmocComplex alpha;
  double epsilon;
  double epsilon_gamma;
  /**
   * π/(2ε), in l_abs.
   */
  double d_c;
  double f;
  double f_max;
  double d_c_max;
} MmocCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Rb preset parameters. Release with [`mmoc_scheme_free`].
 */
struct MmocScheme *mmoc_scheme_new_rb87(void);

/**
 * # Safety
 * `h` must come from [`mmoc_scheme_new_rb87`] and not be freed twice.
 */
void mmoc_scheme_free(struct MmocScheme *h);

/**
 * Set a real parameter by name: `omega_p`, `omega_r`, `omega_c`, `omega_a`
 * (real Rabi frequency), `delta_3` to `delta_6`, `gamma`, `gamma_rydberg`,
 * `b_squared`, `eta_l`, `level4_branching`. The set is validated and left
 * unchanged on error.
 *
 * # Safety
 * `h` must be a live handle and `name` a NUL-terminated string.
 */
enum MmocStatus mmoc_scheme_set(struct MmocScheme *h, const char *name, double value);

/**
 * Set a complex Rabi frequency (`omega_p`, `omega_r`, `omega_c`, `omega_a`).
 *
 * # Safety
 * As [`mmoc_scheme_set`].
 */
enum MmocStatus mmoc_scheme_set_complex(struct MmocScheme *h,
                                        const char *name,
                                        struct MmocComplex value);

/**
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum MmocStatus mmoc_susceptibilities(const struct MmocScheme *h, struct MmocSusceptibilities *out);

/**
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum MmocStatus mmoc_coefficients(const struct MmocScheme *h, struct MmocCoefficients *out);

/**
 * Photon-flux efficiency of mm → optical conversion by exact propagation
 * through optical depth `d`; `d <= 0` selects complete conversion π/(2ε).
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum MmocStatus mmoc_efficiency(const struct MmocScheme *h, double d, double *out);

/**
 * Signal pair after depth `z` (l_abs) through the linear medium.
 *
 * # Safety
 * `h` must be a live handle; `out_m` and `out_l` writable.
 */
enum MmocStatus mmoc_propagate_exact(const struct MmocScheme *h,
                                     struct MmocComplex omega_m,
                                     struct MmocComplex omega_l,
                                     double z,
                                     struct MmocComplex *out_m,
                                     struct MmocComplex *out_l);

/**
 * Stationary density matrix for the given signal pair, written row-major
 * into 36 entries (`out[6 * (k - 1) + (l - 1)]` is ρ_kl). Solved on the
 * levels reachable from the ground state.
 *
 * # Safety
 * `h` must be a live handle and `out` must hold 36 entries.
 */
enum MmocStatus mmoc_steady_state(const struct MmocScheme *h,
                                  struct MmocComplex omega_m,
                                  struct MmocComplex omega_l,
                                  struct MmocComplex *out);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call on the same thread.
 */
const char *mmoc_last_error_message(void);

const char *mmoc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMOC_H */
