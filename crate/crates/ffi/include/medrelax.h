#ifndef MEDRELAX_H
#define MEDRELAX_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MedrelaxStatus {
  MEDRELAX_STATUS_OK = 0,
  MEDRELAX_STATUS_NULL_POINTER = 1,
  MEDRELAX_STATUS_INVALID_ARGUMENT = 2,
  MEDRELAX_STATUS_CONFIG = 3,
  MEDRELAX_STATUS_SIZE_CAP = 4,
  MEDRELAX_STATUS_NOT_CONVERGED = 5,
  MEDRELAX_STATUS_NUMERICAL = 6,
  MEDRELAX_STATUS_IO = 7,
  MEDRELAX_STATUS_PANIC = 8,
} MedrelaxStatus;

typedef struct MedrelaxGibbs MedrelaxGibbs;

typedef struct MedrelaxHamiltonian MedrelaxHamiltonian;

typedef struct MedrelaxMedSolution MedrelaxMedSolution;

/**
 * The three sides of the recovery inequality chain.
 */
typedef struct MedrelaxRecovery {
  double cmi;
  double neg_log_fidelity;
  double trace_term;
  double trace_distance;
} MedrelaxRecovery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next
 * call on the same thread.
 */
const char *medrelax_last_error(void);

/**
 * Static, nul-terminated version string.
 */
const char *medrelax_version(void);

/**
 * Parses a TOML model description.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` writable.
 */
enum MedrelaxStatus medrelax_hamiltonian_from_toml(const char *toml,
                                                   struct MedrelaxHamiltonian **out);

/**
 * β(−Σ Z_i Z_{i+1} − Σ X_i) on an open chain of `n` sites.
 *
 * # Safety
 * `out` must be writable.
 */
enum MedrelaxStatus medrelax_hamiltonian_tfim_chain(size_t n,
                                                    double beta,
                                                    struct MedrelaxHamiltonian **out);

/**
 * β(J Σ Z_i Z_{i+1} + g Σ Z_i) on an open chain of `n` sites.
 *
 * # Safety
 * `out` must be writable.
 */
enum MedrelaxStatus medrelax_hamiltonian_ising_chain(size_t n,
                                                     double beta,
                                                     double coupling,
                                                     double field,
                                                     struct MedrelaxHamiltonian **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
size_t medrelax_hamiltonian_num_sites(const struct MedrelaxHamiltonian *h);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void medrelax_hamiltonian_free(struct MedrelaxHamiltonian *h);

/**
 * Exact Gibbs state of `h`. `max_sites` caps the qubit count; 0 selects the default.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum MedrelaxStatus medrelax_gibbs_solve(const struct MedrelaxHamiltonian *h,
                                         size_t max_sites,
                                         struct MedrelaxGibbs **out);

/**
 * F = −log Z.
 *
 * # Safety
 * `g` must be a live handle and `out` writable.
 */
enum MedrelaxStatus medrelax_gibbs_free_energy(const struct MedrelaxGibbs *g, double *out);

/**
 * Writes the marginal on `sites` as interleaved (re, im) pairs in row-major order.
 * `capacity` counts doubles; `written` receives 2·dim².
 *
 * # Safety
 * `sites` must hold `n_sites` entries and `buffer` `capacity` doubles.
 */
enum MedrelaxStatus medrelax_gibbs_marginal(const struct MedrelaxGibbs *g,
                                            const size_t *sites_ptr,
                                            size_t n_sites,
                                            double *buffer,
                                            size_t capacity,
                                            size_t *written);

/**
 * I(A:C|B) of the Gibbs state.
 *
 * # Safety
 * Each site array must hold its stated number of entries.
 */
enum MedrelaxStatus medrelax_gibbs_cmi(const struct MedrelaxGibbs *g,
                                       const size_t *a,
                                       size_t na,
                                       const size_t *b,
                                       size_t nb,
                                       const size_t *c,
                                       size_t nc,
                                       double *out);

/**
 * Recovers ρ_ABC from ρ_AB with the rotated Petz map of ρ_BC.
 *
 * # Safety
 * Each site array must hold its stated number of entries.
 */
enum MedrelaxStatus medrelax_gibbs_recovery(const struct MedrelaxGibbs *g,
                                            const size_t *a,
                                            size_t na,
                                            const size_t *b,
                                            size_t nb,
                                            const size_t *c,
                                            size_t nc,
                                            struct MedrelaxRecovery *out);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void medrelax_gibbs_free(struct MedrelaxGibbs *g);

/**
 * Solves the MED relaxation with shields of `radius` along the label order. A
 * solve that stops early still returns its handle, with `MEDRELAX_STATUS_NOT_CONVERGED`.
 * `tol` ≤ 0 selects the default.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum MedrelaxStatus medrelax_med_solve(const struct MedrelaxHamiltonian *h,
                                       size_t radius,
                                       double tol,
                                       struct MedrelaxMedSolution **out);

/**
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum MedrelaxStatus medrelax_med_value(const struct MedrelaxMedSolution *s, double *out);

/**
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum MedrelaxStatus medrelax_med_iterations(const struct MedrelaxMedSolution *s, size_t *out);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void medrelax_med_free(struct MedrelaxMedSolution *s);

/**
 * Runs the verification suite. `filter` may be null. `passed` receives 1 when every
 * selected check passed, else 0.
 *
 * # Safety
 * `filter` must be null or nul-terminated, and `passed` writable.
 */
enum MedrelaxStatus medrelax_verify(uint64_t seed, const char *filter, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEDRELAX_H */
