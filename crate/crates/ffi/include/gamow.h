#ifndef GAMOW_H
#define GAMOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Overlap evaluation used by the double sum.
typedef enum GamowOverlapMode {
  GAMOW_OVERLAP_MODE_CLOSED = 0,
  GAMOW_OVERLAP_MODE_QUADRATURE = 1,
} GamowOverlapMode;

// Result codes. `GAMOW_STATUS_OK` is zero.
typedef enum GamowStatus {
  GAMOW_STATUS_OK = 0,
  GAMOW_STATUS_NULL_POINTER = 1,
  GAMOW_STATUS_INVALID_ARGUMENT = 2,
  GAMOW_STATUS_INVALID_POTENTIAL = 3,
  GAMOW_STATUS_INVALID_STATE = 4,
  GAMOW_STATUS_INVALID_GRID = 5,
  // Numerical failure inside the library (tolerance, overflow, audit, ...).
  GAMOW_STATUS_NUMERICAL = 6,
  // A Rust panic was caught at the boundary.
  GAMOW_STATUS_PANIC = 7,
} GamowStatus;

typedef struct GamowExpansion GamowExpansion;

typedef struct GamowInitialState GamowInitialState;

typedef struct GamowPoleSet GamowPoleSet;

typedef struct GamowPotential GamowPotential;

typedef struct GamowSeries GamowSeries;

// Oracle grid. `absorber_width <= 0` disables the absorbing mask and
// `energy_cutoff <= 0` disables the spectral filter; `analysis_end <= 0`
// means no analysis window.
typedef struct GamowGridSpec {
  double box_length;
  uintptr_t intervals_per_range;
  double time_step;
  double final_time;
  double leak_threshold;
  double max_wavenumber;
  uintptr_t record_every;
  double absorber_width;
  double absorber_strength;
  double energy_cutoff;
  double analysis_end;
} GamowGridSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next library call on the same thread.
const char *gamow_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *gamow_version(void);

// Delta shell `λ δ(r − R)`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum GamowStatus gamow_potential_delta_shell(double strength,
                                             double radius,
                                             struct GamowPotential **out);

// Piecewise-constant potential from `count` contiguous segments
// `[r_lo[i], r_hi[i]]` with value `v[i]`, starting at 0.
//
// # Safety
// The three arrays must hold `count` elements; `out` must be writable.
enum GamowStatus gamow_potential_piecewise(const double *r_lo,
                                           const double *r_hi,
                                           const double *v,
                                           uintptr_t count,
                                           struct GamowPotential **out);

// # Safety
// `p` must be NULL or a handle from this library, not yet freed.
void gamow_potential_free(struct GamowPotential *p);

// Box mode `√(2/R) sin(mπr/R)`.
//
// # Safety
// `out` must be writable.
enum GamowStatus gamow_initial_box_mode(uint32_t m, double radius, struct GamowInitialState **out);

// # Safety
// `s` must be NULL or a live handle.
void gamow_initial_free(struct GamowInitialState *s);

// Locates fourth-quadrant poles in `(0, re_max] × [im_min, 0]`.
//
// # Safety
// `p` must be a live potential handle and `out` writable.
enum GamowStatus gamow_poles_locate(const struct GamowPotential *p,
                                    double re_max,
                                    double im_min,
                                    double tol,
                                    struct GamowPoleSet **out);

// Number of fourth-quadrant poles (mirrors not counted).
//
// # Safety
// `s` must be a live handle; `out_len` writable.
enum GamowStatus gamow_poles_len(const struct GamowPoleSet *s, uintptr_t *out_len);

// Pole `k_n` for a signed index `n`.
//
// # Safety
// `s` must be a live handle; `re`, `im` writable.
enum GamowStatus gamow_poles_get(const struct GamowPoleSet *s, int64_t n, double *re, double *im);

// # Safety
// `s` must be NULL or a live handle.
void gamow_poles_free(struct GamowPoleSet *s);

// Gamow states, coefficients and overlaps for `|n| ≤ n_max`.
//
// # Safety
// Handles must be live; `out` writable.
enum GamowStatus gamow_expansion_build(const struct GamowPoleSet *poles,
                                       const struct GamowInitialState *psi0,
                                       uintptr_t n_max,
                                       bool with_quadrature,
                                       struct GamowExpansion **out);

// Expansion coefficient `C_n` for a signed index.
//
// # Safety
// `e` must be live; `re`, `im` writable.
enum GamowStatus gamow_expansion_coefficient(const struct GamowExpansion *e,
                                             int64_t n,
                                             double *re,
                                             double *im);

// Truncated `P_N(t)` at `count` strictly ascending times, written to `out_p`.
//
// # Safety
// `times` and `out_p` must hold `count` elements; `e` must be live.
enum GamowStatus gamow_expansion_nonescape(const struct GamowExpansion *e,
                                           const double *times,
                                           uintptr_t count,
                                           uintptr_t n,
                                           enum GamowOverlapMode mode,
                                           double *out_p);

// `t⁻¹` tail coefficient `D1(N)` by the double sum and by `∫|S_N|²`.
//
// # Safety
// `e` must be live; outputs writable.
enum GamowStatus gamow_expansion_tail_t1(const struct GamowExpansion *e,
                                         uintptr_t n,
                                         double *double_sum,
                                         double *integral);

// # Safety
// `e` must be NULL or a live handle.
void gamow_expansion_free(struct GamowExpansion *e);

// Direct Crank–Nicolson `P(t)`.
//
// # Safety
// Handles and `grid` must be valid; `out` writable.
enum GamowStatus gamow_oracle_evolve(const struct GamowPotential *p,
                                     const struct GamowInitialState *psi0,
                                     const struct GamowGridSpec *grid,
                                     struct GamowSeries **out);

// Number of recorded times.
//
// # Safety
// `s` must be live; `out_len` writable.
enum GamowStatus gamow_series_len(const struct GamowSeries *s, uintptr_t *out_len);

// Copies times and `P` into caller buffers of length `capacity`
// (at least the series length). Either buffer may be NULL to skip it.
//
// # Safety
// Non-NULL buffers must hold `capacity` elements; `s` must be live.
enum GamowStatus gamow_series_copy(const struct GamowSeries *s,
                                   double *times,
                                   double *p,
                                   uintptr_t capacity);

// First contaminated time, or a negative value when the run stayed clean.
//
// # Safety
// `s` must be live; `out` writable.
enum GamowStatus gamow_series_horizon(const struct GamowSeries *s, double *out);

// # Safety
// `s` must be NULL or a live handle.
void gamow_series_free(struct GamowSeries *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMOW_H */
