#ifndef BERGLAB_H
#define BERGLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum BlStatus {
  BL_STATUS_OK = 0,
  BL_STATUS_NULL_POINTER = 1,
  BL_STATUS_INVALID_ARGUMENT = 2,
  BL_STATUS_DOMAIN = 3,
  BL_STATUS_ACCURACY = 4,
  BL_STATUS_UNSUPPORTED = 5,
  BL_STATUS_CONFIG = 6,
  BL_STATUS_INTERNAL = 7,
  BL_STATUS_PANIC = 8,
} BlStatus;

// Positive measure handle.
typedef struct BlMeasure BlMeasure;

// Toeplitz operator handle; owns copies of its measure and weight.
typedef struct BlOperator BlOperator;

// Radial weight handle.
typedef struct BlWeight BlWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *bl_version(void);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *bl_last_error(void);

// Standard weight `(α+1)(1-r²)^α`, `α > -1`.
//
// # Safety
// `out` must be valid for a pointer write.
enum BlStatus bl_weight_standard(double alpha, struct BlWeight **out);

// Power weight `(1-r)^a`, `a > -1`.
//
// # Safety
// `out` must be valid for a pointer write.
enum BlStatus bl_weight_power(double exponent, struct BlWeight **out);

// `ω(r)` for `0 <= r < 1`.
//
// # Safety
// `w` must come from a weight constructor; `out` must be writable.
enum BlStatus bl_weight_eval(const struct BlWeight *w, double r, double *out);

// Moment `ω_x = ∫₀¹ r^x ω(r) dr`.
//
// # Safety
// `w` must come from a weight constructor; `out` must be writable.
enum BlStatus bl_weight_moment(const struct BlWeight *w, double x, double *out);

// # Safety
// `w` must be null or a handle not yet freed.
void bl_weight_free(struct BlWeight *w);

// Finite sum of point masses at `re[i] + i·im[i]`.
//
// # Safety
// `re`, `im` and `masses` must each hold `len` values (they may be null
// when `len` is 0); `out` must be writable.
enum BlStatus bl_measure_atomic(const double *re,
                                const double *im,
                                const double *masses,
                                size_t len,
                                struct BlMeasure **out);

// `w dA`.
//
// # Safety
// `w` must come from a weight constructor; `out` must be writable.
enum BlStatus bl_measure_radial(const struct BlWeight *w, struct BlMeasure **out);

// Measure from its JSON description, e.g. `{"type": "power", "a": 0.5}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum BlStatus bl_measure_from_json(const char *json, struct BlMeasure **out);

// `μ(𝔻)`.
//
// # Safety
// `m` must come from a measure constructor; `out` must be writable.
enum BlStatus bl_measure_total_mass(const struct BlMeasure *m, double *out);

// # Safety
// `m` must be null or a handle not yet freed.
void bl_measure_free(struct BlMeasure *m);

// Reproducing kernel `B_z(ξ)` of `A_w^2` from its first `terms + 1`
// coefficients. Fails with [`BlStatus::Accuracy`] when that truncation is
// too short at `|z̄ξ|`.
//
// # Safety
// `w` must come from a weight constructor; `out_re`, `out_im` writable.
enum BlStatus bl_kernel_eval(const struct BlWeight *w,
                             size_t terms,
                             double z_re,
                             double z_im,
                             double xi_re,
                             double xi_im,
                             double *out_re,
                             double *out_im);

// `T_μ` on `A_w^2`.
//
// # Safety
// `m` and `w` must come from their constructors; `out` must be writable.
enum BlStatus bl_toeplitz_new(const struct BlMeasure *m,
                              const struct BlWeight *w,
                              struct BlOperator **out);

// # Safety
// `op` must be null or a handle not yet freed.
void bl_toeplitz_free(struct BlOperator *op);

// Norm of `T_μ: A_w^2 → A_w^2`, starting from `basis` monomials.
//
// # Safety
// `op` must come from [`bl_toeplitz_new`]; `out` must be writable.
enum BlStatus bl_toeplitz_norm_22(const struct BlOperator *op, size_t basis, double *out);

// Galerkin matrix `⟨T e_k, e_j⟩` on the first `m` orthonormal monomials,
// row-major into `re` and `im` (each `m * m` values).
//
// # Safety
// `op` must come from [`bl_toeplitz_new`]; `re` and `im` must be writable
// for `m * m` values.
enum BlStatus bl_toeplitz_matrix(const struct BlOperator *op, size_t m, double *re, double *im);

// Lower bound for `‖I_d‖_{A_w^p → L_μ^q}` from the standard search space.
//
// # Safety
// `w` and `m` must come from their constructors; `out` must be writable.
enum BlStatus bl_embedding_norm(const struct BlWeight *w,
                                double p,
                                const struct BlMeasure *m,
                                double q,
                                size_t budget,
                                uint64_t seed,
                                double *out);

// `M₀` with `ω = η = υ = w` over Bergman disks of radius `r`, on the
// geometric grid with `shells` shells (`p <= q`).
//
// # Safety
// `m` and `w` must come from their constructors; `out` must be writable.
enum BlStatus bl_m0_sup(const struct BlMeasure *m,
                        const struct BlWeight *w,
                        double p,
                        double q,
                        double r,
                        uint32_t shells,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERGLAB_H */
