#ifndef PENDELLOSUNG_H
#define PENDELLOSUNG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PdlStatus {
  PDL_STATUS_OK = 0,
  PDL_STATUS_NULL_POINTER = 1,
  PDL_STATUS_INVALID_INPUT = 2,
  PDL_STATUS_FORBIDDEN = 3,
  PDL_STATUS_NO_REFLECTION = 4,
  PDL_STATUS_EMPTY_WINDOW = 5,
  PDL_STATUS_FORM_FACTOR_DOMAIN = 6,
  PDL_STATUS_DEGENERATE = 7,
  PDL_STATUS_INSUFFICIENT_DATA = 8,
  PDL_STATUS_CONFIG = 9,
  PDL_STATUS_IO = 10,
  PDL_STATUS_OUT_OF_RANGE = 11,
  PDL_STATUS_PANIC = 12,
} PdlStatus;

/**
 * Diamond-structure reflection classes.
 */
typedef enum PdlClass {
  PDL_CLASS_DISALLOWED = 0,
  PDL_CLASS_FORBIDDEN = 1,
  PDL_CLASS_WEAK = 2,
  PDL_CLASS_STRONG = 3,
} PdlClass;

/**
 * Crystal, scattering model and spectrum window.
 */
typedef struct PdlModel PdlModel;

/**
 * A list of planned reflections.
 */
typedef struct PdlPlan PdlPlan;

typedef struct PdlFringeCount {
  uint64_t periods;
  uint64_t maxima;
  uint64_t zeros;
  double argument_min;
  double argument_max;
  double lambda_min;
  double lambda_max;
} PdlFringeCount;

typedef struct PdlPlanEntry {
  int32_t h;
  int32_t k;
  int32_t l;
  int32_t class_;
  double f;
  double lambda_min;
  double lambda_max;
  double two_theta_min;
  double two_theta_max;
  double f2_fm2;
  /**
   * 1 if free of harmonic contamination.
   */
  int32_t pure;
} PdlPlanEntry;

typedef struct PdlBudget {
  double two_stage_sigma_b;
  double two_stage_sigma_bne;
  /**
   * 0 when the joint design is singular; the joint fields are then 0.
   */
  int32_t joint_valid;
  double joint_sigma_b;
  double joint_sigma_bne;
} PdlBudget;

typedef struct PdlJointFit {
  double b_factor;
  double b_factor_sigma;
  double b_ne;
  double b_ne_sigma;
  double b_nuclear;
  double b_nuclear_sigma;
  double chi2;
  uint64_t dof;
} PdlJointFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *pdl_last_error(void);

/**
 * Built-in crystal ("Si" or "Ge") with the given b_ne (fm) and the default
 * spectrum window. Returns NULL on failure.
 *
 * # Safety
 * `crystal` must be a valid NUL-terminated string.
 */
struct PdlModel *pdl_model_new_builtin(const char *crystal, double b_ne);

/**
 * # Safety
 * `model` must come from `pdl_model_new_builtin` and not be used afterwards.
 */
void pdl_model_free(struct PdlModel *model);

/**
 * Replaces the spectrum window (Å and degrees).
 *
 * # Safety
 * `model` must be a live handle.
 */
enum PdlStatus pdl_model_set_window(struct PdlModel *model,
                                    double lambda_min,
                                    double lambda_max,
                                    double two_theta_min,
                                    double two_theta_max);

enum PdlClass pdl_classify(int32_t h, int32_t k, int32_t l);

double pdl_bessel_j0(double x);

/**
 * Q/4π in Å⁻¹.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum PdlStatus pdl_q_over_4pi(const struct PdlModel *model,
                              int32_t h,
                              int32_t k,
                              int32_t l,
                              double *out);

/**
 * Debye-Waller-attenuated scattering length at Q/4π, fm.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum PdlStatus pdl_b_meas(const struct PdlModel *model, double q_over_4pi, double *out);

/**
 * Bragg angle θ in degrees.
 *
 * # Safety
 * `model` must be a live handle and `theta_deg` writable.
 */
enum PdlStatus pdl_bragg_angle(const struct PdlModel *model,
                               int32_t h,
                               int32_t k,
                               int32_t l,
                               double lambda,
                               double *theta_deg);

/**
 * Fringe counts over the reflection's window for a blade of the given thickness.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum PdlStatus pdl_fringe_count(const struct PdlModel *model,
                                int32_t h,
                                int32_t k,
                                int32_t l,
                                double thickness_cm,
                                struct PdlFringeCount *out);

/**
 * b_ne (fm) from one Debye-Waller-corrected scattering length.
 *
 * # Safety
 * `value` and `sigma` must be writable.
 */
enum PdlStatus pdl_extract_bne_single(double b_q,
                                      double b_q_sigma,
                                      double b_nuclear,
                                      double b_nuclear_sigma,
                                      uint32_t z,
                                      double f,
                                      double *value,
                                      double *sigma);

/**
 * Mean-square charge radius (fm²) from b_ne (fm), CODATA 2018 constants.
 *
 * # Safety
 * `r2` and `r2_sigma` must be writable.
 */
enum PdlStatus pdl_charge_radius(double b_ne, double b_ne_sigma, double *r2, double *r2_sigma);

/**
 * Plans the reflections of the model's window up to (642). Pure ones only
 * unless `include_contaminated` is non-zero. Returns NULL on failure.
 *
 * # Safety
 * `model` must be a live handle.
 */
struct PdlPlan *pdl_plan_new(const struct PdlModel *model, int32_t include_contaminated);

/**
 * # Safety
 * `plan` must be a live handle or NULL.
 */
uintptr_t pdl_plan_len(const struct PdlPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum PdlStatus pdl_plan_get(const struct PdlPlan *plan, uintptr_t index, struct PdlPlanEntry *out);

/**
 * # Safety
 * `plan` must come from `pdl_plan_new` and not be used afterwards.
 */
void pdl_plan_free(struct PdlPlan *plan);

/**
 * Projected σ_B (Å²) and σ_bne (fm) for `n` reflections given as 3·n
 * Miller indices, each measured with σ (fm).
 *
 * # Safety
 * `hkl` must point to 3·n integers; `model` live; `out` writable.
 */
enum PdlStatus pdl_budget(const struct PdlModel *model,
                          const int32_t *hkl,
                          uintptr_t n,
                          double sigma,
                          int32_t include_forward,
                          struct PdlBudget *out);

/**
 * Joint fit of (B, b_ne, b_nuclear) with the crystal's forward value as a prior.
 *
 * # Safety
 * `hkl` must point to 3·n integers, `b_meas` and `sigma` to n doubles.
 */
enum PdlStatus pdl_joint_fit(const struct PdlModel *model,
                             const int32_t *hkl,
                             const double *b_meas,
                             const double *sigma,
                             uintptr_t n,
                             struct PdlJointFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PENDELLOSUNG_H */
