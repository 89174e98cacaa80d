/* SPDX-License-Identifier: Apache-2.0 */

#ifndef AXMUL_H
#define AXMUL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define AXM_FAMILY_EXACT 0

#define AXM_FAMILY_DESIGN1 1

#define AXM_FAMILY_DESIGN2 2

#define AXM_FAMILY_PROPOSED 3

/**
 * Pass as `param` to keep the family default (threshold 8, width 4).
 */
#define AXM_DEFAULT_PARAM UINT32_MAX

#define AXM_LUT_ENTRIES 65536

typedef enum AxmStatus {
  AXM_OK = 0,
  AXM_NULL_POINTER = 1,
  AXM_INVALID_ARGUMENT = 2,
  AXM_BUFFER_TOO_SMALL = 3,
  AXM_PANIC = 4,
} AxmStatus;

/**
 * Opaque multiplier handle.
 */
typedef struct AxmMultiplier AxmMultiplier;

/**
 * Exhaustive-sweep metrics; percentages are in percent.
 */
typedef struct AxmErrorSummary {
  uint64_t n_cases;
  uint64_t error_cases;
  uint64_t max_ed;
  uint64_t zero_exact_nonzero_approx;
  double er_percent;
  double nmed_percent;
  double mred_percent;
  double mean_ed;
} AxmErrorSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a multiplier. `param` is the exact-column threshold for
 * DESIGN1, the truncation width for DESIGN2, otherwise
 * `AXM_DEFAULT_PARAM`.
 */
enum AxmStatus axm_multiplier_new(uint32_t family, uint32_t param, struct AxmMultiplier **out);

/**
 * Like [`axm_multiplier_new`] with a custom approximate cell. `values[i]`
 * is the cell output `2*carry + sum` (0..=3) for input pattern `i`, where
 * bit 0 of `i` is x1.
 */
enum AxmStatus axm_multiplier_new_with_table(uint32_t family,
                                             uint32_t param,
                                             const uint8_t *values,
                                             struct AxmMultiplier **out);

/**
 * Releases a handle. Null is ignored.
 */
void axm_multiplier_free(struct AxmMultiplier *m);

enum AxmStatus axm_multiplier_eval(const struct AxmMultiplier *m,
                                   uint8_t a,
                                   uint8_t b,
                                   uint16_t *out);

/**
 * Exhaustive comparison against the exact product over all operand pairs.
 */
enum AxmStatus axm_multiplier_sweep(const struct AxmMultiplier *m, struct AxmErrorSummary *out);

/**
 * Fills `buf[(a << 8) | b]` for every operand pair. `len` must be at
 * least `AXM_LUT_ENTRIES`.
 */
enum AxmStatus axm_multiplier_build_lut(const struct AxmMultiplier *m, uint16_t *buf, size_t len);

/**
 * Text dump of the reduction plan. Call with a null `buf` to learn the
 * size through `needed`.
 */
enum AxmStatus axm_multiplier_plan_dump(const struct AxmMultiplier *m,
                                        char *buf,
                                        size_t len,
                                        size_t *needed);

/**
 * Writes the 16 cell values (`2*carry + sum`) of the proposed compressor.
 */
enum AxmStatus axm_proposed_truth_table(uint8_t *out);

/**
 * PSNR in dB for 8-bit images; `+inf` when they are identical.
 */
enum AxmStatus axm_psnr(const uint8_t *reference,
                        const uint8_t *test,
                        size_t width,
                        size_t height,
                        double *out);

/**
 * Mean SSIM with an 11x11 Gaussian window; both sides must be >= 11.
 */
enum AxmStatus axm_ssim(const uint8_t *reference,
                        const uint8_t *test,
                        size_t width,
                        size_t height,
                        double *out);

/**
 * Copies this thread's last error message (NUL-terminated, truncated to
 * fit) and returns its full length including the NUL, or 0 if none.
 */
size_t axm_last_error(char *buf, size_t len);

/**
 * Library version, static NUL-terminated string.
 */
const char *axm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AXMUL_H */
