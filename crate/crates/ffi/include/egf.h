#ifndef EGF_H
#define EGF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The first five match the CLI exit codes.
 */
typedef enum EgfStatus {
  EGF_STATUS_OK = 0,
  EGF_STATUS_CHECK_FAILED = 1,
  EGF_STATUS_PARSE = 2,
  EGF_STATUS_INVALID = 3,
  EGF_STATUS_SOLVER = 4,
  EGF_STATUS_NULL_POINTER = 5,
  EGF_STATUS_PANIC = 6,
} EgfStatus;

/**
 * Companion matrix of a curvature spectrum.
 */
typedef struct EgfCompanion EgfCompanion;

/**
 * Result of running one scenario.
 */
typedef struct EgfReport EgfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf`.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t egf_last_error(char *buf, size_t len);

/**
 * Parses and runs a scenario given as TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EgfStatus egf_run_scenario(const char *toml, struct EgfReport **out);

/**
 * 1 if every check of the run passed, 0 otherwise or for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t egf_report_passed(const struct EgfReport *report);

/**
 * Sup norm of the main field at the final time, NaN for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double egf_report_final_sup(const struct EgfReport *report);

/**
 * Error against the closed form. `Invalid` when the kind has none.
 *
 * # Safety
 * `report` must be null or a live handle, `value` a valid pointer.
 */
enum EgfStatus egf_report_error(const struct EgfReport *report, double *value);

/**
 * Copies the verdict text. Returns the needed size including the NUL.
 *
 * # Safety
 * `report` must be null or a live handle; `buf` null or `len` writable bytes.
 */
size_t egf_report_verdict(const struct EgfReport *report, char *buf, size_t len);

/**
 * Writes the CSV artifacts and verdict into `dir`.
 *
 * # Safety
 * `report` must be a live handle and `dir` a NUL-terminated path.
 */
enum EgfStatus egf_report_write(const struct EgfReport *report, const char *dir);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void egf_report_free(struct EgfReport *report);

/**
 * Builds the companion matrix of the spectrum `k[0..n]`.
 *
 * # Safety
 * `k` must point to `n` doubles and `out` be a valid pointer.
 */
enum EgfStatus egf_companion_from_spectrum(const double *k, size_t n, struct EgfCompanion **out);

/**
 * Matrix dimension, 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live handle.
 */
size_t egf_companion_dim(const struct EgfCompanion *b);

/**
 * Copies the entries row-major into `buf`, which must hold `dim*dim` doubles.
 *
 * # Safety
 * `b` must be a live handle and `buf` point to `len` writable doubles.
 */
enum EgfStatus egf_companion_entries(const struct EgfCompanion *b, double *buf, size_t len);

/**
 * # Safety
 * `b` must be null or a handle not yet freed.
 */
void egf_companion_free(struct EgfCompanion *b);

/**
 * Sup-norm error of the quasilinear reference problem against its closed
 * form, Crank-Nicolson on `nodes` points.
 *
 * # Safety
 * `value` must be a valid pointer.
 */
enum EgfStatus egf_exact_quasilinear_error(size_t nodes, double dt, double t_end, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EGF_H */
