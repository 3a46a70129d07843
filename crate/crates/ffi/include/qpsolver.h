#ifndef QPSOLVER_H
#define QPSOLVER_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum QpConvolution {
  QP_CONVOLUTION_TRUNCATED = 0,
  QP_CONVOLUTION_WRAPPED = 1,
} QpConvolution;

typedef enum QpStatus {
  QP_STATUS_OK = 0,
  QP_STATUS_NULL_POINTER = 1,
  QP_STATUS_INVALID_ARGUMENT = 2,
  QP_STATUS_INVALID_LATTICE = 3,
  QP_STATUS_DIMENSION_MISMATCH = 4,
  QP_STATUS_SOLVER_FAILURE = 5,
  QP_STATUS_CONFIG_ERROR = 6,
  QP_STATUS_PANIC = 7,
} QpStatus;

typedef enum QpSweep {
  QP_SWEEP_SPACE = 0,
  QP_SWEEP_TIME = 1,
} QpSweep;

/**
 * Opaque lattice handle.
 */
typedef struct QpLattice QpLattice;

/**
 * Opaque operator handle.
 */
typedef struct QpOperator QpOperator;

/**
 * Same layout as `num_complex::Complex64`.
 */
typedef struct QpComplex {
  double re;
  double im;
} QpComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the length the full message
 * needs including the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t qp_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qp_version(void);

/**
 * Creates the lattice `K_N^n` for a `spatial_dim x torus_dim` projection
 * given row-major in `projection`.
 *
 * # Safety
 * `projection` must hold `spatial_dim * torus_dim` doubles; `out` must be
 * writable.
 */
enum QpStatus qp_lattice_new(size_t n_modes,
                             size_t spatial_dim,
                             size_t torus_dim,
                             const double *projection,
                             struct QpLattice **out);

/**
 * # Safety
 * `lat` must come from [`qp_lattice_new`] and not be freed twice.
 */
void qp_lattice_free(struct QpLattice *lat);

/**
 * Number of modes `D = N^n`, or 0 for a null handle.
 *
 * # Safety
 * `lat` must be a live handle or null.
 */
size_t qp_lattice_size(const struct QpLattice *lat);

/**
 * Torus dimension `n`, or 0 for a null handle.
 *
 * # Safety
 * `lat` must be a live handle or null.
 */
size_t qp_lattice_torus_dim(const struct QpLattice *lat);

/**
 * Vector index of the frequency `k` (length `torus_dim`).
 *
 * # Safety
 * `k` must hold `torus_dim` integers; `out` must be writable.
 */
enum QpStatus qp_lattice_tensor_to_vector(const struct QpLattice *lat,
                                          const int64_t *k,
                                          size_t k_len,
                                          size_t *out);

/**
 * Frequency of vector index `index`, written to `k_out` (length `torus_dim`).
 *
 * # Safety
 * `k_out` must be writable for `k_len` integers.
 */
enum QpStatus qp_lattice_vector_to_tensor(const struct QpLattice *lat,
                                          size_t index,
                                          int64_t *k_out,
                                          size_t k_len);

/**
 * Builds `Q` for a sparse coefficient with `count` modes. `modes` holds
 * `count * torus_dim` integers, one frequency per row.
 *
 * # Safety
 * `modes` and `amplitudes` must hold the stated number of elements; `out`
 * must be writable.
 */
enum QpStatus qp_operator_new(const struct QpLattice *lat,
                              const int64_t *modes,
                              const struct QpComplex *amplitudes,
                              size_t count,
                              enum QpConvolution convolution,
                              struct QpOperator **out);

/**
 * # Safety
 * `op` must come from [`qp_operator_new`] and not be freed twice.
 */
void qp_operator_free(struct QpOperator *op);

/**
 * `out = Q v` for coefficient vectors of length `D`.
 *
 * # Safety
 * `v` and `out` must hold `len` elements and must not overlap.
 */
enum QpStatus qp_operator_apply(const struct QpOperator *op,
                                const struct QpComplex *v,
                                struct QpComplex *out,
                                size_t len);

/**
 * Grid values to coefficients, including the `1/D` factor.
 *
 * # Safety
 * `values` and `coeffs` must hold `len` elements.
 */
enum QpStatus qp_forward_dft(const struct QpLattice *lat,
                             const struct QpComplex *values,
                             struct QpComplex *coeffs,
                             size_t len);

/**
 * Coefficients to grid values.
 *
 * # Safety
 * `coeffs` and `values` must hold `len` elements.
 */
enum QpStatus qp_inverse_dft(const struct QpLattice *lat,
                             const struct QpComplex *coeffs,
                             struct QpComplex *values,
                             size_t len);

/**
 * Runs a sweep described by a JSON experiment config and returns the CSV
 * table in `*out_csv`. Release it with [`qp_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_csv` must be writable.
 */
enum QpStatus qp_run_sweep(const char *config_json, enum QpSweep sweep, char **out_csv);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void qp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPSOLVER_H */
