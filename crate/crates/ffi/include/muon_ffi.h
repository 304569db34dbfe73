#ifndef MUON_FFI_H
#define MUON_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MuonStatus {
  MUON_STATUS_OK = 0,
  MUON_STATUS_NULL_POINTER = 1,
  MUON_STATUS_SHAPE = 2,
  MUON_STATUS_NON_FINITE = 3,
  MUON_STATUS_DEGENERATE = 4,
  MUON_STATUS_NO_CONVERGENCE = 5,
  MUON_STATUS_RANGE = 6,
  MUON_STATUS_CONFIG = 7,
  MUON_STATUS_INVALID_ARGUMENT = 8,
  MUON_STATUS_PANIC = 9,
} MuonStatus;

/**
 * Newton–Schulz coefficient set.
 */
typedef enum MuonPreset {
  MUON_PRESET_OPTIMIZED = 0,
  MUON_PRESET_TAYLOR = 1,
} MuonPreset;

/**
 * Opaque AdamW optimizer state for one parameter.
 */
typedef struct MuonAdamW MuonAdamW;

/**
 * Opaque dense matrix.
 */
typedef struct MuonMatrix MuonMatrix;

/**
 * Opaque Muon optimizer state for one matrix parameter.
 */
typedef struct MuonOptimizer MuonOptimizer;

/**
 * Muon hyperparameters. Obtain defaults with [`muon_hyper_default`].
 */
typedef struct MuonHyperParams {
  double eta0;
  double lambda;
  double beta;
  size_t k_iters;
  /**
   * A `MuonPreset` value.
   */
  uint32_t preset;
  double rms_factor;
  bool rms_matching;
} MuonHyperParams;

/**
 * AdamW hyperparameters. Obtain defaults with [`muon_adamw_hyper_default`].
 */
typedef struct MuonAdamWParams {
  double eta0;
  double lambda;
  double beta1;
  double beta2;
  double eps;
} MuonAdamWParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `buf_len`). Returns the full message length excluding the NUL.
 * `buf` may be null to query the length.
 */
size_t muon_last_error_message(char *buf, size_t buf_len);

/**
 * Creates a `rows × cols` matrix from `rows * cols` row-major values.
 */
enum MuonStatus muon_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct MuonMatrix **out);

enum MuonStatus muon_matrix_zeros(size_t rows, size_t cols, struct MuonMatrix **out);

void muon_matrix_free(struct MuonMatrix *m);

/**
 * Rows of `m`, or 0 when `m` is null.
 */
size_t muon_matrix_rows(const struct MuonMatrix *m);

/**
 * Columns of `m`, or 0 when `m` is null.
 */
size_t muon_matrix_cols(const struct MuonMatrix *m);

/**
 * Copies the row-major values into `dst`, which must hold `len >= rows * cols`.
 */
enum MuonStatus muon_matrix_read(const struct MuonMatrix *m, double *dst, size_t len);

/**
 * Exact polar factor `U Vᵀ` via SVD.
 */
enum MuonStatus muon_msign_exact(const struct MuonMatrix *m, struct MuonMatrix **out);

/**
 * `k` Newton–Schulz iterations from the Frobenius-normalized input;
 * `preset` is a `MuonPreset` value.
 */
enum MuonStatus muon_msign_newton_schulz(const struct MuonMatrix *m,
                                         uint32_t preset,
                                         size_t k,
                                         struct MuonMatrix **out);

enum MuonStatus muon_hyper_default(struct MuonHyperParams *out);

enum MuonStatus muon_adamw_hyper_default(struct MuonAdamWParams *out);

/**
 * Zero-momentum Muon state for a `rows × cols` parameter.
 */
enum MuonStatus muon_optimizer_new(size_t rows,
                                   size_t cols,
                                   const struct MuonHyperParams *params,
                                   struct MuonOptimizer **out);

/**
 * One Muon step at learning rate `eta_t`, updating `w` in place.
 * On error neither `w` nor the state changes.
 */
enum MuonStatus muon_optimizer_step(struct MuonOptimizer *opt,
                                    struct MuonMatrix *w,
                                    const struct MuonMatrix *g,
                                    double eta_t);

/**
 * Auxiliary scalars held by the optimizer (the momentum buffer).
 */
size_t muon_optimizer_state_size(const struct MuonOptimizer *opt);

void muon_optimizer_free(struct MuonOptimizer *opt);

enum MuonStatus muon_adamw_new(size_t rows,
                               size_t cols,
                               const struct MuonAdamWParams *params,
                               struct MuonAdamW **out);

/**
 * One AdamW step at learning rate `eta_t`, updating `w` in place.
 */
enum MuonStatus muon_adamw_step(struct MuonAdamW *opt,
                                struct MuonMatrix *w,
                                const struct MuonMatrix *g,
                                double eta_t);

/**
 * Auxiliary scalars held by the optimizer (both moment buffers).
 */
size_t muon_adamw_state_size(const struct MuonAdamW *opt);

void muon_adamw_free(struct MuonAdamW *opt);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MUON_FFI_H */
