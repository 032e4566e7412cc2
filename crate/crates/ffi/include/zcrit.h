#ifndef ZCRIT_H
#define ZCRIT_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ZcritStatus {
  ZCRIT_STATUS_OK = 0,
  ZCRIT_STATUS_NULL_POINTER = 1,
  ZCRIT_STATUS_INVALID_ARGUMENT = 2,
  ZCRIT_STATUS_CONFIG = 3,
  /**
   * Non-positive metric, ill-conditioned or singular Gram matrix, failed fit or flow.
   */
  ZCRIT_STATUS_NUMERICAL = 4,
  /**
   * Dimension, degree or model not supported.
   */
  ZCRIT_STATUS_UNSUPPORTED = 5,
  /**
   * Output buffer length does not match.
   */
  ZCRIT_STATUS_BUFFER_SIZE = 6,
  ZCRIT_STATUS_IO = 7,
  ZCRIT_STATUS_PANIC = 8,
} ZcritStatus;

/**
 * Opaque Bergman data (section basis, Gram matrix and density) at one `k`.
 */
typedef struct ZcritBergman ZcritBergman;

/**
 * Opaque Kähler model.
 */
typedef struct ZcritModel ZcritModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *zcrit_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *zcrit_last_error(void);

/**
 * Fubini–Study metric on ℂPⁿ in the class `scale·H`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZcritStatus zcrit_model_fubini_study(uint32_t n,
                                          double scale,
                                          uint32_t level,
                                          struct ZcritModel **out);

/**
 * Builds the model described by the `[model]` table of a TOML config.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ZcritStatus zcrit_model_from_config(const char *config, struct ZcritModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. Null is a no-op.
 */
void zcrit_model_free(struct ZcritModel *model);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_model_dimension(const struct ZcritModel *model, uint32_t *out);

/**
 * Number of radial quadrature nodes, the length of per-node outputs.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_model_node_count(const struct ZcritModel *model, size_t *out);

/**
 * Scalar curvature at the radial nodes; `len` must equal the node count.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum ZcritStatus zcrit_model_scalar_curvature(const struct ZcritModel *model,
                                              double *buf,
                                              size_t len);

/**
 * `∫ Z̃_j ωⁿ` by quadrature and its topological value.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_model_z_integral(const struct ZcritModel *model,
                                        uint32_t j,
                                        double *integral,
                                        double *topological);

/**
 * Section basis, Gram matrix and Bergman density at level `k`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_bergman_new(const struct ZcritModel *model,
                                   uint32_t k,
                                   struct ZcritBergman **out);

/**
 * # Safety
 * `b` must come from this library and not be used afterwards. Null is a no-op.
 */
void zcrit_bergman_free(struct ZcritBergman *b);

/**
 * Dimension of the space of holomorphic sections.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_bergman_dimension(const struct ZcritBergman *b, size_t *out);

/**
 * Condition number of the scaled Gram matrix.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_bergman_condition(const struct ZcritBergman *b, double *out);

/**
 * Number of samples of the density (radial or full grid, depending on the basis).
 *
 * # Safety
 * Pointers must be valid.
 */
enum ZcritStatus zcrit_bergman_density_len(const struct ZcritBergman *b, size_t *out);

/**
 * Bergman density `ρ_k` at the sample nodes.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum ZcritStatus zcrit_bergman_density(const struct ZcritBergman *b, double *buf, size_t len);

/**
 * Runs the experiment in a TOML config and returns the report as JSON.
 * `passed` receives whether every check passed. Free the string with
 * [`zcrit_string_free`].
 *
 * # Safety
 * `config` must be a NUL-terminated string; the out pointers must be valid.
 */
enum ZcritStatus zcrit_run(const char *config, char **report_json, bool *passed);

/**
 * # Safety
 * `s` must come from this library. Null is a no-op.
 */
void zcrit_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZCRIT_H */
