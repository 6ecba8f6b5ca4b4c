#ifndef UNIWALK_H
#define UNIWALK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call. Nonzero values match the exit codes of the command-line tool.
 */
typedef enum UwStatus {
  UW_STATUS_OK = 0,
  /**
   * A panic was caught at the boundary.
   */
  UW_STATUS_INTERNAL = 1,
  /**
   * Null pointer, invalid UTF-8 or an out-of-range value.
   */
  UW_STATUS_ARGUMENT = 2,
  UW_STATUS_IO = 3,
  UW_STATUS_PARSE = 4,
  UW_STATUS_DIVERGENCE = 5,
  /**
   * Unknown user or item.
   */
  UW_STATUS_LOOKUP = 6,
  /**
   * Unreadable or incompatible model file.
   */
  UW_STATUS_FORMAT = 7,
} UwStatus;

typedef enum UwCoocScope {
  UW_COOC_SCOPE_ALL = 0,
  UW_COOC_SCOPE_LAST = 1,
} UwCoocScope;

typedef enum UwTrainMode {
  UW_TRAIN_MODE_REFERENCE = 0,
  UW_TRAIN_MODE_PERFORMANCE = 1,
} UwTrainMode;

typedef enum UwEntityKind {
  UW_ENTITY_KIND_USER = 0,
  UW_ENTITY_KIND_ITEM = 1,
} UwEntityKind;

/**
 * A trained model.
 */
typedef struct UwModel UwModel;

/**
 * Training hyperparameters; fill with [`uw_hyperparams_default`] or
 * [`uw_hyperparams_preset`] before changing fields.
 */
typedef struct UwHyperparams {
  double c;
  size_t walk_length;
  size_t window;
  double alpha;
  double beta;
  size_t dim;
  double lambda_b;
  double lambda_z;
  double eta;
  double gamma;
  size_t walks_per_node;
  size_t iterations;
  uint64_t seed;
  double grad_clip;
  bool clamp_predictions;
  size_t patience;
  double validation_fraction;
  enum UwCoocScope cooc_scope;
  enum UwTrainMode mode;
} UwHyperparams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static string.
 */
const char *uw_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *uw_last_error_message(void);

/**
 * Default hyperparameters (the `filmtrust` preset).
 *
 * # Safety
 * `out` is null or points to writable memory for one `UwHyperparams`.
 */
enum UwStatus uw_hyperparams_default(struct UwHyperparams *out);

/**
 * Hyperparameters of a named preset: `filmtrust`, `epinions` or `flixster`.
 *
 * # Safety
 * `name` is a NUL-terminated string; `out` points to writable memory for one `UwHyperparams`.
 */
enum UwStatus uw_hyperparams_preset(const char *name, struct UwHyperparams *out);

/**
 * Train a model from a ratings file and an optional trust file.
 *
 * `delimiter` is null for whitespace-separated files, or one of
 * `whitespace`, `tab`, `comma` or a single character. `hp` may be null for
 * the defaults. On success `*out` receives a new handle.
 *
 * # Safety
 * String arguments are null (where allowed) or NUL-terminated; `hp` is null
 * or points to a `UwHyperparams`; `out` points to writable memory for one pointer.
 */
enum UwStatus uw_train(const char *ratings_path,
                       const char *trust_path,
                       const char *delimiter,
                       const struct UwHyperparams *hp,
                       struct UwModel **out);

/**
 * Load a model file.
 *
 * # Safety
 * `path` is NUL-terminated; `out` points to writable memory for one pointer.
 */
enum UwStatus uw_model_load(const char *path, struct UwModel **out);

/**
 * Write a model file.
 *
 * # Safety
 * `model` is a live handle; `path` is NUL-terminated.
 */
enum UwStatus uw_model_save(const struct UwModel *model, const char *path);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `model` is null or a handle from this library that has not been freed.
 */
void uw_model_free(struct UwModel *model);

/**
 * Number of users or items known to the model; 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t uw_model_entity_count(const struct UwModel *model, enum UwEntityKind kind);

/**
 * Latent dimension; 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t uw_model_dim(const struct UwModel *model);

/**
 * Predicted rating of `item` by `user`. Unknown entities fall back toward
 * the global mean rather than failing.
 *
 * # Safety
 * `model` is a live handle; `user` and `item` are NUL-terminated; `out` is writable.
 */
enum UwStatus uw_predict(const struct UwModel *model,
                         const char *user,
                         const char *item,
                         bool clamp,
                         double *out);

/**
 * Co-occurrence similarity of two entities, in `[0, 1]`.
 *
 * # Safety
 * `model` is a live handle; ids are NUL-terminated; `out` is writable.
 */
enum UwStatus uw_similarity(const struct UwModel *model,
                            enum UwEntityKind kind_a,
                            const char *id_a,
                            enum UwEntityKind kind_b,
                            const char *id_b,
                            double *out);

/**
 * Top-`n` recommendations for `user` with `k` explanations each, as a JSON
 * report. A negative threshold selects the midpoint of the rating scale.
 * `*out` receives a string to release with [`uw_string_free`].
 *
 * # Safety
 * `model` is a live handle; `user` is NUL-terminated; `out` points to writable memory for one pointer.
 */
enum UwStatus uw_explain_json(const struct UwModel *model,
                              const char *user,
                              size_t n,
                              size_t k,
                              double high_threshold,
                              double low_threshold,
                              char **out);

/**
 * Release a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` is null or a string from this library that has not been freed.
 */
void uw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNIWALK_H */
