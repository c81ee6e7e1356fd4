#ifndef MOLSETS_H
#define MOLSETS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MolsetsStatus {
  MOLSETS_STATUS_OK = 0,
  MOLSETS_STATUS_NULL_POINTER = 1,
  MOLSETS_STATUS_INVALID_UTF8 = 2,
  MOLSETS_STATUS_DATA_ERROR = 3,
  MOLSETS_STATUS_NUMERIC_ERROR = 4,
  MOLSETS_STATUS_IO_ERROR = 5,
  MOLSETS_STATUS_PANIC = 6,
} MolsetsStatus;

/**
 * Opaque model handle.
 */
typedef struct MolsetsModel MolsetsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty when none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *molsets_last_error(void);

/**
 * Loads a JSON checkpoint into a new handle.
 */
enum MolsetsStatus molsets_model_load(const char *path, struct MolsetsModel **out);

/**
 * Freshly initialized model with tuned defaults. `conv` is one of
 * graphconv, sageconv, gcnconv, gatconv, dmpnn; `variant` one of molsets,
 * wsum, concat.
 */
enum MolsetsStatus molsets_model_new(const char *conv,
                                     const char *variant,
                                     uint64_t seed,
                                     struct MolsetsModel **out);

/**
 * Writes the model to a JSON checkpoint.
 */
enum MolsetsStatus molsets_model_save(const struct MolsetsModel *model, const char *path);

/**
 * Releases a handle; null is ignored.
 */
void molsets_model_free(struct MolsetsModel *model);

/**
 * Predicted log10 conductivity (S/cm) of `n_solvents` solvents with their
 * weight fractions, one salt and its molality (mol/kg).
 */
enum MolsetsStatus molsets_model_predict(const struct MolsetsModel *model,
                                         const char *const *solvent_smiles,
                                         const double *weights,
                                         size_t n_solvents,
                                         const char *salt_smiles,
                                         double molality,
                                         double *out);

/**
 * Featurized graph as a JSON string; free it with `molsets_string_free`.
 * A non-positive `mol_weight` means no override.
 */
enum MolsetsStatus molsets_featurize_json(const char *smiles, double mol_weight, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 */
void molsets_string_free(char *s);

/**
 * Number of equal-weight binary candidates: C(n, 2) times the salt count.
 */
size_t molsets_candidate_count(size_t n_solvents, size_t n_salts);

/**
 * Least-squares fit of log10 conductivity against 1/T.
 */
enum MolsetsStatus molsets_arrhenius_fit(const double *temperatures_k,
                                         const double *log10_sigma,
                                         size_t n,
                                         double *slope_out,
                                         double *intercept_out,
                                         double *r_squared_out);

enum MolsetsStatus molsets_pearson(const double *targets,
                                   const double *preds,
                                   size_t n,
                                   double *out);

enum MolsetsStatus molsets_spearman(const double *targets,
                                    const double *preds,
                                    size_t n,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOLSETS_H */
