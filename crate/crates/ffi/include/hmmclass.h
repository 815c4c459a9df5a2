#ifndef HMMCLASS_H
#define HMMCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Initialization scheme for [`HmcTrainingConfig`].
typedef enum HmcInitScheme {
  HMC_INIT_SCHEME_DATA_QUANTILE = 0,
  HMC_INIT_SCHEME_PAPER_RANDOM = 1,
} HmcInitScheme;

// Status codes returned by every fallible function.
typedef enum HmcStatus {
  HMC_STATUS_OK = 0,
  HMC_STATUS_NULL_POINTER = 1,
  HMC_STATUS_INVALID_ARGUMENT = 2,
  HMC_STATUS_INVALID_MODEL = 3,
  HMC_STATUS_INVALID_OBSERVATION = 4,
  HMC_STATUS_TYPE_MISMATCH = 5,
  HMC_STATUS_EMPTY_SEQUENCE = 6,
  HMC_STATUS_LENGTH_MISMATCH = 7,
  HMC_STATUS_IMPOSSIBLE_SEQUENCE = 8,
  HMC_STATUS_DEGENERATE_VARIANCE = 9,
  HMC_STATUS_SEQUENCE_TOO_SHORT = 10,
  HMC_STATUS_EMPTY_TRAINING_SET = 11,
  HMC_STATUS_UNCLASSIFIABLE = 12,
  HMC_STATUS_PARSE = 13,
  HMC_STATUS_INTERNAL = 99,
} HmcStatus;

// Opaque model-bank handle.
typedef struct HmcBank HmcBank;

// Opaque model handle.
typedef struct HmcModel HmcModel;

// Plain-data mirror of the training configuration.
typedef struct HmcTrainingConfig {
  size_t n_states;
  size_t max_iterations;
  double rel_tolerance;
  uint64_t seed;
  enum HmcInitScheme init_scheme;
  double variance_floor;
} HmcTrainingConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hmc_version(void);

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next library call on the same thread.
const char *hmc_last_error_message(void);

// Frees a string returned by a `*_to_json` function.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library and not yet freed.
void hmc_string_free(char *s);

// Default training configuration (17 states, quantile initialization).
struct HmcTrainingConfig hmc_training_config_default(void);

// Parses a model from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HmcStatus hmc_model_from_json(const char *json, struct HmcModel **out);

// Serializes a model; free the result with [`hmc_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum HmcStatus hmc_model_to_json(const struct HmcModel *model, char **out);

// # Safety
// `model` must be NULL or a handle from this library, freed at most once.
void hmc_model_free(struct HmcModel *model);

// Number of hidden states, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t hmc_model_n_states(const struct HmcModel *model);

// Log-likelihood of a real-valued sequence (Gaussian models). Writes
// `-INFINITY` for impossible sequences.
//
// # Safety
// `values` must point to `len` doubles; `out` must be writable.
enum HmcStatus hmc_model_log_likelihood(const struct HmcModel *model,
                                        const double *values,
                                        size_t len,
                                        double *out);

// Log-likelihood of a symbol sequence (discrete models).
//
// # Safety
// `symbols` must point to `len` values; `out` must be writable.
enum HmcStatus hmc_model_log_likelihood_symbols(const struct HmcModel *model,
                                                const size_t *symbols,
                                                size_t len,
                                                double *out);

// Most probable state path of a real-valued sequence.
//
// # Safety
// `values` must point to `len` doubles, `path_out` to `len` writable
// `size_t`; `log_joint_out` may be NULL.
enum HmcStatus hmc_model_viterbi(const struct HmcModel *model,
                                 const double *values,
                                 size_t len,
                                 size_t *path_out,
                                 double *log_joint_out);

// State posteriors, written row-major into `gamma_out` (`len × n_states`).
//
// # Safety
// `values` must point to `len` doubles and `gamma_out` to
// `len * n_states` writable doubles.
enum HmcStatus hmc_model_posteriors(const struct HmcModel *model,
                                    const double *values,
                                    size_t len,
                                    double *gamma_out);

// Row-major unfolding, z-scoring and cumulative sum of a `rows × cols`
// image; writes `rows * cols` values.
//
// # Safety
// `pixels` must point to `rows * cols` doubles and `out` to as many
// writable doubles.
enum HmcStatus hmc_fluctuation_profile(const double *pixels, size_t rows, size_t cols, double *out);

// Trains a Gaussian model on `n_seqs` sequences; `seqs[i]` has `lens[i]`
// values. `config` may be NULL for defaults; `final_loglik` may be NULL.
//
// # Safety
// `seqs` and `lens` must point to `n_seqs` entries each, and every
// `seqs[i]` to `lens[i]` doubles.
enum HmcStatus hmc_train_gaussian(const double *const *seqs,
                                  const size_t *lens,
                                  size_t n_seqs,
                                  const struct HmcTrainingConfig *config,
                                  struct HmcModel **out,
                                  double *final_loglik);

// Parses a model bank from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HmcStatus hmc_bank_from_json(const char *json, struct HmcBank **out);

// # Safety
// `bank` must be a live handle; `out` must be writable.
enum HmcStatus hmc_bank_to_json(const struct HmcBank *bank, char **out);

// # Safety
// `bank` must be NULL or a handle from this library, freed at most once.
void hmc_bank_free(struct HmcBank *bank);

// Number of classes, or 0 for a NULL handle.
//
// # Safety
// `bank` must be NULL or a live handle.
size_t hmc_bank_len(const struct HmcBank *bank);

// Label of class `index`, owned by the bank; NULL if out of range.
//
// # Safety
// `bank` must be NULL or a live handle.
const char *hmc_bank_label(const struct HmcBank *bank, size_t index);

// Classifies a real-valued sequence. Writes the index of the predicted
// class and, if `scores_out` is non-NULL, `hmc_bank_len(bank)` per-class
// log-likelihoods in bank order.
//
// # Safety
// `values` must point to `len` doubles; `predicted` must be writable;
// `scores_out` must be NULL or hold `hmc_bank_len(bank)` doubles.
enum HmcStatus hmc_bank_classify(const struct HmcBank *bank,
                                 const double *values,
                                 size_t len,
                                 size_t *predicted,
                                 double *scores_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMMCLASS_H */
