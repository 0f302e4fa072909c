#ifndef SUFT_H
#define SUFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SuftStatus {
  SUFT_STATUS_OK = 0,
  SUFT_STATUS_NULL_POINTER = 1,
  SUFT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Result undefined for these inputs (e.g. a metric's validity condition fails).
   */
  SUFT_STATUS_DOMAIN = 3,
  SUFT_STATUS_IO = 4,
  SUFT_STATUS_PARSE = 5,
  SUFT_STATUS_PANIC = 6,
} SuftStatus;

typedef enum SuftLoss {
  SUFT_LOSS_L1 = 0,
  SUFT_LOSS_L2 = 1,
} SuftLoss;

typedef enum SuftActivation {
  SUFT_ACTIVATION_RELU = 0,
  SUFT_ACTIVATION_TANH = 1,
} SuftActivation;

/**
 * Opaque multilayer perceptron.
 */
typedef struct SuftMlp SuftMlp;

/**
 * Opaque replay buffer.
 */
typedef struct SuftReplayBuffer SuftReplayBuffer;

typedef struct SuftBoundReport {
  double factual;
  double counterfactual;
  double psi;
  double delta;
  double slack;
  bool holds;
} SuftBoundReport;

typedef struct SuftSweepResult {
  bool holds_all;
  size_t violation_count;
  double min_slack;
  size_t assumption_violation_count;
} SuftSweepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *suft_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *suft_version(void);

/**
 * Evaluates the factual-loss bound on an explicit finite joint.
 *
 * Treatment 0 is the target, `1..n_treatments` are controls. Arrays are
 * row-major: `q[t]`, `px_given_t[t * n_obs + x]`, `phi[x * n_treatments + t]`.
 * Each `(x, t)` cell has `n_support` outcome values and probabilities at
 * `outcome_values[(x * n_treatments + t) * n_support + k]` (same layout for
 * `outcome_probs`).
 */
enum SuftStatus suft_verify_bound(size_t n_obs,
                                  size_t n_treatments,
                                  size_t n_support,
                                  const double *q,
                                  const double *px_given_t,
                                  const double *outcome_values,
                                  const double *outcome_probs,
                                  const double *phi,
                                  uint32_t loss,
                                  struct SuftBoundReport *out);

/**
 * Runs `trials` bound verifications on random joints (see the `suft
 * verify-bound` command).
 */
enum SuftStatus suft_verify_random_trials(size_t trials,
                                          size_t max_controls,
                                          uint32_t loss,
                                          uint64_t seed,
                                          struct SuftSweepResult *out);

/**
 * He-uniform initialized network with `n_layers` layer sizes (input first).
 */
enum SuftStatus suft_mlp_new(const size_t *layer_sizes,
                             size_t n_layers,
                             uint32_t activation,
                             uint64_t seed,
                             struct SuftMlp **out);

void suft_mlp_free(struct SuftMlp *net);

/**
 * Number of trainable parameters, or 0 for a null handle.
 */
size_t suft_mlp_param_count(const struct SuftMlp *net);

/**
 * Copies the flat parameter vector into `weights` (length `len`, which must
 * equal the parameter count).
 */
enum SuftStatus suft_mlp_get_weights(const struct SuftMlp *net, double *weights, size_t len);

/**
 * Forward pass of one input row.
 */
enum SuftStatus suft_mlp_forward(const struct SuftMlp *net,
                                 const double *input,
                                 size_t input_len,
                                 double *output,
                                 size_t output_len);

/**
 * Writes the network in the `SUFTNN1` checkpoint format.
 */
enum SuftStatus suft_mlp_save(const struct SuftMlp *net, const char *path);

enum SuftStatus suft_mlp_load(const char *path, struct SuftMlp **out);

enum SuftStatus suft_replay_new(size_t capacity, size_t obs_dim, struct SuftReplayBuffer **out);

void suft_replay_free(struct SuftReplayBuffer *buf);

/**
 * Appends a transition; `obs` and `next_obs` have the buffer's `obs_dim`
 * entries. The oldest transition is evicted when full.
 */
enum SuftStatus suft_replay_push(struct SuftReplayBuffer *buf,
                                 const double *obs,
                                 const double *next_obs,
                                 size_t action,
                                 double reward,
                                 bool terminated,
                                 double v_behavior,
                                 uint64_t policy_id);

/**
 * Number of stored transitions, or 0 for a null handle.
 */
size_t suft_replay_len(const struct SuftReplayBuffer *buf);

/**
 * Number of distinct policy ids among stored transitions.
 */
size_t suft_replay_distinct_policies(const struct SuftReplayBuffer *buf);

/**
 * Stored behavior value of the `index`-th oldest transition.
 */
enum SuftStatus suft_replay_v_behavior(const struct SuftReplayBuffer *buf,
                                       size_t index,
                                       double *out);

/**
 * Improvement percentage of `higher` over `lower` relative to `random`;
 * `SUFT_STATUS_DOMAIN` when either margin over random is not positive.
 */
enum SuftStatus suft_improvement_pct(double higher, double lower, double random, double *out);

enum SuftStatus suft_upper_median(const double *values, size_t n, double *out);

/**
 * Two-sided Welch t-test p-value.
 */
enum SuftStatus suft_welch_p_value(const double *a,
                                   size_t n_a,
                                   const double *b,
                                   size_t n_b,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUFT_H */
