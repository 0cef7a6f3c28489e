#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "monattn/attention.hpp"
#include "monattn/rng.hpp"

namespace monattn {

// Synthetic monotonic transduction: each input symbol expands deterministically
// into one or two output symbols, so the alignment is monotonic by construction.
struct TaskSpec {
    int vocab_size = 0;
    uint64_t seed = 0;
    std::vector<std::vector<int>> expansion;  // one entry per input symbol

    int sos() const { return vocab_size; }
    int eos() const { return vocab_size + 1; }
    int total_vocab() const { return vocab_size + 2; }
};

TaskSpec generate_task(uint64_t seed, int vocab_size);
uint64_t task_hash(const TaskSpec& task);

struct TokenPair {
    std::vector<int> input;
    std::vector<int> target;  // expansions concatenated, terminated by EOS
};

TokenPair sample_pair(const TaskSpec& task, SeededRng& rng, int min_len,
                      int max_len);

// Single GRU cell (update gate z, reset gate r, candidate n):
//   h' = z * h + (1 - z) * n,  n = tanh(Wn x + Un (r * h) + bn)
struct GruParams {
    Mat Wz, Uz, Wr, Ur, Wn, Un;
    Vec bz, br, bn;
};

struct GruCache {
    Vec x, h_prev, z, r, n, rh, h_new;
};

Vec gru_forward(const GruParams& params, const Vec& x, const Vec& h_prev);
GruCache gru_forward_cached(const GruParams& params, const Vec& x,
                            const Vec& h_prev);
// Accumulates into `grads`; overwrites d_x and d_h_prev.
void gru_backward(const GruParams& params, const GruCache& cache,
                  const Vec& d_h_new, GruParams& grads, Vec& d_x, Vec& d_h_prev);

struct ModelDims {
    int vocab = 20;
    int d_emb = 32;
    int d_h = 64;  // encoder hidden
    int d_s = 64;  // decoder hidden
    int d_a = 64;  // attention hidden (modified energy only)
    EnergyKind energy = EnergyKind::kModified;
};

// Shared embedding covers input symbols plus SOS/EOS (inputs only use the
// first vocab rows). Output layer maps [s_i; c_i] to total_vocab logits.
// Exactly one of attn / attn_dot is live, selected by dims.energy.
struct ModelParams {
    ModelDims dims;
    Mat embed;  // (vocab + 2) x d_emb
    GruParams enc, dec;
    MonotonicEnergyParams attn;
    DotEnergyParams attn_dot;
    Mat W_out;
    Vec b_out;
};

struct NamedTensor {
    std::string name;
    double* data;
    Eigen::Index size;
    std::vector<Eigen::Index> dims;
};

// Stable, documented tensor order for optimizers and serialization.
std::vector<NamedTensor> named_tensors(ModelParams& params);
Eigen::Index param_count(const ModelParams& params);
ModelParams zeros_like(const ModelParams& params);
ModelParams zero_model(const ModelDims& dims);
ModelParams init_model(const ModelDims& dims, double init_scale, double energy_r,
                       SeededRng& rng);

Memory encode(const ModelParams& params, const std::vector<int>& input);

struct TrainForward {
    double loss = 0.0;  // mean per-token cross-entropy
    Mat alphas;         // U x T attention rows
};

// Teacher-forced soft monotonic decode; rng (if given) supplies energy noise.
TrainForward decode_train(const ModelParams& params, const Memory& memory,
                          const std::vector<int>& target,
                          const MonotonicConfig& cfg, SeededRng* noise_rng);

// Full forward + backward for one example (encode included); accumulates into
// `grads` and returns the loss. Forward arithmetic matches decode_train(encode)
// bit for bit. Optionally reports the attention rows.
double example_gradient(const ModelParams& params, const std::vector<int>& input,
                        const std::vector<int>& target, const MonotonicConfig& cfg,
                        SeededRng* noise_rng, ModelParams& grads,
                        Mat* alphas_out = nullptr);

struct HardDecodeResult {
    std::vector<int> tokens;  // emitted tokens, EOS excluded
    int energy_evals = 0;
    // 1-based memory index attended at each decode step (including the step
    // that emitted EOS); 0 once the scan has fallen off the memory end.
    std::vector<int> selected;
};

// Greedy argmax emission with hard monotonic contexts. After the first
// fall-off the decoder keeps emitting with zero context and no further
// energy evaluations, which bounds total evaluations by T + emitted steps
// (enforced; violation would be a logic error).
HardDecodeResult decode_greedy_hard(const ModelParams& params,
                                    const Memory& memory, int max_len,
                                    const MonotonicConfig& cfg);
// If alphas_out is non-null it receives one attention row per decode step
// performed (including the step that emitted EOS).
std::vector<int> decode_greedy_soft(const ModelParams& params,
                                    const Memory& memory, int max_len,
                                    const MonotonicConfig& cfg,
                                    Mat* alphas_out = nullptr);

struct EvalMetrics {
    double token_accuracy_soft = 0.0;
    double token_accuracy_hard = 0.0;
    double sequence_accuracy = 0.0;   // exact-match rate of the soft decode
    double hard_soft_agreement = 0.0;
};

EvalMetrics evaluate(const TaskSpec& task, const ModelParams& params,
                     const MonotonicConfig& cfg, int n_examples, SeededRng& rng,
                     int min_len, int max_len);

struct TrainConfig {
    double lr = 1e-3;
    // Stepwise exponential schedule: the effective rate at step n is
    // lr * lr_decay_rate^(n / lr_decay_steps) (integer division);
    // lr_decay_steps = 0 disables decay.
    double lr_decay_rate = 1.0;
    int lr_decay_steps = 0;
    // Two-phase noise schedule: if > 0, the pre-sigmoid energy noise is
    // disabled from this step on, so late training sees the exact
    // distribution evaluation uses. 0 keeps noise on throughout.
    int noise_off_step = 0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double clip_norm = 2.0;
    int batch_size = 16;
    int max_steps = 4000;
    int eval_interval = 250;
    int eval_examples = 64;
    int min_len = 5, max_len = 20;
    double init_scale = 0.1;
    double energy_r = -2.0;
    ModelDims dims;
    MonotonicConfig attn;  // noise_std et al. for training-time steps
    uint64_t seed = 0;
};

struct MetricsRow {
    long step = 0;
    double loss = 0.0;
    double token_acc_soft = 0.0, token_acc_hard = 0.0;
    double seq_acc = 0.0, agreement = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct TrainResult {
    ModelParams params;
    long step = 0;
    std::vector<MetricsRow> history;
    // stream counters so a checkpoint can resume the exact RNG position
    uint64_t batch_counter = 0;
    uint64_t noise_counter = 0;
};

// RNG streams derived from cfg.seed: 0 init, 1 batch sampling, 2 energy noise,
// 3 held-out evaluation.
// on_eval, when set, is invoked with each history row as it is recorded
// (progress reporting only; it must not mutate training state).
TrainResult train_loop(
    const TaskSpec& task, const TrainConfig& cfg,
    const std::function<void(const MetricsRow&)>& on_eval = {});

}  // namespace monattn
