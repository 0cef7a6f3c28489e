#ifndef MONATTN_ATTENTION_HPP
#define MONATTN_ATTENTION_HPP

#include <cstdint>
#include <optional>

#include "monattn/numkit.hpp"
#include "monattn/rng.hpp"

namespace monattn {

// Encoder hidden-state sequence addressed by attention. Row j holds the
// state for input position j+1 (interfaces use 1-based memory indices).
struct Memory {
    Mat states;  // T x d_h

    explicit Memory(Mat m);

    Eigen::Index length() const { return states.rows(); }
    Eigen::Index dim() const { return states.cols(); }
};

// One row of the attention distribution. Softmax rows sum to 1;
// monotonic rows are sub-stochastic (sum <= 1, the rest is the
// probability of falling off the end of the memory).
struct AttentionWeights {
    Vec alpha;
    int row_index = 0;

    // The conventional starting row: all mass on the first entry.
    static AttentionWeights initial(Eigen::Index memory_length);
};

// Index of the memory entry chosen at the previous output step (1-based);
// scanning always resumes from here, so it never decreases.
struct MonotonicState {
    int t_prev = 1;
};

enum class DenomMode { kClamped, kUnit };

struct MonotonicConfig {
    double noise_std = 1.0;   // pre-sigmoid noise, training only
    double tau = 0.5;         // hard selection threshold
    double eps = 1e-10;       // scan denominator floor
    DenomMode denom_mode = DenomMode::kClamped;
    std::uint64_t seed = 0;
};

// Energy function a(s_{i-1}, h_j) = g (v^T/|v|) tanh(W s + V h + b) + r.
// The weight-normalized v and the two scalars keep the pre-sigmoid
// activations well scaled; r < 0 at init slows the attention decay.
struct MonotonicEnergyParams {
    Mat W;  // d_a x d_s
    Mat V;  // d_a x d_h
    Vec b;  // d_a
    Vec v;  // d_a, must be nonzero
    double g = 1.0;
    double r = -2.0;
};

// Dot-product variant a(s_{i-1}, h_j) = g (s^T W h) + r.
struct DotEnergyParams {
    Mat W;  // d_s x d_h
    double g = 1.0;
    double r = 0.0;
};

enum class EnergyKind { kModified, kDot };

double energy_bahdanau(const Mat& W, const Mat& V, const Vec& b, const Vec& v,
                       Eigen::Ref<const Vec> s_prev, Eigen::Ref<const Vec> h_j);
double energy_modified(const MonotonicEnergyParams& params,
                       Eigen::Ref<const Vec> s_prev, Eigen::Ref<const Vec> h_j);
double energy_dot(const DotEnergyParams& params,
                  Eigen::Ref<const Vec> s_prev, Eigen::Ref<const Vec> h_j);

// Whole-row energies for one decoder state (batched form of the per-pair
// kernels above; used by the soft/training path which touches every j).
Vec energy_row(const MonotonicEnergyParams& params, Eigen::Ref<const Vec> s_prev,
               const Memory& memory);
Vec energy_row(const DotEnergyParams& params, Eigen::Ref<const Vec> s_prev,
               const Memory& memory);

// As energy_row, but also returns the tanh'd pre-activations (row j holds
// tanh(W s + V h_j + b)), which the backward pass reuses.
Vec energy_row_cached(const MonotonicEnergyParams& params,
                      Eigen::Ref<const Vec> s_prev, const Memory& memory,
                      Mat& u_out);

struct AttentionResult {
    AttentionWeights weights;
    Vec context;
};

// Standard softmax attention: alpha = softmax(energies), context = sum_j
// alpha_j h_j.
AttentionResult softmax_attention(const Vec& energies, const Memory& memory);

// One row of the monotonic attention expectation via the division-free
// q-form: q_j = (1 - p_{j-1}) q_{j-1} + alpha_prev_j, alpha_j = p_j q_j,
// with q_0 = 0 and p_0 = 0.
AttentionWeights monotonic_alpha_recurrence(const Vec& p_row,
                                            const AttentionWeights& alpha_prev);

// Same row computed with prefix-scan primitives:
// q = cumprod(1 - p) * cumsum(alpha_prev / D), where D is the exclusive
// cumprod floored at cfg.eps (kClamped) or replaced by ones (kUnit).
AttentionWeights monotonic_alpha_scan(const Vec& p_row,
                                      const AttentionWeights& alpha_prev,
                                      const MonotonicConfig& cfg);

// Expected context; the sub-stochastic residual implicitly weights an
// all-zero memory entry.
Vec monotonic_context(const AttentionWeights& alpha, const Memory& memory);

// Soft (training-time) monotonic attention step. Pre-sigmoid noise is
// drawn from noise_rng when it is non-null; pass nullptr for the
// deterministic evaluation path.
AttentionResult soft_monotonic_step(const MonotonicEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const MonotonicConfig& cfg, SeededRng* noise_rng);
AttentionResult soft_monotonic_step(const DotEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const MonotonicConfig& cfg, SeededRng* noise_rng);

enum class SelectionMode { kThreshold, kSample };

struct HardScanOutcome {
    std::optional<int> selected;  // 1-based memory index
    int inspected = 0;            // number of p values evaluated
};

// Left-to-right scan of Algorithm-1 shape over p values supplied by a
// callable (1-based index -> probability). Stops at the first selection;
// kThreshold selects when p > tau, kSample draws z ~ Bernoulli(p).
template <class PAt>
HardScanOutcome hard_scan(PAt&& p_at, int t_prev, int memory_length, double tau,
                          SelectionMode mode, SeededRng* rng) {
    HardScanOutcome out;
    for (int j = t_prev; j <= memory_length; ++j) {
        const double p = p_at(j);
        ++out.inspected;
        const bool choose = (mode == SelectionMode::kThreshold)
                                ? (p > tau)
                                : (rng->bernoulli(p));
        if (choose) {
            out.selected = j;
            break;
        }
    }
    return out;
}

struct HardStepResult {
    Vec context;
    MonotonicState state;
    std::optional<int> selected;  // 1-based; empty on fall-off
    int energy_evals = 0;
};

// Online hard monotonic step: evaluates one energy per inspected entry,
// starting at state.t_prev, and selects the first entry whose p exceeds
// cfg.tau. On fall-off the context is zero and t_prev carries forward.
HardStepResult hard_monotonic_step(const MonotonicEnergyParams& params,
                                   Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                   MonotonicState state, const MonotonicConfig& cfg);
HardStepResult hard_monotonic_step(const DotEnergyParams& params,
                                   Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                   MonotonicState state, const MonotonicConfig& cfg);

// Sampling-mode variant (z ~ Bernoulli(p)) used for oracle validation.
HardStepResult hard_monotonic_step_sampled(const MonotonicEnergyParams& params,
                                           Eigen::Ref<const Vec> s_prev,
                                           const Memory& memory, MonotonicState state,
                                           SeededRng& rng);

}  // namespace monattn

#endif  // MONATTN_ATTENTION_HPP
