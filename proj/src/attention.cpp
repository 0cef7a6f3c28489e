#include "monattn/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace monattn {

namespace {

void require_prob_row(const Vec& p, const char* what) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0 || p[i] > 1.0) {
            throw std::domain_error(std::string(what) + ": entry " +
                                    std::to_string(i) + " = " + std::to_string(p[i]) +
                                    " is not a probability");
        }
    }
}

void require_same_length(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw std::domain_error(std::string(what) + ": length mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

Memory::Memory(Mat m) : states(std::move(m)) {
    if (states.rows() < 1) {
        throw std::domain_error("Memory: need at least one entry");
    }
    require_finite(states, "Memory::states");
}

AttentionWeights AttentionWeights::initial(Eigen::Index memory_length) {
    if (memory_length < 1) {
        throw std::domain_error("AttentionWeights::initial: empty memory");
    }
    AttentionWeights w;
    w.alpha = Vec::Zero(memory_length);
    w.alpha[0] = 1.0;
    w.row_index = 0;
    return w;
}

double energy_bahdanau(const Mat& W, const Mat& V, const Vec& b, const Vec& v,
                       Eigen::Ref<const Vec> s_prev, Eigen::Ref<const Vec> h_j) {
    if (W.cols() != s_prev.size() || V.cols() != h_j.size() || W.rows() != V.rows() ||
        b.size() != W.rows() || v.size() != W.rows()) {
        throw std::domain_error("energy_bahdanau: inconsistent dimensions");
    }
    const Vec u = (W * s_prev + V * h_j + b).array().tanh();
    return v.dot(u);
}

double energy_modified(const MonotonicEnergyParams& params,
                       Eigen::Ref<const Vec> s_prev, Eigen::Ref<const Vec> h_j) {
    if (params.W.cols() != s_prev.size() || params.V.cols() != h_j.size() ||
        params.W.rows() != params.V.rows() || params.b.size() != params.W.rows() ||
        params.v.size() != params.W.rows()) {
        throw std::domain_error("energy_modified: inconsistent dimensions");
    }
    const double norm = params.v.norm();
    if (!(norm > 0.0)) {
        throw std::domain_error("energy_modified: v must be nonzero");
    }
    const Vec u = (params.W * s_prev + params.V * h_j + params.b).array().tanh();
    return params.g * (params.v.dot(u) / norm) + params.r;
}

double energy_dot(const DotEnergyParams& params, Eigen::Ref<const Vec> s_prev,
                  Eigen::Ref<const Vec> h_j) {
    if (params.W.rows() != s_prev.size() || params.W.cols() != h_j.size()) {
        throw std::domain_error("energy_dot: inconsistent dimensions");
    }
    return params.g * s_prev.dot(params.W * h_j) + params.r;
}

Vec energy_row_cached(const MonotonicEnergyParams& params,
                      Eigen::Ref<const Vec> s_prev, const Memory& memory,
                      Mat& u_out) {
    if (params.W.cols() != s_prev.size() || params.V.cols() != memory.dim() ||
        params.W.rows() != params.V.rows() || params.b.size() != params.W.rows() ||
        params.v.size() != params.W.rows()) {
        throw std::domain_error("energy_row: inconsistent dimensions");
    }
    const double norm = params.v.norm();
    if (!(norm > 0.0)) {
        throw std::domain_error("energy_row: v must be nonzero");
    }
    const Vec ws = params.W * s_prev + params.b;
    // T x d_a: row j is tanh(W s + V h_j + b)
    Mat pre = memory.states * params.V.transpose();
    pre.rowwise() += ws.transpose();
    u_out = pre.array().tanh();
    return (params.g / norm) * (u_out * params.v) +
           Vec::Constant(memory.length(), params.r);
}

Vec energy_row(const MonotonicEnergyParams& params, Eigen::Ref<const Vec> s_prev,
               const Memory& memory) {
    Mat u;
    return energy_row_cached(params, s_prev, memory, u);
}

Vec energy_row(const DotEnergyParams& params, Eigen::Ref<const Vec> s_prev,
               const Memory& memory) {
    if (params.W.rows() != s_prev.size() || params.W.cols() != memory.dim()) {
        throw std::domain_error("energy_row: inconsistent dimensions");
    }
    return params.g * (memory.states * (params.W.transpose() * s_prev)) +
           Vec::Constant(memory.length(), params.r);
}

AttentionResult softmax_attention(const Vec& energies, const Memory& memory) {
    require_same_length(energies.size(), memory.length(), "softmax_attention");
    AttentionResult out;
    out.weights.alpha = softmax(energies);
    out.weights.row_index = 0;
    out.context = memory.states.transpose() * out.weights.alpha;
    return out;
}

AttentionWeights monotonic_alpha_recurrence(const Vec& p_row,
                                            const AttentionWeights& alpha_prev) {
    require_same_length(p_row.size(), alpha_prev.alpha.size(),
                        "monotonic_alpha_recurrence");
    require_prob_row(p_row, "monotonic_alpha_recurrence: p_row");
    const Eigen::Index T = p_row.size();
    AttentionWeights out;
    out.alpha = Vec::Zero(T);
    out.row_index = alpha_prev.row_index + 1;
    double q = 0.0;
    double p_prev = 0.0;
    for (Eigen::Index j = 0; j < T; ++j) {
        q = (1.0 - p_prev) * q + alpha_prev.alpha[j];
        out.alpha[j] = p_row[j] * q;
        p_prev = p_row[j];
    }
    return out;
}

AttentionWeights monotonic_alpha_scan(const Vec& p_row,
                                      const AttentionWeights& alpha_prev,
                                      const MonotonicConfig& cfg) {
    require_same_length(p_row.size(), alpha_prev.alpha.size(), "monotonic_alpha_scan");
    require_prob_row(p_row, "monotonic_alpha_scan: p_row");
    const Eigen::Index T = p_row.size();
    const Vec one_minus = Vec::Ones(T) - p_row;
    const Vec keep = exclusive_cumprod(one_minus);
    Vec scaled(T);
    if (cfg.denom_mode == DenomMode::kClamped) {
        const Vec denom = exclusive_cumprod_stable(one_minus, cfg.eps);
        scaled = alpha_prev.alpha.array() / denom.array();
    } else {
        scaled = alpha_prev.alpha;
    }
    const Vec q = keep.array() * cumsum(scaled).array();
    AttentionWeights out;
    out.alpha = p_row.array() * q.array();
    out.row_index = alpha_prev.row_index + 1;
    return out;
}

Vec monotonic_context(const AttentionWeights& alpha, const Memory& memory) {
    require_same_length(alpha.alpha.size(), memory.length(), "monotonic_context");
    return memory.states.transpose() * alpha.alpha;
}

namespace {

template <class Params>
AttentionResult soft_step_impl(const Params& params, Eigen::Ref<const Vec> s_prev,
                               const Memory& memory, const AttentionWeights& alpha_prev,
                               const MonotonicConfig& cfg, SeededRng* noise_rng) {
    Vec e = energy_row(params, s_prev, memory);
    if (noise_rng != nullptr && cfg.noise_std > 0.0) {
        e += noise_rng->gaussian(e.size(), cfg.noise_std);
    }
    Vec p(e.size());
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        p[j] = sigmoid(e[j]);
    }
    AttentionResult out;
    out.weights = monotonic_alpha_recurrence(p, alpha_prev);
    out.context = monotonic_context(out.weights, memory);
    return out;
}

template <class PAt>
HardStepResult hard_step_impl(PAt&& p_at, const Memory& memory, MonotonicState state,
                              double tau, SelectionMode mode, SeededRng* rng) {
    if (state.t_prev < 1 || state.t_prev > memory.length()) {
        throw std::domain_error("hard_monotonic_step: t_prev out of range");
    }
    const HardScanOutcome scan = hard_scan(p_at, state.t_prev,
                                           static_cast<int>(memory.length()), tau,
                                           mode, rng);
    HardStepResult out;
    out.energy_evals = scan.inspected;
    out.selected = scan.selected;
    if (scan.selected) {
        out.context = memory.states.row(*scan.selected - 1).transpose();
        out.state.t_prev = *scan.selected;
    } else {
        out.context = Vec::Zero(memory.dim());
        out.state.t_prev = state.t_prev;  // fall-off: carry forward
    }
    return out;
}

}  // namespace

AttentionResult soft_monotonic_step(const MonotonicEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const MonotonicConfig& cfg, SeededRng* noise_rng) {
    return soft_step_impl(params, s_prev, memory, alpha_prev, cfg, noise_rng);
}

AttentionResult soft_monotonic_step(const DotEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const MonotonicConfig& cfg, SeededRng* noise_rng) {
    return soft_step_impl(params, s_prev, memory, alpha_prev, cfg, noise_rng);
}

HardStepResult hard_monotonic_step(const MonotonicEnergyParams& params,
                                   Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                   MonotonicState state, const MonotonicConfig& cfg) {
    auto p_at = [&](int j) {
        return sigmoid(energy_modified(params, s_prev,
                                       memory.states.row(j - 1).transpose()));
    };
    return hard_step_impl(p_at, memory, state, cfg.tau, SelectionMode::kThreshold,
                          nullptr);
}

HardStepResult hard_monotonic_step(const DotEnergyParams& params,
                                   Eigen::Ref<const Vec> s_prev, const Memory& memory,
                                   MonotonicState state, const MonotonicConfig& cfg) {
    auto p_at = [&](int j) {
        return sigmoid(energy_dot(params, s_prev,
                                  memory.states.row(j - 1).transpose()));
    };
    return hard_step_impl(p_at, memory, state, cfg.tau, SelectionMode::kThreshold,
                          nullptr);
}

HardStepResult hard_monotonic_step_sampled(const MonotonicEnergyParams& params,
                                           Eigen::Ref<const Vec> s_prev,
                                           const Memory& memory, MonotonicState state,
                                           SeededRng& rng) {
    auto p_at = [&](int j) {
        return sigmoid(energy_modified(params, s_prev,
                                       memory.states.row(j - 1).transpose()));
    };
    return hard_step_impl(p_at, memory, state, /*tau=*/0.5, SelectionMode::kSample,
                          &rng);
}

}  // namespace monattn
