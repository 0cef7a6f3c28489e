#ifndef MONATTN_GRADCHECK_HPP
#define MONATTN_GRADCHECK_HPP

#include <functional>

#include "monattn/attention.hpp"
#include "monattn/numkit.hpp"

namespace monattn {

// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / (2h).
Vec finite_difference(const std::function<double(const Vec&)>& f, const Vec& x,
                      double h);

struct GradReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    bool pass = false;
};

// Per-entry relative error |a - n| / max(|a|, |n|, abs_tol); passes iff
// every entry stays within rel_tol.
GradReport check_gradients(const Vec& analytic, const Vec& numeric,
                           double rel_tol, double abs_tol);

struct AlphaGrads {
    Vec d_p_row;
    Vec d_alpha_prev;
};

// Reverse sweep of the q-form recurrence (forward intermediates are
// recomputed; the recurrence is cheap and this keeps the op pure).
AlphaGrads backward_monotonic_alpha(const Vec& p_row,
                                    const AttentionWeights& alpha_prev,
                                    const Vec& upstream_dalpha);

// Reverse-mode derivatives of the scan form. In clamped mode the gradient
// through an active eps-floor is zero (subgradient of max); the cumprod
// backward never divides, so p exactly 0 or 1 is safe.
AlphaGrads backward_monotonic_alpha_scan(const Vec& p_row,
                                         const AttentionWeights& alpha_prev,
                                         const MonotonicConfig& cfg,
                                         const Vec& upstream_dalpha);

struct ContextGrads {
    Vec d_alpha;
    Mat d_memory;
};

ContextGrads backward_context(const AttentionWeights& alpha, const Memory& memory,
                              const Vec& upstream_dcontext);

struct MonotonicEnergyGrads {
    Mat dW, dV;
    Vec db, dv;
    double dg = 0.0, dr = 0.0;
};

struct DotEnergyGrads {
    Mat dW;
    double dg = 0.0, dr = 0.0;
};

struct EnergyRowGradsMod {
    MonotonicEnergyGrads d_params;
    Vec d_s_prev;
    Mat d_memory;
};

struct EnergyRowGradsDot {
    DotEnergyGrads d_params;
    Vec d_s_prev;
    Mat d_memory;
};

// Backward of the whole-row energy. u is the tanh cache from
// energy_row_cached; the weight-normalized v gradient accounts for the
// division by |v|.
EnergyRowGradsMod backward_energy_row(const MonotonicEnergyParams& params,
                                      Eigen::Ref<const Vec> s_prev,
                                      const Memory& memory, const Mat& u,
                                      const Vec& upstream_de);
EnergyRowGradsDot backward_energy_row(const DotEnergyParams& params,
                                      Eigen::Ref<const Vec> s_prev,
                                      const Memory& memory,
                                      const Vec& upstream_de);

// One soft monotonic step with every intermediate needed for the reverse
// pass. Replaying the forward from the record reproduces these values
// bit-exactly; the recorded noise is treated as a constant input.
struct SoftStepTrace {
    Vec noise;    // length T (zeros when trained without noise)
    Vec e;        // noisy energies
    Vec p;        // sigmoid(e)
    Mat u;        // tanh cache (modified energy only; empty for dot)
    AttentionWeights alpha;
    Vec context;
};

SoftStepTrace soft_step_record(const MonotonicEnergyParams& params,
                               Eigen::Ref<const Vec> s_prev, const Memory& memory,
                               const AttentionWeights& alpha_prev,
                               const Vec& noise);
SoftStepTrace soft_step_record(const DotEnergyParams& params,
                               Eigen::Ref<const Vec> s_prev, const Memory& memory,
                               const AttentionWeights& alpha_prev,
                               const Vec& noise);

struct SoftStepGradsMod {
    MonotonicEnergyGrads d_params;
    Vec d_s_prev;
    Mat d_memory;
    Vec d_alpha_prev;
};

struct SoftStepGradsDot {
    DotEnergyGrads d_params;
    Vec d_s_prev;
    Mat d_memory;
    Vec d_alpha_prev;
};

// Full chain: context/alpha sensitivities back to every input of the soft
// step. upstream_dalpha carries the next output step's dependence on this
// step's alpha row (zeros for the last step).
SoftStepGradsMod backward_full_step(const MonotonicEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev,
                                    const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const SoftStepTrace& trace,
                                    const Vec& upstream_dcontext,
                                    const Vec& upstream_dalpha);
SoftStepGradsDot backward_full_step(const DotEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev,
                                    const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const SoftStepTrace& trace,
                                    const Vec& upstream_dcontext,
                                    const Vec& upstream_dalpha);

}  // namespace monattn

#endif  // MONATTN_GRADCHECK_HPP
