#include "monattn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace monattn {

Vec finite_difference(const std::function<double(const Vec&)>& f, const Vec& x,
                      double h) {
    if (!(h > 0.0)) {
        throw std::domain_error("finite_difference: h must be positive");
    }
    Vec grad(x.size());
    Vec probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double hi = f(probe);
        probe[i] = x[i] - h;
        const double lo = f(probe);
        probe[i] = x[i];
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

GradReport check_gradients(const Vec& analytic, const Vec& numeric,
                           double rel_tol, double abs_tol) {
    if (analytic.size() != numeric.size()) {
        throw std::domain_error("check_gradients: length mismatch");
    }
    GradReport report;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double n = numeric[i];
        const double abs_err = std::abs(a - n);
        const double denom = std::max({std::abs(a), std::abs(n), abs_tol});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
    }
    report.pass = report.max_rel_error <= rel_tol;
    return report;
}

AlphaGrads backward_monotonic_alpha(const Vec& p_row,
                                    const AttentionWeights& alpha_prev,
                                    const Vec& upstream_dalpha) {
    const Eigen::Index T = p_row.size();
    if (alpha_prev.alpha.size() != T || upstream_dalpha.size() != T) {
        throw std::domain_error("backward_monotonic_alpha: shape mismatch");
    }
    // recompute the forward q chain
    Vec q(T);
    {
        double acc = 0.0, p_prev = 0.0;
        for (Eigen::Index j = 0; j < T; ++j) {
            acc = (1.0 - p_prev) * acc + alpha_prev.alpha[j];
            q[j] = acc;
            p_prev = p_row[j];
        }
    }
    AlphaGrads g;
    g.d_p_row = Vec::Zero(T);
    g.d_alpha_prev = Vec::Zero(T);
    double dq_next = 0.0;  // sensitivity of q_{j+1}
    for (Eigen::Index j = T - 1; j >= 0; --j) {
        const double dq = upstream_dalpha[j] * p_row[j] + dq_next * (1.0 - p_row[j]);
        g.d_p_row[j] = (upstream_dalpha[j] - dq_next) * q[j];
        g.d_alpha_prev[j] = dq;
        dq_next = dq;
    }
    return g;
}

namespace {

// d(exclusive cumprod) -> d(inputs) without dividing, so exact zeros in om
// are safe: dom_k = sum_{l>k} dC_l * prod_{m<l, m!=k} om_m.
Vec exclusive_cumprod_backward(const Vec& om, const Vec& dC) {
    const Eigen::Index T = om.size();
    const Vec C = exclusive_cumprod(om);
    Vec dom = Vec::Zero(T);
    for (Eigen::Index k = 0; k < T; ++k) {
        double running = C[k];  // prod over m < l excluding k, at l = k+1
        for (Eigen::Index l = k + 1; l < T; ++l) {
            dom[k] += dC[l] * running;
            running *= om[l];
        }
    }
    return dom;
}

}  // namespace

AlphaGrads backward_monotonic_alpha_scan(const Vec& p_row,
                                         const AttentionWeights& alpha_prev,
                                         const MonotonicConfig& cfg,
                                         const Vec& upstream_dalpha) {
    const Eigen::Index T = p_row.size();
    if (alpha_prev.alpha.size() != T || upstream_dalpha.size() != T) {
        throw std::domain_error("backward_monotonic_alpha_scan: shape mismatch");
    }
    // forward intermediates
    const Vec om = Vec::Ones(T) - p_row;
    const Vec C = exclusive_cumprod(om);
    const bool clamped = cfg.denom_mode == DenomMode::kClamped;
    const Vec D = clamped ? exclusive_cumprod_stable(om, cfg.eps) : Vec::Ones(T);
    const Vec scaled = alpha_prev.alpha.array() / D.array();
    const Vec S = cumsum(scaled);
    const Vec q = C.array() * S.array();

    const Vec dq = upstream_dalpha.array() * p_row.array();
    Vec dC = (dq.array() * S.array()).matrix();
    const Vec dS = dq.array() * C.array();
    // cumsum backward: reverse running sum
    Vec dscaled(T);
    double acc = 0.0;
    for (Eigen::Index l = T - 1; l >= 0; --l) {
        acc += dS[l];
        dscaled[l] = acc;
    }
    AlphaGrads g;
    g.d_alpha_prev = dscaled.array() / D.array();
    if (clamped) {
        for (Eigen::Index l = 0; l < T; ++l) {
            // an active floor contributes no gradient (subgradient of max)
            if (D[l] > cfg.eps) {
                dC[l] += -dscaled[l] * alpha_prev.alpha[l] / (D[l] * D[l]);
            }
        }
    }
    // om = 1 - p, so dp picks up the negated cumprod gradient
    g.d_p_row = (upstream_dalpha.array() * q.array()).matrix() -
                exclusive_cumprod_backward(om, dC);
    return g;
}

ContextGrads backward_context(const AttentionWeights& alpha, const Memory& memory,
                              const Vec& upstream_dcontext) {
    if (alpha.alpha.size() != memory.length() ||
        upstream_dcontext.size() != memory.dim()) {
        throw std::domain_error("backward_context: shape mismatch");
    }
    ContextGrads g;
    g.d_alpha = memory.states * upstream_dcontext;
    g.d_memory = alpha.alpha * upstream_dcontext.transpose();
    return g;
}

EnergyRowGradsMod backward_energy_row(const MonotonicEnergyParams& params,
                                      Eigen::Ref<const Vec> s_prev,
                                      const Memory& memory, const Mat& u,
                                      const Vec& upstream_de) {
    const Eigen::Index T = memory.length();
    if (upstream_de.size() != T || u.rows() != T || u.cols() != params.v.size()) {
        throw std::domain_error("backward_energy_row: shape mismatch");
    }
    const double norm = params.v.norm();
    const Vec v_hat = params.v / norm;

    EnergyRowGradsMod g;
    g.d_params.dg = upstream_de.dot(u * v_hat);
    g.d_params.dr = upstream_de.sum();
    // dv through the normalization: J = (I - v_hat v_hat^T) / |v|
    const Vec dv_hat = params.g * (u.transpose() * upstream_de);
    g.d_params.dv = (dv_hat - v_hat * v_hat.dot(dv_hat)) / norm;

    const Mat dU = (params.g / norm) * (upstream_de * params.v.transpose());
    const Mat dPre = dU.array() * (1.0 - u.array().square());
    const Vec dsum = dPre.colwise().sum().transpose();
    g.d_params.db = dsum;
    g.d_params.dW = dsum * s_prev.transpose();
    g.d_params.dV = dPre.transpose() * memory.states;
    g.d_s_prev = params.W.transpose() * dsum;
    g.d_memory = dPre * params.V;
    return g;
}

EnergyRowGradsDot backward_energy_row(const DotEnergyParams& params,
                                      Eigen::Ref<const Vec> s_prev,
                                      const Memory& memory,
                                      const Vec& upstream_de) {
    if (upstream_de.size() != memory.length()) {
        throw std::domain_error("backward_energy_row: shape mismatch");
    }
    const Vec w_s = params.W.transpose() * s_prev;  // d_h
    EnergyRowGradsDot g;
    g.d_params.dg = upstream_de.dot(memory.states * w_s);
    g.d_params.dr = upstream_de.sum();
    g.d_memory = params.g * (upstream_de * w_s.transpose());
    const Vec dw_s = params.g * (memory.states.transpose() * upstream_de);
    g.d_s_prev = params.W * dw_s;
    g.d_params.dW = s_prev * dw_s.transpose();
    return g;
}

namespace {

template <class Params>
SoftStepTrace record_impl(const Params& params, Eigen::Ref<const Vec> s_prev,
                          const Memory& memory, const AttentionWeights& alpha_prev,
                          const Vec& noise) {
    if (noise.size() != memory.length()) {
        throw std::domain_error("soft_step_record: noise length mismatch");
    }
    SoftStepTrace t;
    t.noise = noise;
    if constexpr (std::is_same_v<Params, MonotonicEnergyParams>) {
        t.e = energy_row_cached(params, s_prev, memory, t.u) + noise;
    } else {
        t.e = energy_row(params, s_prev, memory) + noise;
    }
    t.p.resize(t.e.size());
    for (Eigen::Index j = 0; j < t.e.size(); ++j) t.p[j] = sigmoid(t.e[j]);
    t.alpha = monotonic_alpha_recurrence(t.p, alpha_prev);
    t.context = monotonic_context(t.alpha, memory);
    return t;
}

template <class Params, class Grads>
Grads backward_impl(const Params& params, Eigen::Ref<const Vec> s_prev,
                    const Memory& memory, const AttentionWeights& alpha_prev,
                    const SoftStepTrace& trace, const Vec& upstream_dcontext,
                    const Vec& upstream_dalpha) {
    if (upstream_dcontext.size() != memory.dim() ||
        upstream_dalpha.size() != memory.length()) {
        throw std::domain_error("backward_full_step: upstream shape mismatch");
    }
    const ContextGrads ctx = backward_context(trace.alpha, memory,
                                              upstream_dcontext);
    const Vec dalpha = ctx.d_alpha + upstream_dalpha;
    const AlphaGrads rec = backward_monotonic_alpha(trace.p, alpha_prev, dalpha);
    const Vec de =
        rec.d_p_row.array() * trace.p.array() * (1.0 - trace.p.array());

    Grads g;
    if constexpr (std::is_same_v<Params, MonotonicEnergyParams>) {
        EnergyRowGradsMod er = backward_energy_row(params, s_prev, memory,
                                                   trace.u, de);
        g.d_params = std::move(er.d_params);
        g.d_s_prev = std::move(er.d_s_prev);
        g.d_memory = er.d_memory + ctx.d_memory;
    } else {
        EnergyRowGradsDot er = backward_energy_row(params, s_prev, memory, de);
        g.d_params = std::move(er.d_params);
        g.d_s_prev = std::move(er.d_s_prev);
        g.d_memory = er.d_memory + ctx.d_memory;
    }
    g.d_alpha_prev = rec.d_alpha_prev;
    return g;
}

}  // namespace

SoftStepTrace soft_step_record(const MonotonicEnergyParams& params,
                               Eigen::Ref<const Vec> s_prev, const Memory& memory,
                               const AttentionWeights& alpha_prev,
                               const Vec& noise) {
    return record_impl(params, s_prev, memory, alpha_prev, noise);
}

SoftStepTrace soft_step_record(const DotEnergyParams& params,
                               Eigen::Ref<const Vec> s_prev, const Memory& memory,
                               const AttentionWeights& alpha_prev,
                               const Vec& noise) {
    return record_impl(params, s_prev, memory, alpha_prev, noise);
}

SoftStepGradsMod backward_full_step(const MonotonicEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev,
                                    const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const SoftStepTrace& trace,
                                    const Vec& upstream_dcontext,
                                    const Vec& upstream_dalpha) {
    return backward_impl<MonotonicEnergyParams, SoftStepGradsMod>(
        params, s_prev, memory, alpha_prev, trace, upstream_dcontext,
        upstream_dalpha);
}

SoftStepGradsDot backward_full_step(const DotEnergyParams& params,
                                    Eigen::Ref<const Vec> s_prev,
                                    const Memory& memory,
                                    const AttentionWeights& alpha_prev,
                                    const SoftStepTrace& trace,
                                    const Vec& upstream_dcontext,
                                    const Vec& upstream_dalpha) {
    return backward_impl<DotEnergyParams, SoftStepGradsDot>(
        params, s_prev, memory, alpha_prev, trace, upstream_dcontext,
        upstream_dalpha);
}

}  // namespace monattn
