#include "monattn/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "monattn/gradcheck.hpp"
#include "monattn/seq2seq.hpp"

namespace monattn {

namespace {

constexpr double kAbsFloor = 1e-4;  // below this, FD noise dominates
constexpr double kAbsBound = 1e-8;  // strict cap on absolute disagreement

Vec uniform_vec(SeededRng& rng, Eigen::Index n, double lo, double hi) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.next_unit();
    return v;
}

Mat uniform_mat(SeededRng& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                double hi) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = lo + (hi - lo) * rng.next_unit();
    return m;
}

Vec random_alpha_row(SeededRng& rng, Eigen::Index n) {
    Vec v = uniform_vec(rng, n, 0.05, 1.0);
    v *= 0.95 / v.sum();
    return v;
}

Vec flatten(const Mat& m) {
    Vec v(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v[k++] = m(i, j);
    return v;
}

Mat unflatten(const Vec& x, Eigen::Index at, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    Eigen::Index k = at;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = x[k++];
    return m;
}

// One FD-vs-analytic comparison. Both vectors must be fully populated.
GradReport compare(const std::function<double(const Vec&)>& f, const Vec& x0,
                   const Vec& analytic, double h, double rel_tol) {
    const Vec numeric = finite_difference(f, x0, h);
    GradReport r = check_gradients(analytic, numeric, rel_tol, kAbsFloor);
    r.pass = r.pass && r.max_abs_error < kAbsBound;
    return r;
}

GradReport check_alpha_pair(bool scan, DenomMode mode, SeededRng& rng, double h,
                            double rel_tol) {
    const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng.next_u64() % 7);
    const Vec p = uniform_vec(rng, T, 0.05, 0.9);
    AttentionWeights prev;
    prev.alpha = random_alpha_row(rng, T);
    const Vec w = uniform_vec(rng, T, -1.0, 1.0);
    MonotonicConfig cfg;
    cfg.denom_mode = mode;

    Vec x0(2 * T);
    x0 << p, prev.alpha;
    auto f = [&](const Vec& x) {
        AttentionWeights ap;
        ap.alpha = x.segment(T, T);
        const Vec pr = x.segment(0, T);
        const AttentionWeights out = scan ? monotonic_alpha_scan(pr, ap, cfg)
                                          : monotonic_alpha_recurrence(pr, ap);
        return w.dot(out.alpha);
    };
    const AlphaGrads g = scan ? backward_monotonic_alpha_scan(p, prev, cfg, w)
                              : backward_monotonic_alpha(p, prev, w);
    Vec analytic(2 * T);
    analytic << g.d_p_row, g.d_alpha_prev;
    return compare(f, x0, analytic, h, rel_tol);
}

GradReport check_context(SeededRng& rng, double h, double rel_tol) {
    const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.next_u64() % 3);
    AttentionWeights alpha;
    alpha.alpha = random_alpha_row(rng, T);
    const Mat H = uniform_mat(rng, T, d, -1.0, 1.0);
    const Vec w = uniform_vec(rng, d, -1.0, 1.0);

    Vec x0(T + T * d);
    x0 << alpha.alpha, flatten(H);
    auto f = [&](const Vec& x) {
        AttentionWeights a;
        a.alpha = x.segment(0, T);
        return w.dot(monotonic_context(a, Memory(unflatten(x, T, T, d))));
    };
    const ContextGrads g = backward_context(alpha, Memory(H), w);
    Vec analytic(T + T * d);
    analytic << g.d_alpha, flatten(g.d_memory);
    return compare(f, x0, analytic, h, rel_tol);
}

MonotonicEnergyParams random_mod_params(SeededRng& rng, Eigen::Index d_a,
                                        Eigen::Index d_s, Eigen::Index d_h) {
    MonotonicEnergyParams p;
    p.W = uniform_mat(rng, d_a, d_s, -0.6, 0.6);
    p.V = uniform_mat(rng, d_a, d_h, -0.6, 0.6);
    p.b = uniform_vec(rng, d_a, -0.3, 0.3);
    p.v = uniform_vec(rng, d_a, 0.4, 1.2);
    p.g = 0.5 + rng.next_unit();
    p.r = -1.0 + 2.0 * rng.next_unit();
    return p;
}

DotEnergyParams random_dot_params(SeededRng& rng, Eigen::Index d_s,
                                  Eigen::Index d_h) {
    DotEnergyParams p;
    p.W = uniform_mat(rng, d_s, d_h, -0.8, 0.8);
    p.g = 0.5 + rng.next_unit();
    p.r = -1.0 + 2.0 * rng.next_unit();
    return p;
}

GradReport check_energy_modified(SeededRng& rng, double h, double rel_tol) {
    const Eigen::Index d_a = 3, d_s = 2, d_h = 2, T = 4;
    const MonotonicEnergyParams params = random_mod_params(rng, d_a, d_s, d_h);
    const Vec s = uniform_vec(rng, d_s, -1.0, 1.0);
    const Mat H = uniform_mat(rng, T, d_h, -1.0, 1.0);
    const Vec w = uniform_vec(rng, T, -1.0, 1.0);

    const Eigen::Index n = d_a * d_s + d_a * d_h + d_a + d_a + 2 + d_s + T * d_h;
    Vec x0(n);
    x0 << flatten(params.W), flatten(params.V), params.b, params.v, params.g,
        params.r, s, flatten(H);
    auto f = [&](const Vec& x) {
        MonotonicEnergyParams q;
        Eigen::Index off = 0;
        q.W = unflatten(x, off, d_a, d_s);
        off += d_a * d_s;
        q.V = unflatten(x, off, d_a, d_h);
        off += d_a * d_h;
        q.b = x.segment(off, d_a);
        off += d_a;
        q.v = x.segment(off, d_a);
        off += d_a;
        q.g = x[off++];
        q.r = x[off++];
        const Vec si = x.segment(off, d_s);
        off += d_s;
        return w.dot(energy_row(q, si, Memory(unflatten(x, off, T, d_h))));
    };
    const Memory mem(H);
    Mat u;
    energy_row_cached(params, s, mem, u);
    const EnergyRowGradsMod g = backward_energy_row(params, s, mem, u, w);
    Vec analytic(n);
    analytic << flatten(g.d_params.dW), flatten(g.d_params.dV), g.d_params.db,
        g.d_params.dv, g.d_params.dg, g.d_params.dr, g.d_s_prev,
        flatten(g.d_memory);
    return compare(f, x0, analytic, h, rel_tol);
}

GradReport check_energy_dot(SeededRng& rng, double h, double rel_tol) {
    const Eigen::Index d_s = 3, d_h = 2, T = 4;
    const DotEnergyParams params = random_dot_params(rng, d_s, d_h);
    const Vec s = uniform_vec(rng, d_s, -1.0, 1.0);
    const Mat H = uniform_mat(rng, T, d_h, -1.0, 1.0);
    const Vec w = uniform_vec(rng, T, -1.0, 1.0);

    const Eigen::Index n = d_s * d_h + 2 + d_s + T * d_h;
    Vec x0(n);
    x0 << flatten(params.W), params.g, params.r, s, flatten(H);
    auto f = [&](const Vec& x) {
        DotEnergyParams q;
        Eigen::Index off = 0;
        q.W = unflatten(x, off, d_s, d_h);
        off += d_s * d_h;
        q.g = x[off++];
        q.r = x[off++];
        const Vec si = x.segment(off, d_s);
        off += d_s;
        return w.dot(energy_row(q, si, Memory(unflatten(x, off, T, d_h))));
    };
    const EnergyRowGradsDot g = backward_energy_row(params, s, Memory(H), w);
    Vec analytic(n);
    analytic << flatten(g.d_params.dW), g.d_params.dg, g.d_params.dr, g.d_s_prev,
        flatten(g.d_memory);
    return compare(f, x0, analytic, h, rel_tol);
}

template <bool kModified>
GradReport check_soft_step(SeededRng& rng, double h, double rel_tol) {
    const Eigen::Index d_a = 3, d_s = 2, d_h = 2, T = 4;
    const Vec s = uniform_vec(rng, d_s, -1.0, 1.0);
    const Mat H = uniform_mat(rng, T, d_h, -1.0, 1.0);
    AttentionWeights prev;
    prev.alpha = random_alpha_row(rng, T);
    const Vec noise = uniform_vec(rng, T, -0.5, 0.5);
    const Vec wc = uniform_vec(rng, d_h, -1.0, 1.0);
    const Vec wa = uniform_vec(rng, T, -1.0, 1.0);

    if constexpr (kModified) {
        const MonotonicEnergyParams params = random_mod_params(rng, d_a, d_s, d_h);
        const Eigen::Index n =
            d_a * d_s + d_a * d_h + d_a + d_a + 2 + d_s + T * d_h + T;
        Vec x0(n);
        x0 << flatten(params.W), flatten(params.V), params.b, params.v, params.g,
            params.r, s, flatten(H), prev.alpha;
        auto f = [&](const Vec& x) {
            MonotonicEnergyParams q;
            Eigen::Index off = 0;
            q.W = unflatten(x, off, d_a, d_s);
            off += d_a * d_s;
            q.V = unflatten(x, off, d_a, d_h);
            off += d_a * d_h;
            q.b = x.segment(off, d_a);
            off += d_a;
            q.v = x.segment(off, d_a);
            off += d_a;
            q.g = x[off++];
            q.r = x[off++];
            const Vec si = x.segment(off, d_s);
            off += d_s;
            const Memory mem(unflatten(x, off, T, d_h));
            off += T * d_h;
            AttentionWeights ap;
            ap.alpha = x.segment(off, T);
            const SoftStepTrace t = soft_step_record(q, si, mem, ap, noise);
            return wc.dot(t.context) + wa.dot(t.alpha.alpha);
        };
        const Memory mem(H);
        const SoftStepTrace trace = soft_step_record(params, s, mem, prev, noise);
        const SoftStepGradsMod g =
            backward_full_step(params, s, mem, prev, trace, wc, wa);
        Vec analytic(n);
        analytic << flatten(g.d_params.dW), flatten(g.d_params.dV), g.d_params.db,
            g.d_params.dv, g.d_params.dg, g.d_params.dr, g.d_s_prev,
            flatten(g.d_memory), g.d_alpha_prev;
        return compare(f, x0, analytic, h, rel_tol);
    } else {
        const DotEnergyParams params = random_dot_params(rng, d_s, d_h);
        const Eigen::Index n = d_s * d_h + 2 + d_s + T * d_h + T;
        Vec x0(n);
        x0 << flatten(params.W), params.g, params.r, s, flatten(H), prev.alpha;
        auto f = [&](const Vec& x) {
            DotEnergyParams q;
            Eigen::Index off = 0;
            q.W = unflatten(x, off, d_s, d_h);
            off += d_s * d_h;
            q.g = x[off++];
            q.r = x[off++];
            const Vec si = x.segment(off, d_s);
            off += d_s;
            const Memory mem(unflatten(x, off, T, d_h));
            off += T * d_h;
            AttentionWeights ap;
            ap.alpha = x.segment(off, T);
            const SoftStepTrace t = soft_step_record(q, si, mem, ap, noise);
            return wc.dot(t.context) + wa.dot(t.alpha.alpha);
        };
        const Memory mem(H);
        const SoftStepTrace trace = soft_step_record(params, s, mem, prev, noise);
        const SoftStepGradsDot g =
            backward_full_step(params, s, mem, prev, trace, wc, wa);
        Vec analytic(n);
        analytic << flatten(g.d_params.dW), g.d_params.dg, g.d_params.dr,
            g.d_s_prev, flatten(g.d_memory), g.d_alpha_prev;
        return compare(f, x0, analytic, h, rel_tol);
    }
}

GradReport check_gru(SeededRng& rng, double h, double rel_tol) {
    const Eigen::Index d_in = 3, d_h = 2;
    GruParams g;
    g.Wz = uniform_mat(rng, d_h, d_in, -1.0, 1.0);
    g.Uz = uniform_mat(rng, d_h, d_h, -1.0, 1.0);
    g.bz = uniform_vec(rng, d_h, -0.5, 0.5);
    g.Wr = uniform_mat(rng, d_h, d_in, -1.0, 1.0);
    g.Ur = uniform_mat(rng, d_h, d_h, -1.0, 1.0);
    g.br = uniform_vec(rng, d_h, -0.5, 0.5);
    g.Wn = uniform_mat(rng, d_h, d_in, -1.0, 1.0);
    g.Un = uniform_mat(rng, d_h, d_h, -1.0, 1.0);
    g.bn = uniform_vec(rng, d_h, -0.5, 0.5);
    const Vec x = uniform_vec(rng, d_in, -1.0, 1.0);
    const Vec hp = uniform_vec(rng, d_h, -1.0, 1.0);
    const Vec w = uniform_vec(rng, d_h, -1.0, 1.0);

    const Eigen::Index n = 3 * (d_h * d_in + d_h * d_h + d_h) + d_in + d_h;
    Vec x0(n);
    x0 << flatten(g.Wz), flatten(g.Uz), g.bz, flatten(g.Wr), flatten(g.Ur), g.br,
        flatten(g.Wn), flatten(g.Un), g.bn, x, hp;
    auto f = [&](const Vec& xx) {
        GruParams q;
        Eigen::Index off = 0;
        q.Wz = unflatten(xx, off, d_h, d_in);
        off += d_h * d_in;
        q.Uz = unflatten(xx, off, d_h, d_h);
        off += d_h * d_h;
        q.bz = xx.segment(off, d_h);
        off += d_h;
        q.Wr = unflatten(xx, off, d_h, d_in);
        off += d_h * d_in;
        q.Ur = unflatten(xx, off, d_h, d_h);
        off += d_h * d_h;
        q.br = xx.segment(off, d_h);
        off += d_h;
        q.Wn = unflatten(xx, off, d_h, d_in);
        off += d_h * d_in;
        q.Un = unflatten(xx, off, d_h, d_h);
        off += d_h * d_h;
        q.bn = xx.segment(off, d_h);
        off += d_h;
        const Vec xi = xx.segment(off, d_in);
        off += d_in;
        const Vec hi = xx.segment(off, d_h);
        return w.dot(gru_forward(q, xi, hi));
    };
    GruParams grads;
    grads.Wz = Mat::Zero(d_h, d_in);
    grads.Uz = Mat::Zero(d_h, d_h);
    grads.bz = Vec::Zero(d_h);
    grads.Wr = grads.Wz;
    grads.Ur = grads.Uz;
    grads.br = grads.bz;
    grads.Wn = grads.Wz;
    grads.Un = grads.Uz;
    grads.bn = grads.bz;
    Vec d_x, d_h_prev;
    gru_backward(g, gru_forward_cached(g, x, hp), w, grads, d_x, d_h_prev);
    Vec analytic(n);
    analytic << flatten(grads.Wz), flatten(grads.Uz), grads.bz, flatten(grads.Wr),
        flatten(grads.Ur), grads.br, flatten(grads.Wn), flatten(grads.Un),
        grads.bn, d_x, d_h_prev;
    return compare(f, x0, analytic, h, rel_tol);
}

GradReport check_full_model(SeededRng& rng, double h, double rel_tol,
                            EnergyKind kind) {
    ModelDims dims;
    dims.vocab = 5;
    dims.d_emb = 3;
    dims.d_h = 3;
    dims.d_s = 3;
    dims.d_a = 3;
    dims.energy = kind;
    const TaskSpec task = generate_task(rng.next_u64(), dims.vocab);
    SeededRng init(rng.next_u64(), 0);
    ModelParams params = init_model(dims, 0.1, -1.0, init);
    SeededRng sampler(rng.next_u64(), 0);
    const TokenPair pair = sample_pair(task, sampler, 2, 4);
    MonotonicConfig cfg;
    cfg.noise_std = 0.0;

    const Eigen::Index n = param_count(params);
    Vec x0(n);
    {
        Eigen::Index off = 0;
        for (const auto& t : named_tensors(params))
            for (Eigen::Index i = 0; i < t.size; ++i) x0[off++] = t.data[i];
    }
    ModelParams probe = zeros_like(params);
    auto f = [&](const Vec& x) {
        Eigen::Index off = 0;
        for (const auto& t : named_tensors(probe))
            for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] = x[off++];
        const Memory memory = encode(probe, pair.input);
        return decode_train(probe, memory, pair.target, cfg, nullptr).loss;
    };
    ModelParams grads = zeros_like(params);
    example_gradient(params, pair.input, pair.target, cfg, nullptr, grads);
    Vec analytic(n);
    {
        Eigen::Index off = 0;
        for (const auto& t : named_tensors(grads))
            for (Eigen::Index i = 0; i < t.size; ++i) analytic[off++] = t.data[i];
    }
    return compare(f, x0, analytic, h, rel_tol);
}

using OpFn = GradReport (*)(SeededRng&, double, double);

GradReport dispatch(const std::string& op, SeededRng& rng, double h,
                    double rel_tol) {
    if (op == "alpha_recurrence")
        return check_alpha_pair(false, DenomMode::kClamped, rng, h, rel_tol);
    if (op == "alpha_scan_clamped")
        return check_alpha_pair(true, DenomMode::kClamped, rng, h, rel_tol);
    if (op == "alpha_scan_unit")
        return check_alpha_pair(true, DenomMode::kUnit, rng, h, rel_tol);
    if (op == "context") return check_context(rng, h, rel_tol);
    if (op == "energy_modified") return check_energy_modified(rng, h, rel_tol);
    if (op == "energy_dot") return check_energy_dot(rng, h, rel_tol);
    if (op == "soft_step_modified") return check_soft_step<true>(rng, h, rel_tol);
    if (op == "soft_step_dot") return check_soft_step<false>(rng, h, rel_tol);
    if (op == "gru_cell") return check_gru(rng, h, rel_tol);
    if (op == "full_model")
        return check_full_model(rng, h, rel_tol, EnergyKind::kModified);
    if (op == "full_model_dot")
        return check_full_model(rng, h, rel_tol, EnergyKind::kDot);
    throw std::domain_error("unknown gradcheck op '" + op + "'");
}

}  // namespace

std::vector<std::string> gradcheck_op_names() {
    return {"alpha_recurrence", "alpha_scan_clamped", "alpha_scan_unit",
            "context",          "energy_modified",    "energy_dot",
            "soft_step_modified", "soft_step_dot",    "gru_cell",
            "full_model",         "full_model_dot"};
}

OpCheckResult run_gradcheck_op(const std::string& op, int n_instances, double h,
                               double rel_tol, uint64_t seed) {
    if (n_instances < 1) {
        throw std::domain_error("run_gradcheck_op: need at least one instance");
    }
    OpCheckResult out;
    out.op = op;
    out.instances = n_instances;
    out.pass = true;
    for (int k = 0; k < n_instances; ++k) {
        SeededRng rng(seed, static_cast<uint64_t>(k) + 1);
        const GradReport r = dispatch(op, rng, h, rel_tol);
        out.max_rel_error = std::max(out.max_rel_error, r.max_rel_error);
        out.max_abs_error = std::max(out.max_abs_error, r.max_abs_error);
        out.pass = out.pass && r.pass;
    }
    return out;
}

std::vector<OpCheckResult> run_gradcheck_all(int n_instances, double h,
                                             double rel_tol, uint64_t seed) {
    std::vector<OpCheckResult> out;
    for (const auto& op : gradcheck_op_names()) {
        out.push_back(run_gradcheck_op(op, n_instances, h, rel_tol, seed));
    }
    return out;
}

}  // namespace monattn
