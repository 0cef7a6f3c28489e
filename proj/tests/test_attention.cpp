#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "monattn/attention.hpp"

using namespace monattn;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

// Shared example parameters for the energy kernels (d_a = d_s = d_h = 2).
MonotonicEnergyParams example_energy_params() {
    MonotonicEnergyParams p;
    p.W = Mat(2, 2);
    p.W << 0.1, -0.2, 0.3, 0.4;
    p.V = Mat(2, 2);
    p.V << 0.5, 0.1, -0.3, 0.2;
    p.b = make_vec({0.05, -0.05});
    p.v = make_vec({1.0, 2.0});
    p.g = 0.8;
    p.r = -1.0;
    return p;
}

AttentionWeights weights_of(const Vec& alpha, int row) {
    AttentionWeights w;
    w.alpha = alpha;
    w.row_index = row;
    return w;
}

Vec random_p_row(SeededRng& rng, Eigen::Index T, double lo, double hi) {
    Vec p(T);
    for (Eigen::Index j = 0; j < T; ++j) p[j] = lo + (hi - lo) * rng.next_unit();
    return p;
}

}  // namespace

TEST_CASE("energy kernels match hand-derived values") {
    const auto params = example_energy_params();
    const Vec s = make_vec({0.3, -0.7});
    const Vec h = make_vec({0.2, 0.9});

    CHECK(energy_bahdanau(params.W, params.V, params.b, params.v, s, h) ==
          doctest::Approx(0.14961808314728936).epsilon(1e-13));
    CHECK(energy_modified(params, s, h) ==
          doctest::Approx(-0.9464710072671112).epsilon(1e-13));

    DotEnergyParams dot;
    dot.W = params.W;
    dot.g = 1.5;
    dot.r = 0.25;
    CHECK(energy_dot(dot, s, h) == doctest::Approx(-0.263).epsilon(1e-13));
}

TEST_CASE("modified energy is invariant under positive rescaling of v") {
    auto params = example_energy_params();
    const Vec s = make_vec({0.3, -0.7});
    const Vec h = make_vec({0.2, 0.9});
    const double base = energy_modified(params, s, h);
    for (double c : {1e-6, 0.5, 3.0, 1e6}) {
        auto scaled = params;
        scaled.v = c * params.v;
        CHECK(std::abs(energy_modified(scaled, s, h) - base) < 1e-12);
    }
    auto zero_v = params;
    zero_v.v = Vec::Zero(2);
    CHECK_THROWS_AS(energy_modified(zero_v, s, h), std::domain_error);
}

TEST_CASE("row energies agree with the per-pair kernels") {
    const auto params = example_energy_params();
    Mat h(3, 2);
    h << 0.2, 0.9, -0.4, 0.1, 1.0, -1.0;
    const Memory memory(h);
    const Vec s = make_vec({0.3, -0.7});

    const Vec row = energy_row(params, s, memory);
    for (int j = 0; j < 3; ++j) {
        CHECK(row[j] == doctest::Approx(energy_modified(
                            params, s, h.row(j).transpose())).epsilon(1e-13));
    }

    DotEnergyParams dot;
    dot.W = params.W;
    dot.g = 1.5;
    dot.r = 0.25;
    const Vec drow = energy_row(dot, s, memory);
    for (int j = 0; j < 3; ++j) {
        CHECK(drow[j] == doctest::Approx(energy_dot(
                             dot, s, h.row(j).transpose())).epsilon(1e-13));
    }

    Vec bad_s = make_vec({1.0, 2.0, 3.0});
    CHECK_THROWS_AS(energy_row(params, bad_s, memory), std::domain_error);
}

TEST_CASE("softmax attention matches hand-derived context") {
    Mat h(3, 2);
    h << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
    const Memory memory(h);
    const auto out = softmax_attention(make_vec({1.0, 2.0, 3.0}), memory);
    CHECK(out.weights.alpha.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.context[0] == doctest::Approx(0.7552715289452022).epsilon(1e-13));
    CHECK(out.context[1] == doctest::Approx(0.9099694268296195).epsilon(1e-13));

    CHECK_THROWS_AS(softmax_attention(make_vec({1.0, 2.0}), memory),
                    std::domain_error);
}

TEST_CASE("recurrence reproduces hand-evaluated rows") {
    const auto init2 = AttentionWeights::initial(2);
    CHECK(init2.alpha[0] == 1.0);
    CHECK(init2.alpha[1] == 0.0);
    CHECK(init2.row_index == 0);

    // first row: alpha_1j = p_1j * prod_{k<j} (1 - p_1k)
    const auto a1 = monotonic_alpha_recurrence(make_vec({0.5, 0.5}), init2);
    CHECK(a1.alpha[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a1.alpha[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(a1.row_index == 1);

    // p identically 1 passes alpha_prev straight through
    const auto pass = monotonic_alpha_recurrence(
        make_vec({1.0, 1.0}), weights_of(make_vec({0.5, 0.25}), 1));
    CHECK(pass.alpha[0] == 0.5);
    CHECK(pass.alpha[1] == 0.25);

    // attention pinned at the first entry when p is saturated
    const auto pinned = monotonic_alpha_recurrence(make_vec({1.0, 1.0}), init2);
    CHECK(pinned.alpha[0] == 1.0);
    CHECK(pinned.alpha[1] == 0.0);

    // four-entry frozen case, two chained rows
    const auto r1 = monotonic_alpha_recurrence(make_vec({0.2, 0.7, 0.4, 0.9}),
                                               AttentionWeights::initial(4));
    const Vec want1 = make_vec({0.2, 0.5599999999999999, 0.09600000000000003,
                                0.12960000000000002});
    for (int j = 0; j < 4; ++j)
        CHECK(r1.alpha[j] == doctest::Approx(want1[j]).epsilon(1e-14));
    const auto r2 =
        monotonic_alpha_recurrence(make_vec({0.6, 0.1, 0.8, 0.3}), r1);
    const Vec want2 = make_vec({0.12, 0.06399999999999999, 0.5376, 0.0792});
    for (int j = 0; j < 4; ++j)
        CHECK(r2.alpha[j] == doctest::Approx(want2[j]).epsilon(1e-14));

    const auto zero = monotonic_alpha_recurrence(make_vec({0.0, 0.0}), init2);
    CHECK(zero.alpha.isZero());

    CHECK_THROWS_AS(monotonic_alpha_recurrence(make_vec({0.5}), init2),
                    std::domain_error);
    CHECK_THROWS_AS(monotonic_alpha_recurrence(make_vec({0.5, 1.5}), init2),
                    std::domain_error);
    CHECK_THROWS_AS(monotonic_alpha_recurrence(make_vec({-0.1, 0.5}), init2),
                    std::domain_error);
}

TEST_CASE("scan matches the recurrence on the frozen examples") {
    MonotonicConfig cfg;
    const auto init4 = AttentionWeights::initial(4);
    const Vec p1 = make_vec({0.2, 0.7, 0.4, 0.9});
    const Vec p2 = make_vec({0.6, 0.1, 0.8, 0.3});

    const auto rec1 = monotonic_alpha_recurrence(p1, init4);
    const auto scan1 = monotonic_alpha_scan(p1, init4, cfg);
    const auto rec2 = monotonic_alpha_recurrence(p2, rec1);
    const auto scan2 = monotonic_alpha_scan(p2, rec1, cfg);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(scan1.alpha[j] - rec1.alpha[j]) < 1e-10);
        CHECK(std::abs(scan2.alpha[j] - rec2.alpha[j]) < 1e-10);
    }
    CHECK(scan1.row_index == 1);

    const auto zero = monotonic_alpha_scan(make_vec({0.0, 0.0, 0.0, 0.0}),
                                           init4, cfg);
    CHECK(zero.alpha.isZero());
}

TEST_CASE("scan agrees with recurrence over random chains in clamped mode") {
    // The clamp floor sits below any product reachable with p <= 0.99 and
    // T <= 64 (0.01^63 ~ 1e-126), so this exercises the scan algebra
    // through the clamped code path without the floor rewriting values.
    MonotonicConfig cfg;
    cfg.eps = 1e-130;
    SeededRng rng(17, 0);
    double worst = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.next_u64() % 64);
        const int steps = 1 + static_cast<int>(rng.next_u64() % 4);
        AttentionWeights prev = AttentionWeights::initial(T);
        for (int i = 0; i < steps; ++i) {
            const Vec p = random_p_row(rng, T, 0.01, 0.99);
            const auto rec = monotonic_alpha_recurrence(p, prev);
            const auto scan = monotonic_alpha_scan(p, prev, cfg);
            worst = std::max(worst, (rec.alpha - scan.alpha).cwiseAbs().maxCoeff());
            prev = rec;
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("scan at the default clamp agrees where the floor stays inactive") {
    // With T <= 8 and p <= 0.9 the survival product never drops below
    // 0.1^7 = 1e-7 >> 1e-10, so the default clamp cannot activate.
    MonotonicConfig cfg;  // eps = 1e-10
    SeededRng rng(18, 0);
    double worst = 0.0;
    for (int inst = 0; inst < 500; ++inst) {
        const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.next_u64() % 8);
        AttentionWeights prev = AttentionWeights::initial(T);
        for (int i = 0; i < 4; ++i) {
            const Vec p = random_p_row(rng, T, 0.05, 0.9);
            const auto rec = monotonic_alpha_recurrence(p, prev);
            const auto scan = monotonic_alpha_scan(p, prev, cfg);
            worst = std::max(worst, (rec.alpha - scan.alpha).cwiseAbs().maxCoeff());
            prev = rec;
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("default clamp biases the deep tail conservatively") {
    // When alpha_prev mass sits where the current row's survival product
    // has fallen below eps, the clamped scan under-reports that mass (it
    // divides by eps instead of the true, smaller product). The bias is
    // one-sided and bounded by the mass in the floored region, so rows
    // stay nonnegative and sub-stochastic.
    MonotonicConfig cfg;  // eps = 1e-10
    const Eigen::Index T = 30;
    Vec p = Vec::Constant(T, 0.9);  // survival 0.1^l: below eps from l = 11
    AttentionWeights prev;
    prev.alpha = Vec::Zero(T);
    prev.alpha[1] = 0.5;
    prev.alpha[15] = 0.5;  // deep mass: survival there is 1e-15 < eps
    prev.row_index = 3;

    const auto rec = monotonic_alpha_recurrence(p, prev);
    const auto scan = monotonic_alpha_scan(p, prev, cfg);
    // head mass is reproduced
    CHECK(std::abs(scan.alpha[1] - rec.alpha[1]) < 1e-12);
    // deep mass is under-reported, never inflated
    CHECK(rec.alpha[15] == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(scan.alpha[15] < rec.alpha[15]);
    CHECK(scan.alpha.minCoeff() >= 0.0);
    CHECK(scan.alpha.sum() <= rec.alpha.sum() + 1e-12);
    CHECK(scan.alpha.sum() <= 1.0 + 1e-9);
    // the shortfall is bounded by the floored mass
    CHECK((rec.alpha - scan.alpha).cwiseAbs().maxCoeff() <= 0.5 + 1e-12);
    // a floor below the reachable products restores agreement
    MonotonicConfig deep = cfg;
    deep.eps = 1e-130;
    const auto fixed = monotonic_alpha_scan(p, prev, deep);
    CHECK((rec.alpha - fixed.alpha).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unit-denominator scan is exact on saturated selection patterns") {
    // A saturated row from the hard process is zeros up to the selected
    // entry and one there; chained from the initial row, both scan modes
    // must reproduce the recurrence bit-for-bit.
    MonotonicConfig unit_cfg;
    unit_cfg.denom_mode = DenomMode::kUnit;
    MonotonicConfig clamp_cfg;

    SeededRng rng(99, 0);
    for (int inst = 0; inst < 200; ++inst) {
        const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng.next_u64() % 7);
        const int steps = 1 + static_cast<int>(rng.next_u64() % 4);
        AttentionWeights prev = AttentionWeights::initial(T);
        Eigen::Index pos = 0;
        for (int i = 0; i < steps && pos < T; ++i) {
            pos += static_cast<Eigen::Index>(rng.next_u64() % 3);
            if (pos >= T) break;
            Vec p = Vec::Zero(T);
            p[pos] = 1.0;
            // entries past the selection may be anything in {0,1}
            for (Eigen::Index j = pos + 1; j < T; ++j)
                p[j] = static_cast<double>(rng.next_u64() % 2);
            const auto rec = monotonic_alpha_recurrence(p, prev);
            const auto unit = monotonic_alpha_scan(p, prev, unit_cfg);
            const auto clamp = monotonic_alpha_scan(p, prev, clamp_cfg);
            for (Eigen::Index j = 0; j < T; ++j) {
                CHECK(unit.alpha[j] == rec.alpha[j]);
                CHECK(clamp.alpha[j] == rec.alpha[j]);
            }
            prev = rec;
        }
    }
}

TEST_CASE("monotonic rows are sub-stochastic with monotone support") {
    MonotonicConfig cfg;
    SeededRng rng(4, 2);
    for (int inst = 0; inst < 200; ++inst) {
        const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.next_u64() % 16);
        AttentionWeights prev = AttentionWeights::initial(T);
        for (int i = 0; i < 5; ++i) {
            const Vec p = random_p_row(rng, T, 0.0, 1.0);
            const auto cur = monotonic_alpha_recurrence(p, prev);
            CHECK(cur.alpha.minCoeff() >= 0.0);
            CHECK(cur.alpha.sum() <= 1.0 + 1e-9);
            // support never moves left of alpha_prev's support
            Eigen::Index first_prev = T;
            for (Eigen::Index j = 0; j < T; ++j)
                if (prev.alpha[j] > 0.0) { first_prev = j; break; }
            for (Eigen::Index j = 0; j < first_prev; ++j) {
                CHECK(cur.alpha[j] == 0.0);
            }
            // row sums never grow across steps
            CHECK(cur.alpha.sum() <= prev.alpha.sum() + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("context weights memory rows and handles fall-off") {
    Mat h(2, 2);
    h << 2.0, 0.0, 0.0, 4.0;
    const Memory memory(h);

    const Vec delta2 = monotonic_context(weights_of(make_vec({0.0, 1.0}), 1),
                                         memory);
    CHECK(delta2[0] == 0.0);
    CHECK(delta2[1] == 4.0);

    const Vec zero = monotonic_context(weights_of(make_vec({0.0, 0.0}), 1),
                                       memory);
    CHECK(zero.isZero());

    const Vec mixed = monotonic_context(weights_of(make_vec({0.5, 0.25}), 1),
                                        memory);
    CHECK(mixed[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mixed[1] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(monotonic_context(weights_of(make_vec({1.0}), 0), memory),
                    std::domain_error);
}

TEST_CASE("memory validates its entries") {
    CHECK_THROWS_AS(Memory{Mat(0, 3)}, std::domain_error);
    Mat bad(1, 2);
    bad << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Memory{bad}, std::domain_error);
}

namespace {
// Params that pin every energy to a single constant via the bias.
MonotonicEnergyParams constant_energy_params(double energy) {
    MonotonicEnergyParams p;
    p.W = Mat::Zero(1, 2);
    p.V = Mat::Zero(1, 2);
    p.b = make_vec({40.0});  // tanh saturates to 1
    p.v = make_vec({1.0});
    p.g = energy;
    p.r = 0.0;
    return p;
}
}  // namespace

TEST_CASE("soft step saturates to the expected limits") {
    Mat h(3, 2);
    h << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    const Memory memory(h);
    const Vec s = make_vec({0.1, 0.2});
    MonotonicConfig cfg;
    cfg.noise_std = 0.0;
    const auto init = AttentionWeights::initial(3);

    // energies +40 everywhere: first row concentrates on entry 1
    const auto high = soft_monotonic_step(constant_energy_params(40.0), s,
                                          memory, init, cfg, nullptr);
    CHECK(high.weights.alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(high.weights.alpha[1]) < 1e-12);
    CHECK(high.context[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(high.context[1] == doctest::Approx(2.0).epsilon(1e-12));

    // energies -40 everywhere: nothing selected, zero context
    const auto low = soft_monotonic_step(constant_energy_params(-40.0), s,
                                         memory, init, cfg, nullptr);
    CHECK(low.context.norm() < 1e-12);
    CHECK(low.weights.alpha.sum() < 1e-12);
}

TEST_CASE("soft step composes the documented pipeline and replays noise") {
    const auto params = example_energy_params();
    Mat h(4, 2);
    h << 0.2, 0.9, -0.4, 0.1, 1.0, -1.0, 0.3, 0.3;
    const Memory memory(h);
    const Vec s = make_vec({0.3, -0.7});
    const auto init = AttentionWeights::initial(4);
    MonotonicConfig cfg;  // noise_std = 1

    // deterministic path equals the hand-built composition
    const auto det = soft_monotonic_step(params, s, memory, init, cfg, nullptr);
    Vec e = energy_row(params, s, memory);
    Vec p(4);
    for (int j = 0; j < 4; ++j) p[j] = sigmoid(e[j]);
    const auto alpha = monotonic_alpha_recurrence(p, init);
    for (int j = 0; j < 4; ++j) CHECK(det.weights.alpha[j] == alpha.alpha[j]);
    CHECK((det.context - monotonic_context(alpha, memory)).norm() == 0.0);

    // same seed -> identical noisy output; noise changes the result
    SeededRng r1(5, 1), r2(5, 1);
    const auto n1 = soft_monotonic_step(params, s, memory, init, cfg, &r1);
    const auto n2 = soft_monotonic_step(params, s, memory, init, cfg, &r2);
    CHECK((n1.weights.alpha - n2.weights.alpha).norm() == 0.0);
    CHECK((n1.context - n2.context).norm() == 0.0);
    CHECK((n1.weights.alpha - det.weights.alpha).norm() > 0.0);

    // noise_std = 0 ignores the rng entirely
    MonotonicConfig quiet = cfg;
    quiet.noise_std = 0.0;
    SeededRng r3(5, 1);
    const auto q = soft_monotonic_step(params, s, memory, init, quiet, &r3);
    CHECK((q.weights.alpha - det.weights.alpha).norm() == 0.0);
    CHECK(r3.counter() == 0);
}

TEST_CASE("hard step selects the first above-threshold entry lazily") {
    // dot energy with 1-d state picks p = sigmoid(h) directly
    DotEnergyParams dot;
    dot.W = Mat::Identity(1, 1);
    const Vec s = make_vec({1.0});
    MonotonicConfig cfg;

    Mat h1(2, 1);
    h1 << -3.0, 2.0;  // p = [0.047, 0.881]
    const auto sel = hard_monotonic_step(dot, s, Memory(h1), MonotonicState{1}, cfg);
    REQUIRE(sel.selected.has_value());
    CHECK(*sel.selected == 2);
    CHECK(sel.state.t_prev == 2);
    CHECK(sel.energy_evals == 2);
    CHECK(sel.context[0] == 2.0);

    // immediate selection costs exactly one energy evaluation
    Mat h2(3, 1);
    h2 << 2.0, -3.0, -3.0;
    const auto first = hard_monotonic_step(dot, s, Memory(h2), MonotonicState{1}, cfg);
    CHECK(*first.selected == 1);
    CHECK(first.energy_evals == 1);

    // scanning starts at t_prev: earlier above-threshold entries are dead
    Mat h3(4, 1);
    h3 << 2.0, 2.0, -3.0, 2.0;
    const auto lazy = hard_monotonic_step(dot, s, Memory(h3), MonotonicState{3}, cfg);
    CHECK(*lazy.selected == 4);
    CHECK(lazy.energy_evals == 2);

    // fall-off: zero context, t_prev carried, full remaining scan counted
    Mat h4(3, 1);
    h4 << -3.0, -3.0, -3.0;
    const auto off = hard_monotonic_step(dot, s, Memory(h4), MonotonicState{2}, cfg);
    CHECK_FALSE(off.selected.has_value());
    CHECK(off.state.t_prev == 2);
    CHECK(off.energy_evals == 2);
    CHECK(off.context.isZero());

    // tie p == tau does not select (strict inequality)
    Mat h5(2, 1);
    h5 << 0.0, 2.0;  // p = [0.5, 0.881], tau = 0.5
    const auto tie = hard_monotonic_step(dot, s, Memory(h5), MonotonicState{1}, cfg);
    CHECK(*tie.selected == 2);
    CHECK(tie.energy_evals == 2);

    CHECK_THROWS_AS(hard_monotonic_step(dot, s, Memory(h5), MonotonicState{0}, cfg),
                    std::domain_error);
    CHECK_THROWS_AS(hard_monotonic_step(dot, s, Memory(h5), MonotonicState{3}, cfg),
                    std::domain_error);
}

TEST_CASE("hard step works with the modified energy and sampling mode") {
    const auto params = constant_energy_params(40.0);
    Mat h(3, 2);
    h << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    const Memory memory(h);
    const Vec s = make_vec({0.0, 0.0});
    MonotonicConfig cfg;

    const auto sel = hard_monotonic_step(params, s, memory, MonotonicState{1}, cfg);
    CHECK(*sel.selected == 1);
    CHECK(sel.energy_evals == 1);

    // sampling mode is reproducible for a fixed stream
    SeededRng ra(11, 0), rb(11, 0);
    const auto sa = hard_monotonic_step_sampled(params, s, memory,
                                                MonotonicState{1}, ra);
    const auto sb = hard_monotonic_step_sampled(params, s, memory,
                                                MonotonicState{1}, rb);
    CHECK(sa.selected == sb.selected);
    CHECK(*sa.selected == 1);  // p is 1 within double precision here
}

TEST_CASE("hard scan over explicit probabilities honors the threshold") {
    const Vec p = make_vec({0.1, 0.5, 0.6, 0.2});
    auto p_at = [&](int j) { return p[j - 1]; };
    const auto out = hard_scan(p_at, 1, 4, 0.5, SelectionMode::kThreshold, nullptr);
    REQUIRE(out.selected.has_value());
    CHECK(*out.selected == 3);  // 0.5 is not > 0.5
    CHECK(out.inspected == 3);

    const auto off = hard_scan(p_at, 4, 4, 0.5, SelectionMode::kThreshold, nullptr);
    CHECK_FALSE(off.selected.has_value());
    CHECK(off.inspected == 1);
}

TEST_CASE("hard and soft paths coincide exactly for binary p") {
    // Random {0,1} selection matrices: the expected (soft) context sequence
    // must equal the hard process context sequence bit-for-bit, with
    // absorbing fall-off on both sides.
    SeededRng rng(2718, 0);
    for (int inst = 0; inst < 50; ++inst) {
        const int T = 2 + static_cast<int>(rng.next_u64() % 5);
        const int U = 1 + static_cast<int>(rng.next_u64() % 4);
        Mat h(T, 3);
        for (int j = 0; j < T; ++j)
            for (int k = 0; k < 3; ++k)
                h(j, k) = 2.0 * rng.next_unit() - 1.0;
        const Memory memory(h);
        Mat p(U, T);
        for (int i = 0; i < U; ++i)
            for (int j = 0; j < T; ++j)
                p(i, j) = static_cast<double>(rng.next_u64() % 2);

        AttentionWeights soft_prev = AttentionWeights::initial(T);
        int t_prev = 1;
        bool fallen = false;
        for (int i = 0; i < U; ++i) {
            const auto soft = monotonic_alpha_recurrence(p.row(i).transpose(),
                                                         soft_prev);
            const Vec soft_ctx = monotonic_context(soft, memory);

            Vec hard_ctx = Vec::Zero(3);
            if (!fallen) {
                auto p_at = [&](int j) { return p(i, j - 1); };
                const auto out = hard_scan(p_at, t_prev, T, 0.5,
                                           SelectionMode::kThreshold, nullptr);
                if (out.selected) {
                    hard_ctx = memory.states.row(*out.selected - 1).transpose();
                    t_prev = *out.selected;
                } else {
                    fallen = true;
                }
            }
            for (int k = 0; k < 3; ++k) CHECK(soft_ctx[k] == hard_ctx[k]);
            soft_prev = soft;
        }
    }
}
