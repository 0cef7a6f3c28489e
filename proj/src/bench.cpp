#include "monattn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "monattn/attention.hpp"

namespace monattn {

namespace {

// Pre-sigmoid offset used to saturate the hard path's selections; |energy|
// is bounded near 1 with the [-1, 1] inputs below, so +/-30 pins p to
// effectively 0 or 1 without touching the cost of the energy evaluation.
constexpr double kSaturationOffset = 30.0;

volatile double g_sink = 0.0;  // defeats dead-code elimination of the timed work

void validate(int T, int U, const BenchConfig& cfg) {
    if (T < 1 || U < 1) throw std::domain_error("bench: T and U must be >= 1");
    if (cfg.trials < 10) throw std::domain_error("bench: trials must be >= 10");
    if (cfg.warmup < 0) throw std::domain_error("bench: warmup must be >= 0");
    if (cfg.d_h < 1 || cfg.d_s < 1 || cfg.d_a < 1) {
        throw std::domain_error("bench: all dims must be >= 1");
    }
}

Mat uniform_mat(SeededRng& rng, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = 2.0 * rng.next_unit() - 1.0;
    return m;
}

Vec uniform_vec(SeededRng& rng, Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 2.0 * rng.next_unit() - 1.0;
    return v;
}

// The one energy implementation both paths time: the weight-normalized
// tanh energy with the per-sequence memory projection (V h_j) cached
// outside the timed section, exactly as an encoder would precompute it.
struct SharedEnergy {
    Mat W;    // d_a x d_s, applied to the decoder state once per output step
    Mat V;    // d_a x d_h, applied to the memory once per sequence
    Vec b;    // d_a
    Mat VH;   // d_a x T, cached memory projection (setup)
    Vec gvn;  // g * v / |v|

    void bind_memory(const Mat& H) { VH = V * H.transpose(); }

    Vec state_proj(const Vec& s) const { return W * s + b; }

    // Whole row at once (softmax path).
    Vec row(const Vec& ws) const {
        return (VH.colwise() + ws).array().tanh().matrix().transpose() * gvn;
    }

    // One entry (hard path's lazy scan), 0-based j.
    double at(const Vec& ws, Eigen::Index j) const {
        return gvn.dot((ws + VH.col(j)).array().tanh().matrix());
    }
};

struct TrialInputs {
    Mat H;  // T x d_h memory
    Mat S;  // U x d_s decoder states
};

// Both bench_* functions must consume the RNG in exactly this order so
// that two copies of one seeded stream produce identical inputs for the
// two paths.
SharedEnergy make_energy(SeededRng& rng, const BenchConfig& cfg) {
    SharedEnergy e;
    e.W = uniform_mat(rng, cfg.d_a, cfg.d_s);
    e.V = uniform_mat(rng, cfg.d_a, cfg.d_h);
    e.b = uniform_vec(rng, cfg.d_a);
    Vec v = uniform_vec(rng, cfg.d_a);
    if (v.norm() == 0.0) v[0] = 1.0;
    e.gvn = (1.0 / std::sqrt(static_cast<double>(cfg.d_a))) * v / v.norm();
    return e;
}

TrialInputs make_inputs(SeededRng& rng, int T, int U, const BenchConfig& cfg) {
    return {uniform_mat(rng, T, cfg.d_h), uniform_mat(rng, U, cfg.d_s)};
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Planned selection for uniform coverage: nondecreasing targets ending at
// T, advancing ~T/U per step; the scan inspects every entry between
// consecutive targets, totalling exactly T + U - 1 evaluations.
int planned_target(int i, int T, int U) {
    const int t = static_cast<int>(std::ceil(
        static_cast<double>(i + 1) * static_cast<double>(T) /
        static_cast<double>(U)));
    return std::max(1, std::min(T, t));
}

}  // namespace

double bench_softmax(int T, int U, const BenchConfig& cfg, SeededRng& rng,
                     std::vector<double>* samples_out) {
    validate(T, U, cfg);
    SharedEnergy kern = make_energy(rng, cfg);

    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(cfg.trials));
    for (int trial = 0; trial < cfg.warmup + cfg.trials; ++trial) {
        const TrialInputs in = make_inputs(rng, T, U, cfg);
        const Memory memory(in.H);
        kern.bind_memory(in.H);  // per-sequence projection: setup

        double sink = 0.0;
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < U; ++i) {
            const Vec ws = kern.state_proj(in.S.row(i).transpose());
            const Vec e = kern.row(ws);
            const AttentionResult res = softmax_attention(e, memory);
            sink += res.context[0];
        }
        const auto t1 = std::chrono::steady_clock::now();
        g_sink = g_sink + sink;
        if (trial >= cfg.warmup) {
            samples.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    if (samples_out != nullptr) *samples_out = samples;
    double sum = 0.0;
    for (double s : samples) sum += s;
    return sum / static_cast<double>(samples.size());
}

HardBenchResult bench_hard(int T, int U, const BenchConfig& cfg, SeededRng& rng,
                           std::vector<double>* samples_out) {
    validate(T, U, cfg);
    SharedEnergy kern = make_energy(rng, cfg);

    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(cfg.trials));
    long long evals_first = -1;
    for (int trial = 0; trial < cfg.warmup + cfg.trials; ++trial) {
        const TrialInputs in = make_inputs(rng, T, U, cfg);
        kern.bind_memory(in.H);  // same per-sequence setup as softmax

        double sink = 0.0;
        long long evals = 0;
        const auto t0 = std::chrono::steady_clock::now();
        int t_prev = 1;
        for (int i = 0; i < U; ++i) {
            const Vec ws = kern.state_proj(in.S.row(i).transpose());
            const int target = cfg.saturation == HardSaturation::kImmediate
                                   ? t_prev
                                   : std::max(t_prev, planned_target(i, T, U));
            const auto p_at = [&](int j) {
                ++evals;
                const double e = kern.at(ws, j - 1) +
                                 (j == target ? kSaturationOffset
                                              : -kSaturationOffset);
                return sigmoid(e);
            };
            const HardScanOutcome out = hard_scan(
                p_at, t_prev, T, 0.5, SelectionMode::kThreshold, nullptr);
            if (out.selected.has_value()) {
                t_prev = *out.selected;
                sink += in.H(*out.selected - 1, 0);
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        g_sink = g_sink + sink;

        if (evals > static_cast<long long>(T) + static_cast<long long>(U)) {
            throw std::logic_error("bench: hard path exceeded T + U energy evals");
        }
        if (evals_first < 0) evals_first = evals;
        if (evals != evals_first) {
            throw std::logic_error("bench: hard path eval count varied across trials");
        }
        if (trial >= cfg.warmup) {
            samples.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    }
    if (samples_out != nullptr) *samples_out = samples;
    double sum = 0.0;
    for (double s : samples) sum += s;
    return {sum / static_cast<double>(samples.size()), evals_first};
}

std::vector<BenchCell> speedup_grid(const BenchConfig& cfg) {
    if (cfg.T_values.empty() || cfg.U_values.empty()) {
        throw std::domain_error("bench: T_values and U_values must be non-empty");
    }
    std::vector<BenchCell> cells;
    std::uint64_t stream = 1;
    for (int T : cfg.T_values) {
        for (int U : cfg.U_values) {
            std::vector<double> soft_samples, hard_samples;
            SeededRng rng_soft(cfg.seed, stream);
            SeededRng rng_hard(cfg.seed, stream);
            ++stream;

            BenchCell cell;
            cell.T = T;
            cell.U = U;
            cell.softmax_mean_s =
                bench_softmax(T, U, cfg, rng_soft, &soft_samples);
            const HardBenchResult hard =
                bench_hard(T, U, cfg, rng_hard, &hard_samples);
            cell.hard_mean_s = hard.mean_s;
            cell.hard_energy_evals = hard.energy_evals;
            cell.softmax_median_s = median_of(soft_samples);
            cell.hard_median_s = median_of(hard_samples);
            cell.speedup_mean = cell.softmax_mean_s / cell.hard_mean_s;
            cell.speedup_median = cell.softmax_median_s / cell.hard_median_s;
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string bench_metadata(const BenchConfig& cfg) {
    std::ostringstream out;
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tmv{};
    gmtime_r(&now, &tmv);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tmv);

    out << "# monattn attention speed benchmark\n";
    out << "# timestamp: " << stamp << "\n";
    out << "# seed: " << cfg.seed << "\n";
    out << "# T_values:";
    for (int t : cfg.T_values) out << ' ' << t;
    out << "\n# U_values:";
    for (int u : cfg.U_values) out << ' ' << u;
    out << "\n# dims: d_h=" << cfg.d_h << " d_s=" << cfg.d_s
        << " d_a=" << cfg.d_a << "\n";
    out << "# trials: " << cfg.trials << " warmup: " << cfg.warmup << "\n";
    out << "# saturation: "
        << (cfg.saturation == HardSaturation::kImmediate
                ? "immediate (p forced high at the scan front; U evals)"
                : "uniform-coverage (planned advance ~T/U per step via "
                  "+/-30 pre-sigmoid offsets; T + U - 1 evals)")
        << "\n";
    out << "# method: shared weight-normalized tanh energy kernel; "
           "per-sequence memory projection cached for both paths (untimed "
           "setup); per-step state projection timed for both paths; "
           "single-threaded\n";
    out << "# columns: softmax_s/hard_s/speedup are medians over trials "
           "(means are exposed programmatically)\n";
    return out.str();
}

std::string grid_csv(const std::vector<BenchCell>& cells) {
    std::ostringstream out;
    out << "T,U,softmax_s,hard_s,speedup,hard_energy_evals\n";
    char line[160];
    for (const BenchCell& c : cells) {
        std::snprintf(line, sizeof(line), "%d,%d,%.9g,%.9g,%.6g,%lld\n", c.T,
                      c.U, c.softmax_median_s, c.hard_median_s,
                      c.speedup_median, c.hard_energy_evals);
        out << line;
    }
    return out.str();
}

void append_grid_csv(const std::string& path, const BenchConfig& cfg,
                     const std::vector<BenchCell>& cells) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw std::runtime_error("bench: cannot open '" + path +
                                 "' for append");
    }
    out << bench_metadata(cfg) << grid_csv(cells);
    out.flush();
    if (!out) {
        throw std::runtime_error("bench: write failed for '" + path + "'");
    }
}

}  // namespace monattn
