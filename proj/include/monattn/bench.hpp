#ifndef MONATTN_BENCH_HPP
#define MONATTN_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "monattn/numkit.hpp"
#include "monattn/rng.hpp"

namespace monattn {

// How the hard path's energies are saturated. kUniformCoverage offsets the
// energies so the selected index advances evenly across the memory
// (expected advance T/U per output step, total energy evaluations
// T + U - 1); kImmediate saturates every energy high so each step selects
// at its first inspection (exactly U evaluations).
enum class HardSaturation { kUniformCoverage, kImmediate };

struct BenchConfig {
    std::vector<int> T_values{50, 100, 200, 400};
    std::vector<int> U_values{50, 100, 200, 400, 1000};
    Eigen::Index d_h = 256;
    Eigen::Index d_s = 256;
    Eigen::Index d_a = 256;
    int trials = 10;  // timed trials per cell, must be >= 10
    int warmup = 2;   // untimed warmup trials per cell
    std::uint64_t seed = 0;
    HardSaturation saturation = HardSaturation::kUniformCoverage;
};

// One (T, U) grid cell. Means satisfy speedup = softmax_time / hard_time;
// medians are reported alongside because single runs are noisy at desk
// scale, and the acceptance gate reads the median.
struct BenchCell {
    int T = 0;
    int U = 0;
    double softmax_mean_s = 0.0;
    double softmax_median_s = 0.0;
    double hard_mean_s = 0.0;
    double hard_median_s = 0.0;
    double speedup_mean = 0.0;
    double speedup_median = 0.0;
    long long hard_energy_evals = 0;
};

// Times U softmax-attention context computations over a T-entry memory.
// Inputs (memory rows, decoder states, energy parameters) are uniform in
// [-1, 1]; setup and the per-sequence memory projection are excluded from
// the timed section; the clock is monotonic. Returns the mean seconds per
// trial after warmup; per-trial samples go to samples_out when non-null.
double bench_softmax(int T, int U, const BenchConfig& cfg, SeededRng& rng,
                     std::vector<double>* samples_out = nullptr);

struct HardBenchResult {
    double mean_s = 0.0;
    long long energy_evals = 0;  // exact count per trial (identical across trials)
};

// Times U hard monotonic steps over the same input scheme as
// bench_softmax, with energies offset per cfg.saturation. Asserts
// energy_evals <= T + U on every trial. Both paths evaluate the identical
// energy function; only the evaluation count differs.
HardBenchResult bench_hard(int T, int U, const BenchConfig& cfg, SeededRng& rng,
                           std::vector<double>* samples_out = nullptr);

// Runs every (T, U) cell sequentially on one thread, pairing both paths on
// identical per-trial inputs.
std::vector<BenchCell> speedup_grid(const BenchConfig& cfg);

// '#'-prefixed metadata lines: config echo, saturation scheme, timestamp.
std::string bench_metadata(const BenchConfig& cfg);

// CSV header `T,U,softmax_s,hard_s,speedup,hard_energy_evals` plus one row
// per cell. The time and speedup columns carry the medians (the acceptance
// basis); means live in BenchCell for programmatic use.
std::string grid_csv(const std::vector<BenchCell>& cells);

// Appends metadata + CSV to path (append-only log). I/O failure ->
// std::runtime_error naming the path.
void append_grid_csv(const std::string& path, const BenchConfig& cfg,
                     const std::vector<BenchCell>& cells);

}  // namespace monattn

#endif  // MONATTN_BENCH_HPP
