#ifndef MONATTN_ORACLE_HPP
#define MONATTN_ORACLE_HPP

#include <cstdint>

#include "monattn/numkit.hpp"

namespace monattn {

// Ground-truth checks for the monotonic attention expectation, computed
// without the production recurrence or scan code paths.

inline constexpr int kOracleMaxMemory = 8;   // T limit for exact enumeration
inline constexpr int kOracleMaxOutputs = 6;  // U limit for exact enumeration

// What happens when the hard process scans past the end of the memory
// without selecting: kAbsorbing ends the process (the expectation
// recurrence models this); kRescanning emits nothing for that output and
// resumes from the same position, as a literal decoder does.
enum class HardSemantics { kAbsorbing, kRescanning };

// Exact selection distribution alpha[i][j] = P(output i+1 selects memory
// entry j+1) by explicit enumeration of every monotonic alignment path.
// p is U x T with p(i, j) the selection probability at that pair.
// Enforces the enumeration limits above.
Mat enumerate_alpha_exact(const Mat& p);

// Monte-Carlo estimate of the same distribution by simulating the hard
// process n_samples times. Sample k always uses RNG stream (seed, k), so
// results are bit-identical no matter how the samples are sharded.
Mat monte_carlo_alpha(const Mat& p, int n_samples, std::uint64_t seed,
                      HardSemantics semantics);

// Probability the process has produced nothing at this row: 1 - sum(alpha).
double residual_mass(const Vec& alpha_row);

}  // namespace monattn

#endif  // MONATTN_ORACLE_HPP
