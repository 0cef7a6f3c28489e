#ifndef MONATTN_RNG_HPP
#define MONATTN_RNG_HPP

#include <cstdint>

#include "monattn/numkit.hpp"

namespace monattn {

// Counter-based generator in the SplittableRandom style: the k-th output
// is a pure function of (seed, stream_id, k), so identical (seed,
// stream_id) pairs replay identical sequences and distinct stream_ids
// give statistically independent streams. Sharded consumers derive one
// stream per shard and stay bit-identical to a sequential run.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t counter() const { return counter_; }

    // Restores the position within the stream (used by checkpoint load).
    void set_counter(std::uint64_t counter) { counter_ = counter; }

    std::uint64_t next_u64();

    // Uniform on [0, 1), 53-bit resolution.
    double next_unit();

    // One Bernoulli(p) draw; p outside [0, 1] is a domain error.
    bool bernoulli(double p);

    // n i.i.d. N(0, std^2) draws via Box-Muller; std = 0 yields zeros
    // without consuming any stream output.
    Vec gaussian(Eigen::Index n, double std_dev);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t base_;
    std::uint64_t gamma_;
    std::uint64_t counter_ = 0;
};

}  // namespace monattn

#endif  // MONATTN_RNG_HPP
