#include "monattn/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace monattn {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Stafford mix13 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Per-stream increment: odd, with enough bit transitions.
std::uint64_t mix_gamma(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    z = (z ^ (z >> 33)) | 1ULL;
    if (std::popcount(z ^ (z >> 1)) < 24) {
        z ^= 0xaaaaaaaaaaaaaaaaULL;
    }
    return z;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      base_(mix64(seed ^ mix64(stream_id + kGolden))),
      gamma_(mix_gamma(seed + kGolden * (stream_id + 1))) {}

std::uint64_t SeededRng::next_u64() {
    ++counter_;
    return mix64(base_ + gamma_ * counter_);
}

double SeededRng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool SeededRng::bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("bernoulli: p outside [0, 1]");
    }
    return next_unit() < p;
}

Vec SeededRng::gaussian(Eigen::Index n, double std_dev) {
    if (std_dev < 0.0) {
        throw std::domain_error("gaussian: negative std");
    }
    Vec out = Vec::Zero(n);
    if (std_dev == 0.0) {
        return out;
    }
    for (Eigen::Index i = 0; i < n; i += 2) {
        // u1 in (0, 1] so the log is finite.
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i] = radius * std::cos(angle);
        if (i + 1 < n) {
            out[i + 1] = radius * std::sin(angle);
        }
    }
    return out * std_dev;
}

}  // namespace monattn
