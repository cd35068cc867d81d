#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace recalign {

// Seeded, implementation-independent random stream: splitmix64 for the
// integer core, 53-bit uniforms, Box-Muller gaussians. The stdlib
// distributions are deliberately avoided so identical seeds replicate
// bit-for-bit across compilers and platforms.
inline constexpr const char* kRngAlgorithmId = "splitmix64/box-muller-v1";

struct Rng {
    std::uint64_t state = 0;

    explicit Rng(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe to feed into log().
    double next_unit_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Log-uniform in [lo, hi), lo > 0.
    double next_log_range(double lo, double hi) {
        return std::exp(next_range(std::log(lo), std::log(hi)));
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double next_gaussian() {
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool next_bernoulli(double p) { return next_unit() < p; }

    // Index in [0, n).
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_unit() * static_cast<double>(n));
    }
};

// Derived seed for (seed, stream_id); lets independent substreams (one per
// environment, per trial, ...) be generated in parallel without coupling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    Rng mixer(seed ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    return mixer.next_u64();
}

inline Rng derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(derive_seed(seed, stream_id));
}

} // namespace recalign
