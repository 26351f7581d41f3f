#pragma once

#include <cstdint>
#include <random>

namespace actnet {

/// Deterministic generator used everywhere randomness is needed.
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The std:: distributions are not portable across library
/// implementations, so all variates are derived here from raw 64-bit draws.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Exponential(rate) by inverse transform: -ln(1 - u) / rate.
    double exponential(double rate);

    /// Standard normal via Box-Muller (one variate per call, no caching).
    double normal();

    /// Child generator whose seed is a splitmix64 hash of (seed, stream).
    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace actnet
