#pragma once

// Deterministic random plumbing. All stochastic code takes an explicit Rng so
// a (seed, config) pair reproduces byte-identical outputs across platforms;
// nothing here reads global state. Distribution helpers are written out
// explicitly because libstdc++'s std::uniform_real_distribution and
// std::normal_distribution are not specified bit-for-bit.

#include <cmath>
#include <cstdint>
#include <random>

namespace qcycle {

/// splitmix64 mixing step; used to spread structured seed inputs.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent stream seed for sub-task `stream` of a base seed. Distinct
/// streams (chains, scenario points, repeat runs) never share state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (second draw cached).
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free given n << 2^53; bias is < 2^-40 for n <= 2^13.
        return std::uint64_t(uniform() * double(n)) % n;
    }

  private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace qcycle
