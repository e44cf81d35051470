#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cityscale {

/// Deterministic, platform-independent PRNG (splitmix64 core). Every source
/// of randomness in the project flows from one seed through named forks, so
/// fixtures regenerate byte for byte. Distributions are spelled out here
/// instead of using <random>, whose outputs are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// uniform integer in [0, n); n must be > 0
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// standard normal via Box-Muller on explicit uniforms
    double normal() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Child stream for a named subtask. Forks depend only on this stream's
    /// seed and the name, never on how much the parent has already drawn.
    Rng fork(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
        for (const char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0x9e3779b97f4a7c15ULL * (index + 1);
        return Rng(mix(seed_ ^ h));
    }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace cityscale
