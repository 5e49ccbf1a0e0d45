#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace harmony {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stream key for (global_seed, item_id); lets corpus items be synthesized in
/// any order while drawing the same numbers.
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t item_id) noexcept {
    return mix64(mix64(global_seed) ^ (item_id * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
}

/// Counter-based generator: the n-th draw is mix64(key + n * golden). All
/// distributions are implemented here rather than with <random> so that
/// sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

    std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform in [0,1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire's multiply-shift; bias is < n / 2^64.
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (one value per pair of draws).
    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0,1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Laplace(0, b) by inverse CDF.
    double laplace(double b) noexcept {
        const double u = uniform() - 0.5;
        const double s = u < 0 ? -1.0 : 1.0;
        return -b * s * std::log(1.0 - 2.0 * std::abs(u));
    }

    /// Poisson(lambda): Knuth's product method for small lambda, rounded
    /// normal approximation above 64.
    std::uint64_t poisson(double lambda) noexcept {
        if (lambda <= 0.0) return 0;
        if (lambda > 64.0) {
            const double v = std::round(lambda + std::sqrt(lambda) * normal());
            return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
        }
        const double limit = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

    std::uint64_t seed_child() noexcept { return next_u64(); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace harmony
