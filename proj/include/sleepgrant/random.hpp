#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sleepgrant {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for stream `stream` of replication `replication` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication,
                                    std::uint64_t stream) noexcept {
    return mix64(mix64(mix64(master) ^ replication) + stream);
}

/// Seeded random stream. All samplers are written out here rather than
/// taken from <random> distributions so draws are identical across
/// standard library implementations.
class RngStream {
public:
    using engine_type = std::mt19937_64;

    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform index in [0, n). Consumes no randomness when n <= 1.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        // Lemire's nearly-divisionless bounded integer.
        const std::uint64_t range = n;
        __uint128_t m = static_cast<__uint128_t>(engine_()) * range;
        auto low = static_cast<std::uint64_t>(m);
        if (low < range) {
            const std::uint64_t threshold = (0 - range) % range;
            while (low < threshold) {
                m = static_cast<__uint128_t>(engine_()) * range;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Unit-mean exponential.
    double exponential() { return -std::log1p(-uniform01()); }

    /// Standard normal via Box-Muller (two uniforms per call).
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Number of failures before the first success of a Bernoulli(p) sequence.
    std::uint64_t geometric(double p) {
        if (p >= 1.0) return 0;
        const double u = uniform01();
        const double g = std::floor(std::log1p(-u) / std::log1p(-p));
        return g >= 1.8e19 ? UINT64_MAX : static_cast<std::uint64_t>(g);
    }

private:
    engine_type engine_;
};

/// Per-replication random streams, one per stochastic subsystem, so that
/// changing how one subsystem consumes randomness leaves the others intact.
struct ReplicationStreams {
    RngStream traffic;
    RngStream prediction;
    RngStream channel;
    RngStream reward;
    RngStream policy;

    ReplicationStreams(std::uint64_t master, std::uint64_t replication)
        : traffic(derive_seed(master, replication, 1)),
          prediction(derive_seed(master, replication, 2)),
          channel(derive_seed(master, replication, 3)),
          reward(derive_seed(master, replication, 4)),
          policy(derive_seed(master, replication, 5)) {}
};

}  // namespace sleepgrant
