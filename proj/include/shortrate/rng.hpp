#pragma once

#include <cstdint>
#include <random>

namespace shortrate {

/// Deterministic substream RNG. Streams derived from the same master seed but
/// different stream indices are decorrelated, and a stream's draws depend only
/// on (seed, stream), never on which worker runs it. That is what makes the
/// Monte Carlo and multi-start results identical for any thread count.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s0 = splitmix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
        std::uint64_t s1 = splitmix(s0 ^ stream);
        std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                          static_cast<std::uint32_t>(s1), static_cast<std::uint32_t>(s1 >> 32)};
        engine_.seed(seq);
    }

    double normal() {
        std::normal_distribution<double> dist;
        return dist(engine_);
    }

    double uniform() {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        return dist(engine_);
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> dist(lo, hi);
        return dist(engine_);
    }

    double gamma(double shape, double scale) {
        std::gamma_distribution<double> dist(shape, scale);
        return dist(engine_);
    }

    std::uint64_t poisson(double mean) {
        std::poisson_distribution<std::uint64_t> dist(mean);
        return dist(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t splitmix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace shortrate
