#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace ompo {

/// Seeded random source shared by every stochastic component.
///
/// Streams are reproducible for a given seed on a given build; the standard
/// library distributions are not guaranteed identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }

    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: empty range");
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    /// Draws an index from a discrete distribution by inverse-CDF scan.
    std::size_t categorical(std::span<const double> probs) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        // round-off: fall back to the last index with mass
        for (std::size_t i = probs.size(); i-- > 0;)
            if (probs[i] > 0.0) return i;
        throw std::invalid_argument("Rng::categorical: no mass");
    }

    /// Derives an independent child seed; used to split streams per component.
    std::uint64_t split() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ompo
