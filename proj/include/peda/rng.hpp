#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace peda {

/// Seeded generator with portable distributions.
///
/// The standard library distributions are implementation-defined, so every
/// variate used by this project is derived here from the raw 64-bit output of
/// std::mt19937_64 (whose sequence is fixed by the standard). Identical seeds
/// therefore give identical datasets on every conforming toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::size_t index(std::size_t n);

    double normal();
    /// Exp(1).
    double exponential();
    /// Gamma(shape, 1). Marsaglia-Tsang squeeze for shape >= 1, boosted below.
    double gamma(double shape);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent stream seed from a master seed and up to three
/// indices (splitmix64 finalizer chain).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

} // namespace peda
