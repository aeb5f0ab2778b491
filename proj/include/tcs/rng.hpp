#pragma once

#include <cstdint>
#include <random>

namespace tcs {

/// Deterministic sampler. The conversions are written out instead of using the
/// std distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in the open interval (a, b).
    double open(double a, double b) {
        double u = 0.0;
        while (u == 0.0) u = uniform();
        return a + (b - a) * u;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace tcs
