#pragma once

#include <complex>
#include <cstdint>
#include <cmath>

namespace polyseq {

// Seeded splitmix64 generator. The standard distributions are
// implementation-defined, so all sampling is hand-rolled here to keep
// runs byte-reproducible across toolchains. Independent streams are
// derived from (seed, stream_tag) so that one config seed drives the
// whole pipeline.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1))) {
        // decorrelate nearby seeds
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + uniform() * (b - a); }

    /// Uniform over the open disc D(center, radius), by rejection.
    std::complex<double> in_disc(std::complex<double> center, double radius) {
        for (;;) {
            double x = uniform(-1.0, 1.0);
            double y = uniform(-1.0, 1.0);
            if (x * x + y * y < 1.0)
                return center + std::complex<double>(x * radius, y * radius);
        }
    }

    /// Uniform over the annulus r0 < |z| <= r1 (area-weighted modulus).
    std::complex<double> in_annulus(double r0, double r1) {
        double r = std::sqrt(uniform(r0 * r0, r1 * r1));
        double th = uniform(0.0, 2.0 * 3.14159265358979323846);
        return {r * std::cos(th), r * std::sin(th)};
    }

    std::int64_t index(std::int64_t n) {
        return std::int64_t(next_u64() % std::uint64_t(n));
    }

private:
    std::uint64_t state_;
};

}  // namespace polyseq
