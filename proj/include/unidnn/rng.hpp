// Seedable, platform-stable random number generation.
//
// Core generator: std::mt19937_64 (the 64-bit Mersenne Twister, fully
// specified by the C++ standard, so identical output on every conforming
// platform). All distributions are implemented here explicitly instead of
// via <random> distribution classes, whose output is implementation-defined.
// Substreams are derived with a splitmix64 hash of (seed, stream index).
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "unidnn/common.hpp"

namespace unidnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; never zero, safe for log().
    double uniform_pos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint8_t bit() { return static_cast<std::uint8_t>(gen_() & 1u); }

    // Standard normal via Box-Muller (cosine branch). Deterministic: exactly
    // two generator draws per call.
    double gaussian() {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        return r * std::cos(2.0 * kPi * uniform());
    }

    // Circularly-symmetric complex normal with E|z|^2 = 1.
    cplx cgaussian() {
        const double r = std::sqrt(-std::log(uniform_pos()));
        const double th = 2.0 * kPi * uniform();
        return {r * std::cos(th), r * std::sin(th)};
    }

    // Index in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Independent substream i of a base seed.
    static Rng stream(std::uint64_t seed, std::uint64_t i) {
        return Rng(splitmix64(seed ^ splitmix64(i)));
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace unidnn
