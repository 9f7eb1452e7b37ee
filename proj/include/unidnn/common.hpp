// Shared aliases and small helpers used across the library.
#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace unidnn {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

// One bit per entry, values restricted to {0, 1}.
using BitBlock = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;

// Structural errors (bad shapes, bad arguments) throw std::invalid_argument;
// numerical failures throw std::runtime_error.
inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace unidnn
