// Radix-2 FFT with unitary scaling (1/sqrt(N) in both directions), so the
// transform preserves energy and SNR bookkeeping is direction-independent.
#pragma once

#include <cmath>

#include "unidnn/common.hpp"

namespace unidnn {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_unitary_inplace(cvec& a, bool inverse = false) {
    const std::size_t n = a.size();
    require(is_pow2(n), "fft: size must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : a) x *= scale;
}

inline cvec fft_unitary(cvec a, bool inverse = false) {
    fft_unitary_inplace(a, inverse);
    return a;
}

}  // namespace unidnn
