// OFDM baseband core: gray-QPSK mapping, comb-pilot grid assembly,
// IFFT/cyclic-prefix transmit path and CP-removal/FFT receive path.
//
// Numerology follows the fixed 64-subcarrier, 16-sample-CP grid; only the
// pilot density (spacing 2/4/8) and the pilot seed are configurable.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "unidnn/common.hpp"
#include "unidnn/fft.hpp"
#include "unidnn/rng.hpp"

namespace unidnn {

struct OfdmConfig {
    std::size_t n_sub = 64;
    std::size_t n_fft = 64;
    std::size_t n_ifft = 64;
    std::size_t n_cp = 16;                      // samples
    double delta_f = 15000.0;                   // Hz
    double sample_period = 1.0 / (64 * 15000.0);  // s, = 1/(n_fft * delta_f)
    std::size_t pilot_spacing = 8;              // p_f in {2,4,8}
    std::size_t n_pilots = 8;                   // n_sub / pilot_spacing
    std::uint64_t pilot_seed = 2024;

    std::size_t n_data() const { return n_sub - n_pilots; }
    std::size_t bits_per_symbol() const { return 2 * n_data(); }
    double cp_duration() const { return static_cast<double>(n_cp) * sample_period; }
};

inline OfdmConfig make_ofdm_config(std::size_t pilot_spacing, std::uint64_t pilot_seed = 2024) {
    OfdmConfig cfg;
    cfg.pilot_spacing = pilot_spacing;
    require(pilot_spacing != 0 && cfg.n_sub % pilot_spacing == 0,
            "ofdm config: pilot spacing must divide the subcarrier count");
    cfg.n_pilots = cfg.n_sub / pilot_spacing;
    cfg.pilot_seed = pilot_seed;
    return cfg;
}

inline void validate(const OfdmConfig& cfg) {
    require(cfg.n_sub == cfg.n_fft && cfg.n_fft == cfg.n_ifft,
            "ofdm config: fully-loaded grid requires n_sub = n_fft = n_ifft");
    require(cfg.pilot_spacing == 2 || cfg.pilot_spacing == 4 || cfg.pilot_spacing == 8,
            "ofdm config: pilot spacing must be one of {2,4,8}");
    require(cfg.n_pilots * cfg.pilot_spacing == cfg.n_sub,
            "ofdm config: n_pilots * pilot_spacing must equal n_sub");
    require(std::abs(cfg.cp_duration() - 16.67e-6) <= 0.01 * 16.67e-6,
            "ofdm config: CP duration must stay within 1% of 16.67us");
}

// Comb-type pilot grid: pilots on every pilot_spacing-th subcarrier starting
// at 0, carrying deterministic unit-magnitude QPSK symbols drawn from
// pilot_seed. Data subcarriers are the complement.
struct PilotLayout {
    std::size_t n_sub = 0;
    std::vector<std::size_t> pilot_indices;
    cvec pilot_symbols;
    std::vector<std::size_t> data_indices;
};

struct ModulatedGrid {
    cvec x;  // length n_sub, pilots and data interleaved
};

struct TimeSymbol {
    cvec samples_cp;  // length n_ifft + n_cp, cyclic prefix first
};

inline cvec map_bits_to_qpsk(std::span<const std::uint8_t> bits) {
    require(bits.size() % 2 == 0, "qpsk map: bit count must be even");
    cvec out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double re = bits[2 * i] ? -kInvSqrt2 : kInvSqrt2;
        const double im = bits[2 * i + 1] ? -kInvSqrt2 : kInvSqrt2;
        out[i] = {re, im};
    }
    return out;
}

inline BitBlock demap_qpsk_hard(const cvec& symbols) {
    BitBlock bits(2 * symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        bits[2 * i] = symbols[i].real() < 0.0 ? 1 : 0;
        bits[2 * i + 1] = symbols[i].imag() < 0.0 ? 1 : 0;
    }
    return bits;
}

inline cplx hard_decision_qpsk(cplx x) {
    return {x.real() < 0.0 ? -kInvSqrt2 : kInvSqrt2,
            x.imag() < 0.0 ? -kInvSqrt2 : kInvSqrt2};
}

inline PilotLayout make_pilot_layout(const OfdmConfig& cfg) {
    require(cfg.pilot_spacing > 0 && cfg.n_sub % cfg.pilot_spacing == 0,
            "pilot layout: spacing must divide n_sub");
    PilotLayout layout;
    layout.n_sub = cfg.n_sub;
    Rng rng(cfg.pilot_seed);
    for (std::size_t k = 0; k < cfg.n_sub; ++k) {
        if (k % cfg.pilot_spacing == 0) {
            layout.pilot_indices.push_back(k);
            const std::uint8_t b[2] = {rng.bit(), rng.bit()};
            layout.pilot_symbols.push_back(map_bits_to_qpsk(std::span(b, 2))[0]);
        } else {
            layout.data_indices.push_back(k);
        }
    }
    return layout;
}

inline ModulatedGrid build_grid(const cvec& data_symbols, const PilotLayout& layout) {
    require(layout.n_sub > 0 && !layout.pilot_indices.empty(), "build_grid: empty layout");
    require(data_symbols.size() == layout.data_indices.size(),
            "build_grid: data symbol count must match data subcarrier count");
    ModulatedGrid grid;
    grid.x.assign(layout.n_sub, cplx{});
    for (std::size_t i = 0; i < layout.pilot_indices.size(); ++i)
        grid.x[layout.pilot_indices[i]] = layout.pilot_symbols[i];
    for (std::size_t i = 0; i < layout.data_indices.size(); ++i)
        grid.x[layout.data_indices[i]] = data_symbols[i];
    return grid;
}

inline TimeSymbol ofdm_modulate(const ModulatedGrid& grid, const OfdmConfig& cfg) {
    require(grid.x.size() == cfg.n_ifft, "ofdm_modulate: grid length must equal n_ifft");
    cvec body = fft_unitary(grid.x, /*inverse=*/true);
    TimeSymbol sym;
    sym.samples_cp.reserve(cfg.n_cp + body.size());
    sym.samples_cp.insert(sym.samples_cp.end(), body.end() - static_cast<std::ptrdiff_t>(cfg.n_cp),
                          body.end());
    sym.samples_cp.insert(sym.samples_cp.end(), body.begin(), body.end());
    return sym;
}

inline cvec ofdm_demodulate(std::span<const cplx> rx, const OfdmConfig& cfg) {
    require(rx.size() >= cfg.n_cp + cfg.n_fft,
            "ofdm_demodulate: input shorter than CP plus FFT window");
    cvec window(rx.begin() + static_cast<std::ptrdiff_t>(cfg.n_cp),
                rx.begin() + static_cast<std::ptrdiff_t>(cfg.n_cp + cfg.n_fft));
    fft_unitary_inplace(window, /*inverse=*/false);
    return window;
}

// Transmit-side convenience: random data bits for one OFDM symbol.
inline BitBlock random_bits(std::size_t count, Rng& rng) {
    BitBlock bits(count);
    for (auto& b : bits) b = rng.bit();
    return bits;
}

}  // namespace unidnn
