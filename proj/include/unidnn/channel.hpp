// Fading channel models: per-class tap-delay-line draws, CIR-to-CFR
// conversion with fractional delays, frequency-domain channel application
// with AWGN, and Monte-Carlo correlation matrix estimation.
//
// All classes are normalized to unit average power so the configured SNR is
// channel-independent. Fading is block fading per OFDM symbol: every symbol
// sees an independent draw.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <utility>

#include "unidnn/common.hpp"
#include "unidnn/phy.hpp"
#include "unidnn/rng.hpp"

namespace unidnn {

enum class ChannelClass { Rayleigh = 0, Rician = 1, TdlA = 2, Winner2 = 3, AwgnOnly = 4 };

inline constexpr std::size_t kNumChannelClasses = 5;

inline const char* channel_class_name(ChannelClass c) {
    switch (c) {
        case ChannelClass::Rayleigh: return "Rayleigh";
        case ChannelClass::Rician: return "Rician";
        case ChannelClass::TdlA: return "TdlA";
        case ChannelClass::Winner2: return "Winner2";
        case ChannelClass::AwgnOnly: return "AwgnOnly";
    }
    return "?";
}

inline ChannelClass channel_class_from_name(const std::string& s) {
    for (std::size_t i = 0; i < kNumChannelClasses; ++i) {
        auto c = static_cast<ChannelClass>(i);
        if (s == channel_class_name(c)) return c;
    }
    throw std::invalid_argument("unknown channel class: " + s);
}

struct ChannelTap {
    double delay = 0.0;  // seconds
    cplx gain;
};

struct ChannelRealization {
    ChannelClass cls = ChannelClass::AwgnOnly;
    std::vector<ChannelTap> taps;
    cvec cfr;  // length n_sub, consistent with taps via cir_to_cfr

    double delay_span() const {
        double span = 0.0;
        for (const auto& t : taps) span = std::max(span, t.delay);
        return span;
    }
};

struct NoiseSpec {
    double snr_db = 0.0;
    // Per-subcarrier noise variance under unit average transmit power.
    double sigma_n2() const { return std::pow(10.0, -snr_db / 10.0); }
};

// Tap-delay-line recipe for one class. pdp entries are (delay, power) with
// delays in seconds and powers normalized to unit sum.
struct ChannelModelParams {
    std::size_t n_taps = 0;       // L (integer-delay models)
    std::size_t n_frac_taps = 0;  // L_frac (fractional-delay models)
    double delay_span = 0.0;      // sigma_DS read as total span, seconds
    double kappa = 0.0;           // Rician LOS/NLOS power ratio
    std::vector<std::pair<double, double>> pdp;
};

namespace detail {

// 3GPP TR 38.901 Table 7.7.2-1 (TDL-A): normalized delays and powers in dB.
inline constexpr std::size_t kTdlATaps = 23;
inline constexpr std::array<double, kTdlATaps> kTdlADelayNorm = {
    0.0000, 0.3819, 0.4025, 0.5868, 0.4610, 0.5375, 0.6708, 0.5750,
    0.7618, 1.5375, 1.8978, 2.2242, 2.1718, 2.4942, 2.5119, 3.0582,
    4.0810, 4.4579, 4.5695, 4.7966, 5.0066, 5.3043, 9.6586};
inline constexpr std::array<double, kTdlATaps> kTdlAPowerDb = {
    -13.4, 0.0,   -2.2,  -4.0,  -6.0,  -8.2,  -9.9,  -10.5,
    -7.5,  -15.9, -6.6,  -16.7, -12.4, -15.2, -10.8, -11.3,
    -12.7, -16.2, -18.3, -18.9, -16.6, -19.9, -29.7};

inline std::vector<std::pair<double, double>> normalized_pdp(
    const std::vector<double>& delays, const std::vector<double>& powers_lin) {
    double total = 0.0;
    for (double p : powers_lin) total += p;
    std::vector<std::pair<double, double>> pdp(delays.size());
    for (std::size_t i = 0; i < delays.size(); ++i)
        pdp[i] = {delays[i], powers_lin[i] / total};
    return pdp;
}

}  // namespace detail

inline ChannelModelParams rayleigh_params(const OfdmConfig& cfg) {
    ChannelModelParams p;
    p.n_taps = 4;
    p.delay_span = 4.160e-6;
    std::vector<double> d(p.n_taps), w(p.n_taps, 1.0);
    for (std::size_t l = 0; l < p.n_taps; ++l) d[l] = static_cast<double>(l) * cfg.sample_period;
    p.pdp = detail::normalized_pdp(d, w);
    return p;
}

inline ChannelModelParams rician_params(const OfdmConfig& cfg) {
    ChannelModelParams p;
    p.n_taps = 6;
    p.kappa = 2.0;
    p.delay_span = 6.240e-6;
    std::vector<double> d(p.n_taps), w(p.n_taps, 1.0);
    for (std::size_t l = 0; l < p.n_taps; ++l) d[l] = static_cast<double>(l) * cfg.sample_period;
    p.pdp = detail::normalized_pdp(d, w);
    return p;
}

// TDL-A with the delay axis rescaled so the taps span [0, sigma_DS]. The
// span stays below one sample period, which collapses the 23 sub-taps into
// roughly one effective tap (flat fading).
inline ChannelModelParams tdl_a_params() {
    ChannelModelParams p;
    p.n_frac_taps = detail::kTdlATaps;
    p.delay_span = 0.965e-6;
    const double max_norm = detail::kTdlADelayNorm.back();
    std::vector<double> d(detail::kTdlATaps), w(detail::kTdlATaps);
    for (std::size_t l = 0; l < detail::kTdlATaps; ++l) {
        d[l] = detail::kTdlADelayNorm[l] / max_norm * p.delay_span;
        w[l] = std::pow(10.0, detail::kTdlAPowerDb[l] / 10.0);
    }
    p.pdp = detail::normalized_pdp(d, w);
    return p;
}

// WINNER II surrogate: 24 fractional taps on a fixed delay grid (drawn once
// from a constant seed), exponential power-delay profile with decay constant
// sigma_DS/3. Stands in for the full WINNER II toolbox.
inline ChannelModelParams winner2_params() {
    static const ChannelModelParams cached = [] {
        ChannelModelParams p;
        p.n_frac_taps = 24;
        p.delay_span = 5.200e-6;
        Rng grid_rng(0x57494E3232ULL);  // fixed: the grid is part of the model
        std::vector<double> d(p.n_frac_taps);
        d[0] = 0.0;
        for (std::size_t l = 1; l < p.n_frac_taps; ++l) d[l] = grid_rng.uniform(0.0, p.delay_span);
        std::sort(d.begin(), d.end());
        const double tau_rms = p.delay_span / 3.0;
        std::vector<double> w(p.n_frac_taps);
        for (std::size_t l = 0; l < p.n_frac_taps; ++l) w[l] = std::exp(-d[l] / tau_rms);
        p.pdp = detail::normalized_pdp(d, w);
        return p;
    }();
    return cached;
}

// H_k = sum_l g_l * exp(-j 2 pi k tau_l / (N_FFT * T_s)), k = 0..n_sub-1.
// Exact for fractional delays; reduces to the DFT of the sampled CIR when
// all delays are integer multiples of the sample period.
inline cvec cir_to_cfr(const std::vector<ChannelTap>& taps, const OfdmConfig& cfg) {
    require(!taps.empty(), "cir_to_cfr: need at least one tap");
    for (const auto& t : taps) require(t.delay >= 0.0, "cir_to_cfr: negative tap delay");
    const double t_span = static_cast<double>(cfg.n_fft) * cfg.sample_period;
    cvec cfr(cfg.n_sub);
    for (std::size_t k = 0; k < cfg.n_sub; ++k) {
        cplx h{};
        for (const auto& t : taps) {
            const double ang = -2.0 * kPi * static_cast<double>(k) * t.delay / t_span;
            h += t.gain * cplx{std::cos(ang), std::sin(ang)};
        }
        cfr[k] = h;
    }
    return cfr;
}

namespace detail {

// Rayleigh taps on a given PDP: gain_l = sqrt(p_l) * CN(0,1).
inline std::vector<ChannelTap> rayleigh_taps(const std::vector<std::pair<double, double>>& pdp,
                                             Rng& rng) {
    std::vector<ChannelTap> taps(pdp.size());
    for (std::size_t l = 0; l < pdp.size(); ++l) {
        taps[l].delay = pdp[l].first;
        taps[l].gain = std::sqrt(pdp[l].second) * rng.cgaussian();
    }
    return taps;
}

}  // namespace detail

inline ChannelRealization draw_rayleigh(const ChannelModelParams& p, const OfdmConfig& cfg,
                                        Rng& rng) {
    require(p.n_taps == 4, "draw_rayleigh: expects L = 4");
    ChannelRealization ch;
    ch.cls = ChannelClass::Rayleigh;
    ch.taps = detail::rayleigh_taps(p.pdp, rng);
    ch.cfr = cir_to_cfr(ch.taps, cfg);
    return ch;
}

inline ChannelRealization draw_rician(const ChannelModelParams& p, const OfdmConfig& cfg,
                                      Rng& rng) {
    require(p.n_taps == 6 && p.kappa == 2.0, "draw_rician: expects L = 6, kappa = 2");
    ChannelRealization ch;
    ch.cls = ChannelClass::Rician;
    // NLOS: Rayleigh taps carrying total power 1/(1+kappa).
    const double nlos_power = 1.0 / (1.0 + p.kappa);
    ch.taps.resize(p.n_taps);
    for (std::size_t l = 0; l < p.n_taps; ++l) {
        ch.taps[l].delay = p.pdp[l].first;
        ch.taps[l].gain = std::sqrt(nlos_power * p.pdp[l].second) * rng.cgaussian();
    }
    // LOS on tap 0: fixed magnitude sqrt(kappa/(1+kappa)), phase uniform on
    // [-pi/2, pi/2].
    const double los_mag = std::sqrt(p.kappa / (1.0 + p.kappa));
    const double phase = (rng.uniform() - 0.5) * kPi;
    ch.taps[0].gain += los_mag * cplx{std::cos(phase), std::sin(phase)};
    ch.cfr = cir_to_cfr(ch.taps, cfg);
    return ch;
}

inline ChannelRealization draw_tdl_a(const ChannelModelParams& p, const OfdmConfig& cfg,
                                     Rng& rng) {
    require(p.n_frac_taps == 23, "draw_tdl_a: expects L_frac = 23");
    ChannelRealization ch;
    ch.cls = ChannelClass::TdlA;
    ch.taps = detail::rayleigh_taps(p.pdp, rng);
    ch.cfr = cir_to_cfr(ch.taps, cfg);
    return ch;
}

inline ChannelRealization draw_winner2(const ChannelModelParams& p, const OfdmConfig& cfg,
                                       Rng& rng) {
    require(p.n_frac_taps == 24, "draw_winner2: expects L_frac = 24");
    ChannelRealization ch;
    ch.cls = ChannelClass::Winner2;
    ch.taps = detail::rayleigh_taps(p.pdp, rng);
    ch.cfr = cir_to_cfr(ch.taps, cfg);
    return ch;
}

inline ChannelRealization awgn_class(const OfdmConfig& cfg) {
    ChannelRealization ch;
    ch.cls = ChannelClass::AwgnOnly;
    ch.taps = {ChannelTap{0.0, cplx{1.0, 0.0}}};
    ch.cfr.assign(cfg.n_sub, cplx{1.0, 0.0});
    return ch;
}

inline ChannelRealization draw_channel(ChannelClass cls, const OfdmConfig& cfg, Rng& rng) {
    switch (cls) {
        case ChannelClass::Rayleigh: return draw_rayleigh(rayleigh_params(cfg), cfg, rng);
        case ChannelClass::Rician: return draw_rician(rician_params(cfg), cfg, rng);
        case ChannelClass::TdlA: return draw_tdl_a(tdl_a_params(), cfg, rng);
        case ChannelClass::Winner2: return draw_winner2(winner2_params(), cfg, rng);
        case ChannelClass::AwgnOnly: return awgn_class(cfg);
    }
    throw std::invalid_argument("draw_channel: unknown class");
}

// Y_k = X_k H_k + n_k with n_k ~ CN(0, sigma_n2). The CP must absorb the
// whole delay spread or the flat per-subcarrier model is invalid.
inline cvec apply_channel(const ModulatedGrid& grid, const ChannelRealization& chan,
                          const NoiseSpec& noise, const OfdmConfig& cfg, Rng& rng) {
    require(grid.x.size() == chan.cfr.size(), "apply_channel: grid/CFR length mismatch");
    require(chan.delay_span() <= cfg.cp_duration() + 1e-15,
            "apply_channel: delay span exceeds the cyclic prefix");
    const double sigma = std::sqrt(noise.sigma_n2());
    cvec y(grid.x.size());
    for (std::size_t k = 0; k < y.size(); ++k)
        y[k] = grid.x[k] * chan.cfr[k] + sigma * rng.cgaussian();
    return y;
}

// Monte-Carlo pilot-grid correlation matrices: R_HH over true CFRs and
// R_lsls over noisy LS pilot estimates at the given SNR. Accumulated with
// explicit loops so both matrices are exactly Hermitian as stored.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> estimate_correlation(
    ChannelClass cls, const OfdmConfig& cfg, const PilotLayout& layout, std::size_t m_h,
    const NoiseSpec& noise, Rng& rng) {
    require(m_h >= 2, "estimate_correlation: need at least two draws");
    const std::size_t np = layout.pilot_indices.size();
    Eigen::MatrixXcd r_hh = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(np),
                                                   static_cast<Eigen::Index>(np));
    Eigen::MatrixXcd r_lsls = r_hh;
    const double sigma = std::sqrt(noise.sigma_n2());
    cvec h_p(np), h_ls(np);
    // Accumulate the upper triangle only (real diagonal), then mirror, so the
    // result is Hermitian exactly as stored.
    for (std::size_t draw = 0; draw < m_h; ++draw) {
        const ChannelRealization ch = draw_channel(cls, cfg, rng);
        for (std::size_t i = 0; i < np; ++i) {
            h_p[i] = ch.cfr[layout.pilot_indices[i]];
            h_ls[i] = h_p[i] + sigma * rng.cgaussian() / layout.pilot_symbols[i];
        }
        for (std::size_t i = 0; i < np; ++i) {
            r_hh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += std::norm(h_p[i]);
            r_lsls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += std::norm(h_ls[i]);
            for (std::size_t j = i + 1; j < np; ++j) {
                r_hh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    h_p[i] * std::conj(h_p[j]);
                r_lsls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    h_ls[i] * std::conj(h_ls[j]);
            }
        }
    }
    r_hh /= static_cast<double>(m_h);
    r_lsls /= static_cast<double>(m_h);
    for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = i + 1; j < np; ++j) {
            r_hh(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                std::conj(r_hh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            r_lsls(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
                std::conj(r_lsls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
    return {r_hh, r_lsls};
}

}  // namespace unidnn
