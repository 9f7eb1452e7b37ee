// Conventional receiver chain: LS and MMSE pilot estimation, linear
// interpolation with nearest-pilot edge extension, ML equalization with hard
// QPSK decisions, and BER counting.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "unidnn/channel.hpp"
#include "unidnn/common.hpp"
#include "unidnn/phy.hpp"

namespace unidnn {

enum class EstimatorMethod { LS, MMSE_perfect, MMSE_nonperfect, True };

inline const char* estimator_method_name(EstimatorMethod m) {
    switch (m) {
        case EstimatorMethod::LS: return "LS";
        case EstimatorMethod::MMSE_perfect: return "MMSE_perfect";
        case EstimatorMethod::MMSE_nonperfect: return "MMSE_nonperfect";
        case EstimatorMethod::True: return "True";
    }
    return "?";
}

struct ChannelEstimate {
    cvec h_hat;  // length n_sub
    EstimatorMethod method = EstimatorMethod::LS;
};

struct EqualizedSymbol {
    cvec x_hat;      // hard-decided constellation points over data indices
    BitBlock bits;   // demapped data bits
    std::size_t clamped = 0;  // data subcarriers hit by the deep-fade guard
};

// LS estimate at the pilot grid: H_ls,k = Y_k / X_k.
inline cvec ls_estimate(const cvec& y_pilots, const cvec& pilot_symbols) {
    require(y_pilots.size() == pilot_symbols.size(), "ls_estimate: length mismatch");
    cvec h(y_pilots.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        require(std::abs(pilot_symbols[i]) > 0.0, "ls_estimate: zero pilot symbol");
        h[i] = y_pilots[i] / pilot_symbols[i];
    }
    return h;
}

// MMSE smoothing of the LS pilot estimate: R (R + sigma_n2 I)^(-1) H_ls,
// with R = R_HH (perfect CSI) or R_lsls (non-perfect CSI). The regularized
// Hermitian system is solved by LDLT; explicit inversion is avoided.
inline cvec mmse_estimate(const cvec& h_ls, const Eigen::MatrixXcd& r, const NoiseSpec& noise,
                          EstimatorMethod variant = EstimatorMethod::MMSE_perfect) {
    require(variant == EstimatorMethod::MMSE_perfect || variant == EstimatorMethod::MMSE_nonperfect,
            "mmse_estimate: variant must be an MMSE tag");
    const auto np = static_cast<Eigen::Index>(h_ls.size());
    require(r.rows() == np && r.cols() == np, "mmse_estimate: correlation size mismatch");

    Eigen::MatrixXcd reg = r;
    reg.diagonal().array() += noise.sigma_n2();
    Eigen::LDLT<Eigen::MatrixXcd> ldlt(reg);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("mmse_estimate: LDLT factorization failed");
    const Eigen::VectorXd d = ldlt.vectorD().real();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || d.cwiseAbs().minCoeff() < 1e-12 * dmax)
        throw std::runtime_error("mmse_estimate: regularized matrix is numerically singular");

    Eigen::VectorXcd rhs(np);
    for (Eigen::Index i = 0; i < np; ++i) rhs(i) = h_ls[static_cast<std::size_t>(i)];
    const Eigen::VectorXcd smoothed = r * ldlt.solve(rhs);
    cvec out(h_ls.size());
    for (Eigen::Index i = 0; i < np; ++i) out[static_cast<std::size_t>(i)] = smoothed(i);
    return out;
}

// Linear interpolation between adjacent pilots (real and imaginary parts
// independently); data subcarriers outside the pilot range take the nearest
// pilot's value.
inline ChannelEstimate interpolate_estimate(const cvec& pilot_estimates, const PilotLayout& layout,
                                            EstimatorMethod method = EstimatorMethod::LS) {
    require(pilot_estimates.size() == layout.pilot_indices.size(),
            "interpolate_estimate: estimate/pilot count mismatch");
    require(pilot_estimates.size() >= 2, "interpolate_estimate: need at least two pilots");

    ChannelEstimate est;
    est.method = method;
    est.h_hat.assign(layout.n_sub, cplx{});
    const auto& pk = layout.pilot_indices;
    std::size_t seg = 0;  // current pilot segment [pk[seg], pk[seg+1]]
    for (std::size_t k = 0; k < layout.n_sub; ++k) {
        if (k <= pk.front()) {
            est.h_hat[k] = pilot_estimates.front();
            continue;
        }
        if (k >= pk.back()) {
            est.h_hat[k] = pilot_estimates.back();
            continue;
        }
        while (pk[seg + 1] < k) ++seg;
        const double t = static_cast<double>(k - pk[seg]) /
                         static_cast<double>(pk[seg + 1] - pk[seg]);
        est.h_hat[k] = (1.0 - t) * pilot_estimates[seg] + t * pilot_estimates[seg + 1];
    }
    return est;
}

// ML detection for SISO QPSK: per data subcarrier the argmin over the four
// constellation points of |Y - X H|^2 equals equalize-then-round, so X_hat =
// hard_decision(Y_k / H_k). Deep fades (|H| < 1e-12) are clamped to 1e-12
// magnitude to keep the division finite; affected subcarriers are counted.
inline EqualizedSymbol ml_detect(const cvec& y, const ChannelEstimate& est,
                                 const PilotLayout& layout) {
    require(y.size() == layout.n_sub && est.h_hat.size() == layout.n_sub,
            "ml_detect: length mismatch");
    EqualizedSymbol eq;
    eq.x_hat.reserve(layout.data_indices.size());
    cvec equalized(layout.data_indices.size());
    for (std::size_t i = 0; i < layout.data_indices.size(); ++i) {
        const std::size_t k = layout.data_indices[i];
        cplx h = est.h_hat[k];
        const double mag = std::abs(h);
        if (mag < 1e-12) {
            ++eq.clamped;
            h = (mag == 0.0) ? cplx{1e-12, 0.0} : h * (1e-12 / mag);
        }
        equalized[i] = y[k] / h;
        eq.x_hat.push_back(hard_decision_qpsk(equalized[i]));
    }
    eq.bits = demap_qpsk_hard(eq.x_hat);
    return eq;
}

inline double bit_error_rate(const BitBlock& tx, const BitBlock& rx) {
    require(tx.size() == rx.size(), "bit_error_rate: length mismatch");
    require(!tx.empty(), "bit_error_rate: empty blocks");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < tx.size(); ++i) errors += tx[i] != rx[i];
    return static_cast<double>(errors) / static_cast<double>(tx.size());
}

}  // namespace unidnn
