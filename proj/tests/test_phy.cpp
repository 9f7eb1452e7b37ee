#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "unidnn/phy.hpp"

using namespace unidnn;

namespace {

double max_abs_diff(const cvec& a, const cvec& b) {
    REQUIRE(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

cvec random_grid(Rng& rng, std::size_t n) {
    cvec g(n);
    for (auto& x : g) x = rng.cgaussian();
    return g;
}

}  // namespace

TEST_CASE("gray QPSK mapping hits the pinned constellation") {
    const BitBlock b00 = {0, 0};
    const auto s00 = map_bits_to_qpsk(b00);
    CHECK(s00[0].real() == Catch::Approx(0.7071).margin(1e-4));
    CHECK(s00[0].imag() == Catch::Approx(0.7071).margin(1e-4));

    const BitBlock b11 = {1, 1};
    const auto s11 = map_bits_to_qpsk(b11);
    CHECK(s11[0].real() == Catch::Approx(-0.7071).margin(1e-4));
    CHECK(s11[0].imag() == Catch::Approx(-0.7071).margin(1e-4));

    Rng rng(7);
    const auto bits = random_bits(8, rng);
    const auto syms = map_bits_to_qpsk(bits);
    REQUIRE(syms.size() == 4);
    for (const auto& s : syms) CHECK(std::abs(s) == Catch::Approx(1.0).epsilon(1e-12));

    const BitBlock odd = {1, 0, 1};
    CHECK_THROWS_AS(map_bits_to_qpsk(odd), std::invalid_argument);
}

TEST_CASE("hard demapping decides by quadrant and inverts the mapping") {
    CHECK(demap_qpsk_hard({cplx{0.7071, 0.7071}}) == BitBlock{0, 0});
    CHECK(demap_qpsk_hard({cplx{-0.2, 0.9}}) == BitBlock{1, 0});

    Rng rng(11);
    const auto bits = random_bits(10000, rng);
    CHECK(demap_qpsk_hard(map_bits_to_qpsk(bits)) == bits);
}

TEST_CASE("gray property: adjacent constellation points differ in one bit") {
    // Walk the four points in angular order.
    const std::vector<BitBlock> order = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& a = order[i];
        const auto& b = order[(i + 1) % order.size()];
        const int diff = (a[0] != b[0]) + (a[1] != b[1]);
        CHECK(diff == 1);
        // Confirm angular adjacency: 90 degrees apart.
        const auto sa = map_bits_to_qpsk(a)[0];
        const auto sb = map_bits_to_qpsk(b)[0];
        CHECK(std::abs(sa - sb) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("pilot layout partitions the grid with unit-magnitude pilots") {
    for (std::size_t pf : {std::size_t{2}, std::size_t{4}, std::size_t{8}}) {
        const auto cfg = make_ofdm_config(pf);
        validate(cfg);
        const auto layout = make_pilot_layout(cfg);
        REQUIRE(layout.pilot_indices.size() == cfg.n_pilots);
        REQUIRE(layout.data_indices.size() + layout.pilot_indices.size() == cfg.n_sub);
        for (std::size_t i = 0; i < layout.pilot_indices.size(); ++i) {
            CHECK(layout.pilot_indices[i] == i * pf);
            CHECK(std::abs(std::abs(layout.pilot_symbols[i]) - 1.0) < 1e-12);
        }
        // Partition: every index appears in exactly one of the two sets.
        std::vector<int> seen(cfg.n_sub, 0);
        for (auto k : layout.pilot_indices) seen[k]++;
        for (auto k : layout.data_indices) seen[k]++;
        for (auto c : seen) CHECK(c == 1);
    }
}

TEST_CASE("pilot density arithmetic matches the data/bit widths") {
    const std::size_t expect_data[3] = {32, 48, 56};
    const std::size_t expect_bits[3] = {64, 96, 112};
    const std::size_t spacings[3] = {2, 4, 8};
    for (int i = 0; i < 3; ++i) {
        const auto cfg = make_ofdm_config(spacings[i]);
        CHECK(cfg.n_data() == expect_data[i]);
        CHECK(cfg.bits_per_symbol() == expect_bits[i]);
    }
}

TEST_CASE("build_grid interleaves pilots and data") {
    const auto cfg = make_ofdm_config(8);
    const auto layout = make_pilot_layout(cfg);
    REQUIRE(layout.data_indices.size() == 56);

    Rng rng(3);
    const auto data = map_bits_to_qpsk(random_bits(cfg.bits_per_symbol(), rng));
    const auto grid = build_grid(data, layout);
    for (std::size_t i = 0; i < layout.pilot_indices.size(); ++i)
        CHECK(grid.x[layout.pilot_indices[i]] == layout.pilot_symbols[i]);
    for (std::size_t i = 0; i < layout.data_indices.size(); ++i)
        CHECK(grid.x[layout.data_indices[i]] == data[i]);

    const auto cfg2 = make_ofdm_config(2);
    const auto layout2 = make_pilot_layout(cfg2);
    CHECK(layout2.pilot_indices.size() == 32);
    for (auto k : layout2.pilot_indices) CHECK(k % 2 == 0);

    CHECK_THROWS_AS(build_grid(cvec(10), layout), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(cvec{}, PilotLayout{}), std::invalid_argument);
    CHECK_THROWS_AS(make_ofdm_config(0), std::invalid_argument);
}

TEST_CASE("unitary FFT matches the direct DFT oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        const auto a = random_grid(rng, 64);
        const auto via_fft = fft_unitary(a, false);
        const auto via_dft = oracle::dft_direct(a, false);
        CHECK(max_abs_diff(via_fft, via_dft) < 1e-9);
        const auto inv_fft = fft_unitary(a, true);
        const auto inv_dft = oracle::dft_direct(a, true);
        CHECK(max_abs_diff(inv_fft, inv_dft) < 1e-9);
    }
}

TEST_CASE("ofdm_modulate: impulse, CP structure, Parseval") {
    const auto cfg = make_ofdm_config(8);

    ModulatedGrid ones;
    ones.x.assign(64, cplx{1.0, 0.0});
    const auto sym = ofdm_modulate(ones, cfg);
    REQUIRE(sym.samples_cp.size() == 80);
    CHECK(std::abs(sym.samples_cp[16] - cplx{8.0, 0.0}) < 1e-9);  // sqrt(64) at sample 0
    for (std::size_t n = 17; n < 80; ++n) CHECK(std::abs(sym.samples_cp[n]) < 1e-9);

    Rng rng(17);
    for (int trial = 0; trial < 4; ++trial) {
        ModulatedGrid g{random_grid(rng, 64)};
        const auto s = ofdm_modulate(g, cfg);
        for (std::size_t n = 0; n < cfg.n_cp; ++n)
            CHECK(std::abs(s.samples_cp[n] - s.samples_cp[n + 64]) < 1e-12);

        double grid_e = 0.0, body_e = 0.0;
        for (const auto& x : g.x) grid_e += std::norm(x);
        for (std::size_t n = cfg.n_cp; n < s.samples_cp.size(); ++n)
            body_e += std::norm(s.samples_cp[n]);
        CHECK(body_e == Catch::Approx(grid_e).epsilon(1e-9));
    }
}

TEST_CASE("ofdm round trip is the identity") {
    const auto cfg = make_ofdm_config(4);
    Rng rng(23);
    for (int trial = 0; trial < 8; ++trial) {
        ModulatedGrid g{random_grid(rng, 64)};
        const auto s = ofdm_modulate(g, cfg);
        const auto y = ofdm_demodulate(s.samples_cp, cfg);
        CHECK(max_abs_diff(y, g.x) < 1e-9);
    }
}

TEST_CASE("integer delay within the CP becomes a per-subcarrier phase ramp") {
    const auto cfg = make_ofdm_config(8);
    Rng rng(29);
    const auto grid = random_grid(rng, 64);
    const auto sym = ofdm_modulate(ModulatedGrid{grid}, cfg);

    for (std::size_t d : {std::size_t{1}, std::size_t{5}, std::size_t{16}}) {
        cvec rx(sym.samples_cp.size() + d, cplx{});
        for (std::size_t n = 0; n < sym.samples_cp.size(); ++n) rx[n + d] = sym.samples_cp[n];
        const auto y = ofdm_demodulate(rx, cfg);

        // Independent oracle: direct DFT of the circularly delayed body.
        cvec body(sym.samples_cp.begin() + 16, sym.samples_cp.end());
        cvec shifted(64);
        for (std::size_t n = 0; n < 64; ++n) shifted[n] = body[(n + 64 - d) % 64];
        const auto expect = oracle::dft_direct(shifted, false);
        CHECK(max_abs_diff(y, expect) < 1e-9);

        // Shift theorem: Y_k = X_k * exp(-j 2 pi k d / 64).
        for (std::size_t k = 0; k < 64; ++k) {
            const double ang = -2.0 * oracle::kPi * static_cast<double>(k * d) / 64.0;
            const cplx ramp{std::cos(ang), std::sin(ang)};
            CHECK(std::abs(y[k] - grid[k] * ramp) < 1e-9);
        }
    }
}

TEST_CASE("demodulating a short input is rejected") {
    const auto cfg = make_ofdm_config(8);
    cvec short_rx(79);
    CHECK_THROWS_AS(ofdm_demodulate(short_rx, cfg), std::invalid_argument);
}

TEST_CASE("config validation enforces the fixed numerology") {
    auto cfg = make_ofdm_config(8);
    CHECK_NOTHROW(validate(cfg));
    CHECK(cfg.cp_duration() == Catch::Approx(16.67e-6).epsilon(0.01));

    auto bad = cfg;
    bad.n_fft = 128;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.pilot_spacing = 3;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.n_pilots = 9;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}
