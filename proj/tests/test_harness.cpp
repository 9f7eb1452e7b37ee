#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "unidnn/harness.hpp"

using namespace unidnn;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path tmp_file(const std::string& name) { return fs::temp_directory_path() / name; }

// Desk-scale scenario used by the sweep tests: small dataset, short training.
ScenarioConfig tiny_scenario() {
    ScenarioConfig scn;
    scn.m = 3000;
    scn.epochs = 12;
    scn.n_hid = 32;
    scn.batch_size = 500;
    scn.seed = 71;
    scn.snr_list = {0.0, 10.0, 20.0};
    scn.min_errors = 10;
    scn.bit_budget = 300000;
    scn.min_bits = 50000;
    scn.threads = 2;
    return scn;
}

PgmImage make_test_image(std::size_t w, std::size_t h) {
    PgmImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            img.pixels[r * w + c] = static_cast<std::uint8_t>((r * 13 + c * 7) % 256);
    return img;
}

}  // namespace

TEST_CASE("scenario JSON: fast profile, overrides, errors") {
    nlohmann::json j = {
        {"profile", "fast"},
        {"classes", {"Rician"}},
        {"snr_policy", {{"kind", "fixed"}, {"snr_db", 20.0}}},
        {"n_p", 16},
        {"archs", {"Single", "UniC"}},
        {"seed", 99},
    };
    ScenarioConfig scn;
    scenario_from_json(j, scn);
    CHECK(scn.m == 20000);       // fast profile
    CHECK(scn.epochs == 150);
    CHECK(scn.n_hid == 256);
    CHECK(scn.n_p == 16);
    CHECK(scn.seed == 99);
    REQUIRE(scn.classes.size() == 1);
    CHECK(scn.classes[0] == ChannelClass::Rician);
    CHECK(scn.snr_policy.kind == SnrPolicy::Kind::Fixed);
    CHECK(scn.snr_policy.lo == 20.0);
    REQUIRE(scn.archs.size() == 2);
    CHECK(scn.archs[0] == Arch::Single);
    CHECK(scn.archs[1] == Arch::UniC);

    nlohmann::json bad = {{"snr_policy", {{"kind", "gauss"}}}};
    ScenarioConfig s2;
    CHECK_THROWS_AS(scenario_from_json(bad, s2), std::invalid_argument);

    ScenarioConfig badnp;
    badnp.n_p = 7;
    CHECK_THROWS_AS(badnp.ofdm(), std::invalid_argument);
}

TEST_CASE("dataset generation: widths, single-class labels, determinism") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::AwgnOnly};
    scn.m = 64;
    scn.n_p = 8;
    scn.seed = 5;
    scn.snr_policy = SnrPolicy::fixed(10.0);

    const auto ds = generate_dataset(scn);
    ds.check_consistent();
    CHECK(ds.features.row_width() == 128);
    CHECK(ds.labels.row_width() == 112);  // N_p = 8
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.class_onehot.at(i, static_cast<std::size_t>(ChannelClass::AwgnOnly)) == 1.0);
        CHECK(ds.snr_db[i] == 10.0);
    }

    // Same seed, byte-identical file.
    const auto p1 = tmp_file("unidnn_ds1.bin"), p2 = tmp_file("unidnn_ds2.bin");
    save_dataset(ds, p1.string());
    save_dataset(generate_dataset(scn), p2.string());
    CHECK(slurp(p1.string()) == slurp(p2.string()));

    // Round trip restores every field.
    const auto loaded = load_dataset(p1.string());
    CHECK(loaded.n_p == ds.n_p);
    CHECK(loaded.policy.kind == ds.policy.kind);
    CHECK(loaded.features.data == ds.features.data);
    CHECK(loaded.labels.data == ds.labels.data);
    CHECK(loaded.class_onehot.data == ds.class_onehot.data);
    CHECK(loaded.snr_db == ds.snr_db);
    fs::remove(p1);
    fs::remove(p2);

    // Label widths track the pilot density.
    scn.n_p = 16;
    CHECK(generate_dataset(scn).labels.row_width() == 96);
    scn.n_p = 32;
    CHECK(generate_dataset(scn).labels.row_width() == 64);
}

TEST_CASE("sweep covers all method tags with sane orderings") {
    ScenarioConfig scn = tiny_scenario();
    scn.classes = {ChannelClass::Rayleigh, ChannelClass::Rician, ChannelClass::TdlA,
                   ChannelClass::Winner2, ChannelClass::AwgnOnly};
    scn.archs = {Arch::Multi, Arch::UniA, Arch::UniB, Arch::UniC};

    const auto ds = generate_dataset(scn);
    const auto bundles = train_scenario(scn, ds);

    // Single trains on a one-class scenario.
    ScenarioConfig single_scn = scn;
    single_scn.classes = {ChannelClass::Rician};
    single_scn.archs = {Arch::Single};
    const auto single_ds = generate_dataset(single_scn);
    auto single_bundles = train_scenario(single_scn, single_ds);

    BundleMap all = bundles;
    all.emplace(Arch::Single, std::move(single_bundles.at(Arch::Single)));

    ScenarioConfig sweep_scn = scn;
    sweep_scn.classes = {ChannelClass::Rician};
    sweep_scn.methods = {Method::True,  Method::LS,    Method::MMSE_perfect,
                         Method::MMSE_nonperfect, Method::Single, Method::Multi,
                         Method::UniA,  Method::UniB,  Method::UniC};
    const auto curves = run_ber_sweep(sweep_scn, all);
    REQUIRE(curves.size() == 9);

    std::map<std::string, const BerCurve*> by_method;
    for (const auto& c : curves) by_method[method_name(c.method)] = &c;
    REQUIRE(by_method.size() == 9);

    // Estimation cannot beat the true channel (paired evaluation makes the
    // comparison deterministic per seed).
    for (std::size_t s = 0; s < sweep_scn.snr_list.size(); ++s) {
        CHECK(by_method["LS"]->points[s].ber >= by_method["True"]->points[s].ber);
    }
    // Curves do not increase with SNR beyond Monte-Carlo noise (binomial
    // 3-sigma bound on the difference of paired points).
    for (const auto& c : curves)
        for (std::size_t s = 1; s < c.points.size(); ++s) {
            const auto& prev = c.points[s - 1];
            const auto& cur = c.points[s];
            const double p = std::max(prev.ber, cur.ber);
            const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) /
                                           static_cast<double>(std::min(prev.bits, cur.bits)));
            CHECK(cur.ber <= prev.ber + 3.0 * sigma + 1e-9);
        }
}

TEST_CASE("sweep on the identity channel tracks the analytic QPSK curve") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::AwgnOnly};
    scn.methods = {Method::True};
    scn.snr_list = {4.0};
    scn.seed = 72;
    scn.min_bits = 200000;
    scn.bit_budget = 300000;
    scn.threads = 1;
    const auto curves = run_ber_sweep(scn, {});
    const double expect = oracle::qpsk_awgn_ber(4.0);
    CHECK(curves[0].points[0].ber == Catch::Approx(expect).epsilon(0.10));
}

TEST_CASE("budget-limited points are flagged as bounds") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::AwgnOnly};
    scn.methods = {Method::True};
    scn.snr_list = {20.0};  // BER ~ 1e-24: no errors within any budget
    scn.min_errors = 10;
    scn.bit_budget = 5000;
    scn.min_bits = 0;
    scn.threads = 1;
    const auto curves = run_ber_sweep(scn, {});
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].points[0].bound);
    CHECK(curves[0].points[0].errors < 10);
    CHECK(curves[0].points[0].bits >= 5000);
}

TEST_CASE("missing neural checkpoints are reported by method name") {
    ScenarioConfig scn;
    scn.methods = {Method::UniC};
    CHECK_THROWS_WITH(run_ber_sweep(scn, {}),
                      Catch::Matchers::ContainsSubstring("UniC"));
    const auto dir = tmp_file("unidnn_empty_models");
    fs::create_directories(dir);
    CHECK_THROWS_WITH(load_models({Method::Multi}, dir.string(), 8),
                      Catch::Matchers::ContainsSubstring("Multi"));
    fs::remove_all(dir);
}

TEST_CASE("BER CSV format and cross-thread determinism") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::Rayleigh, ChannelClass::AwgnOnly};
    scn.methods = {Method::True, Method::LS};
    scn.snr_list = {0.0, 10.0};
    scn.seed = 73;
    scn.min_bits = 20000;
    scn.bit_budget = 100000;
    scn.sweep_mixture = true;

    scn.threads = 1;
    const auto c1 = run_ber_sweep(scn, {});
    scn.threads = 2;
    const auto c2 = run_ber_sweep(scn, {});

    const auto p1 = tmp_file("unidnn_ber1.csv"), p2 = tmp_file("unidnn_ber2.csv");
    write_ber_csv(c1, p1.string());
    write_ber_csv(c2, p2.string());
    const std::string s1 = slurp(p1.string());
    CHECK(s1 == slurp(p2.string()));
    CHECK(s1.rfind("method,channel,np,snr_db,ber,bits\n", 0) == 0);
    // Mixture rows are present.
    CHECK(s1.find("True,Mixed,8,") != std::string::npos);
    CHECK(s1.find("LS,Rayleigh,8,") != std::string::npos);
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("PGM round trip and header parsing") {
    const auto img = make_test_image(24, 16);
    const auto path = tmp_file("unidnn_img.pgm");
    write_pgm(img, path.string());
    const auto loaded = read_pgm(path.string());
    CHECK(loaded.width == img.width);
    CHECK(loaded.height == img.height);
    CHECK(loaded.pixels == img.pixels);
    fs::remove(path);

    CHECK_THROWS_AS(read_pgm("/nonexistent.pgm"), std::runtime_error);
}

TEST_CASE("image demo: noiseless truth is exact, low-SNR LS is not") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::AwgnOnly};
    scn.seed = 74;
    const auto img = make_test_image(32, 24);

    const auto clean = run_image_demo(scn, {}, Method::True, 300.0, img);
    CHECK(clean.ber == 0.0);
    CHECK(clean.payload_bits == 32 * 24 * 8);
    CHECK(clean.image.pixels == img.pixels);

    ScenarioConfig fading = scn;
    fading.classes = {ChannelClass::Rayleigh};
    const auto noisy = run_image_demo(fading, {}, Method::LS, 0.0, fading.classes.empty()
                                                                      ? img
                                                                      : img);
    CHECK(noisy.ber > 0.0);
    CHECK(noisy.image.pixels != img.pixels);
}

TEST_CASE("timing report: LS baseline ratio and run-to-run stability") {
    ScenarioConfig scn;
    scn.classes = {ChannelClass::Rayleigh};
    scn.methods = {Method::LS, Method::MMSE_perfect, Method::True};
    scn.snr_policy = SnrPolicy::fixed(20.0);
    scn.seed = 75;
    scn.m_h = 200;

    const auto r1 = run_timing(scn, {}, 64);
    const auto r2 = run_timing(scn, {}, 64);
    REQUIRE(r1.rows.size() == 3);
    CHECK(r1.rows[0].method == Method::LS);
    CHECK(r1.rows[0].ratio_to_ls == 1.0);
    for (std::size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].sec_per_symbol > 0.0);
        const double ratio = r1.rows[i].ratio_to_ls / r2.rows[i].ratio_to_ls;
        CHECK(ratio < 3.0);
        CHECK(ratio > 1.0 / 3.0);
    }

    const auto path = tmp_file("unidnn_timing.csv");
    write_timing_csv(r1, path.string());
    CHECK(slurp(path.string()).rfind("method,sec_per_symbol,ratio_to_ls\n", 0) == 0);
    fs::remove(path);
}

TEST_CASE("classifier evaluation emits row-normalized confusion CSVs") {
    ScenarioConfig scn = tiny_scenario();
    scn.archs = {Arch::UniA};
    scn.m = 8000;
    scn.epochs = 40;
    scn.n_hid = 64;
    scn.eval_m = 1000;
    scn.snr_list = {0.0, 20.0};
    const auto ds = generate_dataset(scn);
    const auto bundles = train_scenario(scn, ds);

    const auto rows = run_classifier_eval(scn, bundles.at(Arch::UniA));
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        for (std::size_t r = 0; r < kNumChannelClasses; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < kNumChannelClasses; ++c)
                sum += row.matrix[r * kNumChannelClasses + c];
            CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
        }
        CHECK(row.accuracy >= 0.0);
        CHECK(row.accuracy <= 1.0);
    }

    // At low SNR the two channels with overlapping frequency signatures get
    // confused with each other more than with the LOS class.
    const auto idx = [](ChannelClass r, ChannelClass c) {
        return static_cast<std::size_t>(r) * kNumChannelClasses + static_cast<std::size_t>(c);
    };
    const auto& at0 = rows[0].matrix;
    CHECK(at0[idx(ChannelClass::TdlA, ChannelClass::Winner2)] >
          at0[idx(ChannelClass::TdlA, ChannelClass::Rician)]);
    // The LOS structure keeps Rician recognizable at both ends of the range.
    const double rician0 = rows[0].matrix[idx(ChannelClass::Rician, ChannelClass::Rician)];
    const double rician20 = rows[1].matrix[idx(ChannelClass::Rician, ChannelClass::Rician)];
    CHECK(rician20 > rician0 - 0.1);

    const auto cpath = tmp_file("unidnn_conf.csv"), apath = tmp_file("unidnn_acc.csv");
    write_confusion_csv(rows, cpath.string());
    write_accuracy_csv(rows, apath.string());
    const std::string conf = slurp(cpath.string());
    CHECK(conf.rfind("snr_db,true_class,Rayleigh,Rician,TdlA,Winner2,AwgnOnly\n", 0) == 0);
    CHECK(slurp(apath.string()).rfind("snr_db,accuracy\n", 0) == 0);
    fs::remove(cpath);
    fs::remove(apath);
}

TEST_CASE("trained bundles save to and load from a models directory") {
    ScenarioConfig scn = tiny_scenario();
    scn.archs = {Arch::Multi};
    scn.epochs = 4;
    const auto ds = generate_dataset(scn);
    const auto bundles = train_scenario(scn, ds);

    const auto dir = tmp_file("unidnn_models_dir");
    save_models(bundles, dir.string(), scn.n_p);
    const auto loaded = load_models({Method::Multi}, dir.string(), scn.n_p);
    REQUIRE(loaded.count(Arch::Multi) == 1);

    Rng rng(76);
    cvec y(64);
    for (auto& v : y) v = rng.cgaussian();
    CHECK(infer(loaded.at(Arch::Multi), y).bits == infer(bundles.at(Arch::Multi), y).bits);
    fs::remove_all(dir);
}
