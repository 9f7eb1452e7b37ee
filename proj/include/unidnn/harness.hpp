// End-to-end orchestration: scenario configuration, dataset generation,
// training runs, BER-vs-SNR sweeps, classifier evaluation, the image
// transmission demo, the timing benchmark, and CSV/PGM emission.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "unidnn/dataset.hpp"
#include "unidnn/estimators.hpp"
#include "unidnn/models.hpp"

namespace unidnn {

// ---------------------------------------------------------------------------
// Method tags

enum class Method { True, LS, MMSE_perfect, MMSE_nonperfect, Single, Multi, UniA, UniB, UniC };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::True: return "True";
        case Method::LS: return "LS";
        case Method::MMSE_perfect: return "MMSE_perfect";
        case Method::MMSE_nonperfect: return "MMSE_nonperfect";
        case Method::Single: return "Single";
        case Method::Multi: return "Multi";
        case Method::UniA: return "UniA";
        case Method::UniB: return "UniB";
        case Method::UniC: return "UniC";
    }
    return "?";
}

inline Method method_from_name(const std::string& s) {
    for (int i = 0; i <= 8; ++i) {
        const Method m = static_cast<Method>(i);
        if (s == method_name(m)) return m;
    }
    throw std::invalid_argument("unknown method: " + s);
}

inline bool method_is_neural(Method m) {
    return m == Method::Single || m == Method::Multi || m == Method::UniA || m == Method::UniB ||
           m == Method::UniC;
}

inline Arch method_arch(Method m) {
    switch (m) {
        case Method::Single: return Arch::Single;
        case Method::Multi: return Arch::Multi;
        case Method::UniA: return Arch::UniA;
        case Method::UniB: return Arch::UniB;
        case Method::UniC: return Arch::UniC;
        default: throw std::invalid_argument("method has no architecture");
    }
}

// ---------------------------------------------------------------------------
// Scenario configuration

struct ScenarioConfig {
    std::vector<ChannelClass> classes = {ChannelClass::Rayleigh, ChannelClass::Rician,
                                         ChannelClass::TdlA, ChannelClass::Winner2,
                                         ChannelClass::AwgnOnly};
    SnrPolicy snr_policy = SnrPolicy::uniform(0.0, 20.0);
    std::size_t n_p = 8;
    std::size_t m = 100000;
    std::uint64_t seed = 1;
    std::size_t n_hid = 512;
    std::size_t epochs = 700;
    std::vector<Arch> archs = {Arch::Multi, Arch::UniA, Arch::UniB, Arch::UniC};

    double learning_rate = 0.001;
    double l2 = 2e-6;
    double dropout = 0.01;
    std::size_t batch_size = 3000;
    std::uint64_t pilot_seed = 2024;
    Routing routing = Routing::Hard;
    std::size_t conv_kernel = 1;
    bool use_ground_truth_labels = false;

    std::vector<double> snr_list = {0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<Method> methods = {Method::True, Method::LS, Method::MMSE_perfect,
                                   Method::MMSE_nonperfect};
    std::size_t min_errors = 10;
    std::uint64_t bit_budget = 10000000;  // per point
    std::uint64_t min_bits = 0;
    bool sweep_mixture = false;  // additionally evaluate the class mixture
    std::size_t m_h = 1000;      // correlation estimation draws
    std::size_t threads = 0;     // 0 = hardware concurrency
    std::size_t eval_m = 2000;   // classifier evaluation samples per SNR

    OfdmConfig ofdm() const {
        require(n_p == 8 || n_p == 16 || n_p == 32, "scenario: n_p must be one of {8,16,32}");
        return make_ofdm_config(64 / n_p, pilot_seed);
    }
};

// The CI-sized profile: smaller dataset, fewer epochs, narrower hidden layer.
inline void apply_fast_profile(ScenarioConfig& scn) {
    scn.m = 20000;
    scn.epochs = 150;
    scn.n_hid = 256;
}

inline void scenario_from_json(const nlohmann::json& j, ScenarioConfig& scn) {
    if (j.contains("profile") && j.at("profile").get<std::string>() == "fast")
        apply_fast_profile(scn);
    if (j.contains("classes")) {
        scn.classes.clear();
        for (const auto& c : j.at("classes")) scn.classes.push_back(channel_class_from_name(c));
    }
    if (j.contains("snr_policy")) {
        const auto& p = j.at("snr_policy");
        const std::string kind = p.at("kind").get<std::string>();
        if (kind == "fixed") {
            scn.snr_policy = SnrPolicy::fixed(p.at("snr_db").get<double>());
        } else if (kind == "uniform") {
            scn.snr_policy = SnrPolicy::uniform(p.value("lo", 0.0), p.value("hi", 20.0));
        } else {
            throw std::invalid_argument("snr_policy kind must be fixed or uniform");
        }
    }
    if (j.contains("n_p")) scn.n_p = j.at("n_p").get<std::size_t>();
    if (j.contains("m")) scn.m = j.at("m").get<std::size_t>();
    if (j.contains("seed")) scn.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_hid")) scn.n_hid = j.at("n_hid").get<std::size_t>();
    if (j.contains("epochs")) scn.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("archs")) {
        scn.archs.clear();
        for (const auto& a : j.at("archs")) scn.archs.push_back(arch_from_name(a));
    }
    if (j.contains("learning_rate")) scn.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("l2")) scn.l2 = j.at("l2").get<double>();
    if (j.contains("dropout")) scn.dropout = j.at("dropout").get<double>();
    if (j.contains("batch_size")) scn.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("pilot_seed")) scn.pilot_seed = j.at("pilot_seed").get<std::uint64_t>();
    if (j.contains("routing")) scn.routing = routing_from_name(j.at("routing"));
    if (j.contains("conv_kernel")) scn.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    if (j.contains("use_ground_truth_labels"))
        scn.use_ground_truth_labels = j.at("use_ground_truth_labels").get<bool>();
    if (j.contains("snr_list")) scn.snr_list = j.at("snr_list").get<std::vector<double>>();
    if (j.contains("methods")) {
        scn.methods.clear();
        for (const auto& m : j.at("methods")) scn.methods.push_back(method_from_name(m));
    }
    if (j.contains("min_errors")) scn.min_errors = j.at("min_errors").get<std::size_t>();
    if (j.contains("bit_budget")) scn.bit_budget = j.at("bit_budget").get<std::uint64_t>();
    if (j.contains("min_bits")) scn.min_bits = j.at("min_bits").get<std::uint64_t>();
    if (j.contains("sweep_mixture")) scn.sweep_mixture = j.at("sweep_mixture").get<bool>();
    if (j.contains("m_h")) scn.m_h = j.at("m_h").get<std::size_t>();
    if (j.contains("threads")) scn.threads = j.at("threads").get<std::size_t>();
    if (j.contains("eval_m")) scn.eval_m = j.at("eval_m").get<std::size_t>();
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_scenario: cannot open " + path);
    nlohmann::json j;
    is >> j;
    ScenarioConfig scn;
    scenario_from_json(j, scn);
    return scn;
}

// ---------------------------------------------------------------------------
// Dataset generation

inline double draw_snr(const SnrPolicy& policy, Rng& rng) {
    return policy.kind == SnrPolicy::Kind::Fixed ? policy.lo : rng.uniform(policy.lo, policy.hi);
}

// One row per OFDM symbol: uniform class draw, fresh channel and bits, SNR
// per policy, features are the received subcarriers split into re/im.
inline LabeledDataset generate_dataset(const ScenarioConfig& scn) {
    const OfdmConfig cfg = scn.ofdm();
    const PilotLayout layout = make_pilot_layout(cfg);
    require(!scn.classes.empty(), "generate_dataset: no channel classes");

    LabeledDataset ds;
    ds.n_p = scn.n_p;
    ds.policy = scn.snr_policy;
    ds.features = Tensor({scn.m, 2 * cfg.n_sub});
    ds.labels = Tensor({scn.m, cfg.bits_per_symbol()});
    ds.class_onehot = Tensor({scn.m, kNumChannelClasses});
    ds.snr_db.resize(scn.m);

    Rng rng(scn.seed);
    for (std::size_t i = 0; i < scn.m; ++i) {
        const ChannelClass cls = scn.classes[rng.index(scn.classes.size())];
        const NoiseSpec noise{draw_snr(scn.snr_policy, rng)};
        const auto bits = random_bits(cfg.bits_per_symbol(), rng);
        const auto grid = build_grid(map_bits_to_qpsk(bits), layout);
        const auto chan = draw_channel(cls, cfg, rng);
        const auto y = apply_channel(grid, chan, noise, cfg, rng);
        const auto f = featurize(y);
        std::copy(f.begin(), f.end(), ds.features.data.begin() + i * f.size());
        for (std::size_t b = 0; b < bits.size(); ++b)
            ds.labels.at(i, b) = static_cast<double>(bits[b]);
        ds.class_onehot.at(i, static_cast<std::size_t>(cls)) = 1.0;
        ds.snr_db[i] = noise.snr_db;
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Training orchestration

using BundleMap = std::map<Arch, NetworkBundle>;

inline std::string bundle_prefix(const std::string& dir, Arch arch, std::size_t n_p) {
    return dir + "/" + arch_name(arch) + "_np" + std::to_string(n_p);
}

// Trains every architecture in the scenario on the dataset. The classifier
// is trained once (its seed and data do not depend on the detector
// architecture) and shared by the cascaded bundles; each detector then
// trains on inputs assembled from the classifier's predictions, or from
// ground-truth labels when configured.
inline BundleMap train_scenario(const ScenarioConfig& scn, const LabeledDataset& ds,
                                std::ostream* log = nullptr) {
    require(ds.labels.row_width() == 2 * (64 - scn.n_p), "train_scenario: dataset/pilot mismatch");

    TrainConfig base;
    base.learning_rate = scn.learning_rate;
    base.l2 = scn.l2;
    base.batch_size = std::min(scn.batch_size, (ds.size() * 7) / 10);
    base.epochs = scn.epochs;

    ModelConfig mcfg;
    mcfg.n_hid = scn.n_hid;
    mcfg.n_out = ds.labels.row_width();
    mcfg.drop_rate = scn.dropout;
    mcfg.conv_kernel = scn.conv_kernel;
    mcfg.routing = scn.routing;

    const bool wants_classifier = std::any_of(scn.archs.begin(), scn.archs.end(),
                                              [](Arch a) { return arch_uses_classifier(a); });
    Network shared_classifier;
    Tensor detector_class = ds.class_onehot;
    if (wants_classifier) {
        ModelConfig ccfg = mcfg;
        ccfg.init_seed = splitmix64(scn.seed ^ 0xC1A55F1E5ull);
        NetworkBundle probe = build_detector(Arch::UniA, ccfg);
        TrainConfig clf_cfg = base;
        clf_cfg.loss = LossKind::CrossEntropy;
        clf_cfg.seed = splitmix64(scn.seed ^ 0x5747A6E1ull);
        if (log) *log << "training classifier (" << scn.n_hid << " hidden)...\n";
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = train(probe.classifier, ds.features, ds.class_onehot, clf_cfg);
        if (log)
            *log << "  val loss " << rep.best_val_loss << " (epoch " << rep.best_epoch << ") in "
                 << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                 << " s\n";
        shared_classifier = probe.classifier;
        if (!scn.use_ground_truth_labels)
            detector_class = predict(shared_classifier, ds.features);
    }

    BundleMap bundles;
    for (Arch arch : scn.archs) {
        if (arch == Arch::Single)
            require(scn.classes.size() == 1,
                    "train_scenario: the Single baseline expects a single-class scenario");
        ModelConfig acfg = mcfg;
        acfg.init_seed = splitmix64(scn.seed ^ (0xA0C0 + static_cast<std::uint64_t>(arch)));
        NetworkBundle bundle = build_detector(arch, acfg);
        if (arch_uses_classifier(arch)) bundle.classifier = shared_classifier;

        const Tensor& cls_input = arch_uses_classifier(arch) ? detector_class : ds.class_onehot;
        const Tensor inputs =
            assemble_detector_inputs(arch, bundle.routing, ds.features, cls_input);
        TrainConfig det_cfg = base;
        det_cfg.loss = LossKind::Mse;
        det_cfg.seed = splitmix64(scn.seed ^ (0xDE7 + static_cast<std::uint64_t>(arch)));
        if (log) *log << "training " << arch_name(arch) << " detector...\n";
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = train(bundle.detector, inputs, ds.labels, det_cfg);
        if (log)
            *log << "  val loss " << rep.best_val_loss << ", val acc " << rep.val_acc.back()
                 << " in "
                 << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                 << " s\n";
        bundle.trained = true;
        bundles.emplace(arch, std::move(bundle));
    }
    return bundles;
}

inline void save_models(const BundleMap& bundles, const std::string& dir, std::size_t n_p) {
    std::filesystem::create_directories(dir);
    for (const auto& [arch, bundle] : bundles) save_bundle(bundle, bundle_prefix(dir, arch, n_p));
}

inline BundleMap load_models(const std::vector<Method>& methods, const std::string& dir,
                             std::size_t n_p) {
    BundleMap bundles;
    for (Method m : methods) {
        if (!method_is_neural(m)) continue;
        const Arch arch = method_arch(m);
        const std::string prefix = bundle_prefix(dir, arch, n_p);
        if (!std::filesystem::exists(prefix + ".manifest"))
            throw std::invalid_argument("missing trained bundle for method " +
                                        std::string(method_name(m)) + ": " + prefix +
                                        ".manifest");
        bundles.emplace(arch, load_bundle(prefix));
    }
    return bundles;
}

// ---------------------------------------------------------------------------
// Receiver paths

struct PointCorrelations {
    Eigen::MatrixXcd r_hh, r_lsls;
};

// Correlation matrices for a class set: single class uses the class draw
// directly; a mixture averages the per-class estimates (uniform class
// weights).
inline PointCorrelations estimate_point_correlations(const std::vector<ChannelClass>& classes,
                                                     const OfdmConfig& cfg,
                                                     const PilotLayout& layout, std::size_t m_h,
                                                     const NoiseSpec& noise, Rng& rng) {
    PointCorrelations corr;
    const auto np = static_cast<Eigen::Index>(layout.pilot_indices.size());
    corr.r_hh = Eigen::MatrixXcd::Zero(np, np);
    corr.r_lsls = Eigen::MatrixXcd::Zero(np, np);
    for (ChannelClass cls : classes) {
        const auto [r_hh, r_lsls] = estimate_correlation(cls, cfg, layout, m_h, noise, rng);
        corr.r_hh += r_hh;
        corr.r_lsls += r_lsls;
    }
    corr.r_hh /= static_cast<double>(classes.size());
    corr.r_lsls /= static_cast<double>(classes.size());
    return corr;
}

inline BitBlock decode_conventional(Method method, const cvec& y, const cvec& true_cfr,
                                    const PilotLayout& layout, const PointCorrelations& corr,
                                    const NoiseSpec& noise) {
    ChannelEstimate est;
    switch (method) {
        case Method::True:
            est.h_hat = true_cfr;
            est.method = EstimatorMethod::True;
            break;
        case Method::LS: {
            cvec y_p(layout.pilot_indices.size());
            for (std::size_t i = 0; i < y_p.size(); ++i) y_p[i] = y[layout.pilot_indices[i]];
            est = interpolate_estimate(ls_estimate(y_p, layout.pilot_symbols), layout,
                                       EstimatorMethod::LS);
            break;
        }
        case Method::MMSE_perfect:
        case Method::MMSE_nonperfect: {
            cvec y_p(layout.pilot_indices.size());
            for (std::size_t i = 0; i < y_p.size(); ++i) y_p[i] = y[layout.pilot_indices[i]];
            const auto h_ls = ls_estimate(y_p, layout.pilot_symbols);
            const bool perfect = method == Method::MMSE_perfect;
            const auto variant =
                perfect ? EstimatorMethod::MMSE_perfect : EstimatorMethod::MMSE_nonperfect;
            const auto smoothed =
                mmse_estimate(h_ls, perfect ? corr.r_hh : corr.r_lsls, noise, variant);
            est = interpolate_estimate(smoothed, layout, variant);
            break;
        }
        default:
            throw std::invalid_argument("decode_conventional: not a conventional method");
    }
    return ml_detect(y, est, layout).bits;
}

// ---------------------------------------------------------------------------
// BER sweep

struct BerPoint {
    double snr_db = 0.0;
    double ber = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    bool bound = false;  // budget exhausted before min_errors
};

struct BerCurve {
    Method method;
    std::string channel;
    std::size_t n_p;
    std::vector<BerPoint> points;
};

struct SweepChannel {
    std::string label;
    std::vector<ChannelClass> classes;
};

inline std::vector<SweepChannel> sweep_channels(const ScenarioConfig& scn) {
    std::vector<SweepChannel> out;
    for (ChannelClass c : scn.classes) out.push_back({channel_class_name(c), {c}});
    if (scn.sweep_mixture && scn.classes.size() > 1) out.push_back({"Mixed", scn.classes});
    return out;
}

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
    if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
        });
    for (auto& w : workers) w.join();
}

}  // namespace detail

// Paired Monte-Carlo evaluation of every requested method on one
// (channel, SNR) point: all methods decode the same received symbols, which
// makes method orderings much tighter than independent streams. Simulation
// continues until every method has min_errors bit errors (or the bit budget
// runs out) and at least min_bits bits were simulated.
inline std::vector<BerPoint> run_point(const ScenarioConfig& scn, const SweepChannel& chan,
                                       double snr_db, const std::vector<Method>& methods,
                                       const BundleMap& bundles, Rng rng) {
    const OfdmConfig cfg = scn.ofdm();
    const PilotLayout layout = make_pilot_layout(cfg);
    const NoiseSpec noise{snr_db};

    const bool needs_corr = std::any_of(methods.begin(), methods.end(), [](Method m) {
        return m == Method::MMSE_perfect || m == Method::MMSE_nonperfect;
    });
    PointCorrelations corr;
    if (needs_corr)
        corr = estimate_point_correlations(chan.classes, cfg, layout, scn.m_h, noise, rng);

    std::vector<std::uint64_t> errors(methods.size(), 0);
    std::uint64_t bits = 0;
    const std::uint64_t bits_per_symbol = cfg.bits_per_symbol();
    while (true) {
        const ChannelClass cls = chan.classes.size() == 1
                                     ? chan.classes[0]
                                     : chan.classes[rng.index(chan.classes.size())];
        const auto tx_bits = random_bits(cfg.bits_per_symbol(), rng);
        const auto grid = build_grid(map_bits_to_qpsk(tx_bits), layout);
        const auto realization = draw_channel(cls, cfg, rng);
        const auto y = apply_channel(grid, realization, noise, cfg, rng);

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Method m = methods[mi];
            BitBlock rx = method_is_neural(m)
                              ? infer(bundles.at(method_arch(m)), y).bits
                              : decode_conventional(m, y, realization.cfr, layout, corr, noise);
            for (std::size_t b = 0; b < rx.size(); ++b) errors[mi] += rx[b] != tx_bits[b];
        }
        bits += bits_per_symbol;

        const bool all_done = std::all_of(errors.begin(), errors.end(),
                                          [&](std::uint64_t e) { return e >= scn.min_errors; });
        if (bits >= scn.min_bits && (all_done || bits >= scn.bit_budget)) break;
    }

    std::vector<BerPoint> points(methods.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        points[mi].snr_db = snr_db;
        points[mi].bits = bits;
        points[mi].errors = errors[mi];
        points[mi].ber = static_cast<double>(errors[mi]) / static_cast<double>(bits);
        points[mi].bound = errors[mi] < scn.min_errors;
    }
    return points;
}

inline std::vector<BerCurve> run_ber_sweep(const ScenarioConfig& scn, const BundleMap& bundles,
                                           std::ostream* log = nullptr) {
    for (Method m : scn.methods)
        if (method_is_neural(m) && !bundles.count(method_arch(m)))
            throw std::invalid_argument("sweep: missing trained bundle for method " +
                                        std::string(method_name(m)));

    const auto channels = sweep_channels(scn);
    struct Job {
        std::size_t chan_idx;
        std::size_t snr_idx;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < channels.size(); ++c)
        for (std::size_t s = 0; s < scn.snr_list.size(); ++s) jobs.push_back({c, s});

    std::vector<std::vector<BerPoint>> results(jobs.size());
    detail::parallel_for(jobs.size(), scn.threads, [&](std::size_t ji) {
        const Job& job = jobs[ji];
        results[ji] = run_point(scn, channels[job.chan_idx], scn.snr_list[job.snr_idx],
                                scn.methods, bundles, Rng::stream(scn.seed ^ 0xB3B5ull, ji));
    });

    // Deterministic ordered reduce: method-major, then channel, then SNR.
    std::vector<BerCurve> curves;
    for (std::size_t mi = 0; mi < scn.methods.size(); ++mi)
        for (std::size_t c = 0; c < channels.size(); ++c) {
            BerCurve curve;
            curve.method = scn.methods[mi];
            curve.channel = channels[c].label;
            curve.n_p = scn.n_p;
            for (std::size_t s = 0; s < scn.snr_list.size(); ++s) {
                const std::size_t ji = c * scn.snr_list.size() + s;
                curve.points.push_back(results[ji][mi]);
                if (log && results[ji][mi].bound)
                    *log << "note: " << method_name(curve.method) << "/" << curve.channel << " at "
                         << scn.snr_list[s] << " dB hit the bit budget with "
                         << results[ji][mi].errors << " errors; BER is an upper-bound estimate\n";
            }
            curves.push_back(std::move(curve));
        }
    return curves;
}

inline void write_ber_csv(const std::vector<BerCurve>& curves, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_ber_csv: cannot open " + path);
    os << "method,channel,np,snr_db,ber,bits\n";
    char buf[160];
    for (const auto& curve : curves)
        for (const auto& p : curve.points) {
            std::snprintf(buf, sizeof buf, "%s,%s,%zu,%g,%.10g,%llu\n", method_name(curve.method),
                          curve.channel.c_str(), curve.n_p, p.snr_db, p.ber,
                          static_cast<unsigned long long>(p.bits));
            os << buf;
        }
}

// ---------------------------------------------------------------------------
// Classifier evaluation

struct ConfusionRow {
    double snr_db;
    std::vector<double> matrix;  // 5x5 row-normalized
    double accuracy;
};

inline std::vector<ConfusionRow> run_classifier_eval(const ScenarioConfig& scn,
                                                     const NetworkBundle& bundle) {
    require(arch_uses_classifier(bundle.arch), "classifier eval: bundle has no classifier");
    const OfdmConfig cfg = scn.ofdm();
    const PilotLayout layout = make_pilot_layout(cfg);

    std::vector<ConfusionRow> rows;
    for (std::size_t si = 0; si < scn.snr_list.size(); ++si) {
        const NoiseSpec noise{scn.snr_list[si]};
        Rng rng = Rng::stream(scn.seed ^ 0xC0FFu, si);
        Tensor features({scn.eval_m, 2 * cfg.n_sub});
        Tensor class_onehot({scn.eval_m, kNumChannelClasses});
        for (std::size_t i = 0; i < scn.eval_m; ++i) {
            const ChannelClass cls = scn.classes[rng.index(scn.classes.size())];
            const auto bits = random_bits(cfg.bits_per_symbol(), rng);
            const auto grid = build_grid(map_bits_to_qpsk(bits), layout);
            const auto chan = draw_channel(cls, cfg, rng);
            const auto y = apply_channel(grid, chan, noise, cfg, rng);
            const auto f = featurize(y);
            std::copy(f.begin(), f.end(), features.data.begin() + i * f.size());
            class_onehot.at(i, static_cast<std::size_t>(cls)) = 1.0;
        }
        ConfusionRow row;
        row.snr_db = noise.snr_db;
        row.matrix = classifier_confusion(bundle, features, class_onehot);
        const Tensor probs = predict(bundle.classifier, features);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < scn.eval_m; ++i) {
            const auto truth = argmax_index(std::span(
                class_onehot.data.data() + i * kNumChannelClasses, kNumChannelClasses));
            const auto pred = argmax_index(
                std::span(probs.data.data() + i * kNumChannelClasses, kNumChannelClasses));
            correct += truth == pred;
        }
        row.accuracy = static_cast<double>(correct) / static_cast<double>(scn.eval_m);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_confusion_csv(const std::vector<ConfusionRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_confusion_csv: cannot open " + path);
    os << "snr_db,true_class";
    for (std::size_t c = 0; c < kNumChannelClasses; ++c)
        os << "," << channel_class_name(static_cast<ChannelClass>(c));
    os << "\n";
    char buf[64];
    for (const auto& row : rows)
        for (std::size_t r = 0; r < kNumChannelClasses; ++r) {
            os << row.snr_db << "," << channel_class_name(static_cast<ChannelClass>(r));
            for (std::size_t c = 0; c < kNumChannelClasses; ++c) {
                std::snprintf(buf, sizeof buf, ",%.6g", row.matrix[r * kNumChannelClasses + c]);
                os << buf;
            }
            os << "\n";
        }
}

inline void write_accuracy_csv(const std::vector<ConfusionRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_accuracy_csv: cannot open " + path);
    os << "snr_db,accuracy\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%g,%.6g\n", row.snr_db, row.accuracy);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Image demo (binary PGM, P5)

struct PgmImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, 8-bit grayscale
};

inline PgmImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("read_pgm: not a binary PGM (P5): " + path);
    auto next_token = [&is]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("read_pgm: truncated header");
    };
    PgmImage img;
    img.width = std::stoul(next_token());
    img.height = std::stoul(next_token());
    const unsigned maxval = static_cast<unsigned>(std::stoul(next_token()));
    if (maxval != 255) throw std::runtime_error("read_pgm: only maxval 255 is supported");
    is.get();  // single whitespace after the header
    img.pixels.resize(img.width * img.height);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    return img;
}

inline void write_pgm(const PgmImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

struct ImageDemoResult {
    PgmImage image;
    double ber = 0.0;
    std::uint64_t payload_bits = 0;
};

// Serializes the pixels MSB-first, chunks them into OFDM symbols (tail
// zero-padded), transmits each symbol through a fresh channel draw at the
// given SNR, decodes with the chosen method, and reassembles the image.
inline ImageDemoResult run_image_demo(const ScenarioConfig& scn, const BundleMap& bundles,
                                      Method method, double snr_db, const PgmImage& input) {
    const OfdmConfig cfg = scn.ofdm();
    const PilotLayout layout = make_pilot_layout(cfg);
    const NoiseSpec noise{snr_db};
    Rng rng = Rng::stream(scn.seed ^ 0x13A6Eull, 0);

    if (method_is_neural(method))
        require(bundles.count(method_arch(method)) > 0,
                "image demo: missing trained bundle for method " +
                    std::string(method_name(method)));
    PointCorrelations corr;
    if (method == Method::MMSE_perfect || method == Method::MMSE_nonperfect)
        corr = estimate_point_correlations(scn.classes, cfg, layout, scn.m_h, noise, rng);

    BitBlock payload(input.pixels.size() * 8);
    for (std::size_t i = 0; i < input.pixels.size(); ++i)
        for (int b = 0; b < 8; ++b)
            payload[i * 8 + static_cast<std::size_t>(b)] =
                static_cast<std::uint8_t>((input.pixels[i] >> (7 - b)) & 1u);

    const std::size_t bits_per_symbol = cfg.bits_per_symbol();
    const std::size_t n_symbols = (payload.size() + bits_per_symbol - 1) / bits_per_symbol;
    BitBlock decoded(n_symbols * bits_per_symbol, 0);

    std::uint64_t errors = 0;
    BitBlock tx_bits(bits_per_symbol);
    for (std::size_t s = 0; s < n_symbols; ++s) {
        for (std::size_t b = 0; b < bits_per_symbol; ++b) {
            const std::size_t idx = s * bits_per_symbol + b;
            tx_bits[b] = idx < payload.size() ? payload[idx] : 0;
        }
        const auto grid = build_grid(map_bits_to_qpsk(tx_bits), layout);
        const ChannelClass cls = scn.classes[scn.classes.size() == 1
                                                 ? 0
                                                 : rng.index(scn.classes.size())];
        const auto realization = draw_channel(cls, cfg, rng);
        const auto y = apply_channel(grid, realization, noise, cfg, rng);
        const BitBlock rx = method_is_neural(method)
                                ? infer(bundles.at(method_arch(method)), y).bits
                                : decode_conventional(method, y, realization.cfr, layout, corr,
                                                      noise);
        for (std::size_t b = 0; b < bits_per_symbol; ++b) {
            decoded[s * bits_per_symbol + b] = rx[b];
            const std::size_t idx = s * bits_per_symbol + b;
            if (idx < payload.size() && rx[b] != payload[idx]) ++errors;
        }
    }

    ImageDemoResult result;
    result.payload_bits = payload.size();
    result.ber = static_cast<double>(errors) / static_cast<double>(payload.size());
    result.image.width = input.width;
    result.image.height = input.height;
    result.image.pixels.resize(input.pixels.size());
    for (std::size_t i = 0; i < input.pixels.size(); ++i) {
        std::uint8_t px = 0;
        for (int b = 0; b < 8; ++b)
            px = static_cast<std::uint8_t>((px << 1) | decoded[i * 8 + static_cast<std::size_t>(b)]);
        result.image.pixels[i] = px;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Timing benchmark

struct TimingRow {
    Method method;
    double sec_per_symbol = 0.0;
    double ratio_to_ls = 0.0;
};

struct TimingReport {
    double t_ls = 0.0;  // seconds per symbol for the LS baseline
    std::vector<TimingRow> rows;
};

// Warmed-up wall-clock medians of per-symbol inference over a pool of
// pre-generated received symbols. The LS baseline times the pilot division
// only (interpolation excluded); MMSE includes the per-symbol matrix solve
// but not the one-time correlation estimation; neural methods include
// featurization, the classifier pass where applicable, input assembly, and
// the detector pass.
inline TimingReport run_timing(const ScenarioConfig& scn, const BundleMap& bundles,
                               std::size_t n_symbols = 256) {
    const OfdmConfig cfg = scn.ofdm();
    const PilotLayout layout = make_pilot_layout(cfg);
    const double snr_db = scn.snr_policy.kind == SnrPolicy::Kind::Fixed ? scn.snr_policy.lo : 20.0;
    const NoiseSpec noise{snr_db};
    Rng rng = Rng::stream(scn.seed ^ 0x71317ull, 0);

    for (Method m : scn.methods)
        if (method_is_neural(m))
            require(bundles.count(method_arch(m)) > 0,
                    "timing: missing trained bundle for method " +
                        std::string(method_name(m)));

    const PointCorrelations corr =
        estimate_point_correlations(scn.classes, cfg, layout, scn.m_h, noise, rng);

    struct Prepared {
        cvec y;
        cvec cfr;
        cvec y_pilots;
    };
    std::vector<Prepared> pool(n_symbols);
    for (auto& p : pool) {
        const ChannelClass cls = scn.classes[rng.index(scn.classes.size())];
        const auto bits = random_bits(cfg.bits_per_symbol(), rng);
        const auto grid = build_grid(map_bits_to_qpsk(bits), layout);
        const auto chan = draw_channel(cls, cfg, rng);
        p.y = apply_channel(grid, chan, noise, cfg, rng);
        p.cfr = chan.cfr;
        p.y_pilots.resize(layout.pilot_indices.size());
        for (std::size_t i = 0; i < p.y_pilots.size(); ++i)
            p.y_pilots[i] = p.y[layout.pilot_indices[i]];
    }

    // Volatile sink defeats dead-code elimination of the timed work.
    volatile double sink = 0.0;
    auto time_method = [&](const std::function<double(const Prepared&)>& body) {
        // Warm-up and calibration pass.
        double acc = 0.0;
        const auto c0 = std::chrono::steady_clock::now();
        for (const auto& p : pool) acc += body(p);
        const double first =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
        sink = sink + acc;
        // Repeat the pool often enough that one repetition takes >= 2 ms.
        const std::size_t reps_per_sample = std::max<std::size_t>(
            1, static_cast<std::size_t>(2e-3 / std::max(first, 1e-9)));
        std::vector<double> samples;
        for (int s = 0; s < 9; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            double a = 0.0;
            for (std::size_t r = 0; r < reps_per_sample; ++r)
                for (const auto& p : pool) a += body(p);
            const double dt =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            sink = sink + a;
            samples.push_back(dt / static_cast<double>(reps_per_sample * pool.size()));
        }
        std::sort(samples.begin(), samples.end());
        return samples[samples.size() / 2];
    };

    auto conventional_body = [&](Method m) {
        return [&, m](const Prepared& p) -> double {
            if (m == Method::LS) {
                const auto h = ls_estimate(p.y_pilots, layout.pilot_symbols);
                return h[0].real();
            }
            const BitBlock bits = decode_conventional(m, p.y, p.cfr, layout, corr, noise);
            return static_cast<double>(bits[0]);
        };
    };
    auto neural_body = [&](Method m) {
        const NetworkBundle& bundle = bundles.at(method_arch(m));
        return [&bundle](const Prepared& p) -> double {
            return static_cast<double>(infer(bundle, p.y).bits[0]);
        };
    };

    TimingReport report;
    report.t_ls = time_method(conventional_body(Method::LS));
    for (Method m : scn.methods) {
        TimingRow row;
        row.method = m;
        if (m == Method::LS) {
            row.sec_per_symbol = report.t_ls;
        } else if (method_is_neural(m)) {
            row.sec_per_symbol = time_method(neural_body(m));
        } else {
            row.sec_per_symbol = time_method(conventional_body(m));
        }
        row.ratio_to_ls = row.sec_per_symbol / report.t_ls;
        report.rows.push_back(row);
    }
    return report;
}

inline void write_timing_csv(const TimingReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_timing_csv: cannot open " + path);
    os << "method,sec_per_symbol,ratio_to_ls\n";
    char buf[96];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g\n", method_name(row.method),
                      row.sec_per_symbol, row.ratio_to_ls);
        os << buf;
    }
}

}  // namespace unidnn
