// Command-line front end: dataset generation, training, BER sweeps,
// classifier evaluation, image-transmission demos, and timing benchmarks.
//
// Every subcommand accepts --config <json> and --seed <u64>; the seed flag
// overrides the config seed so reruns are reproducible from the shell.
#include <CLI11.hpp>

#include <iostream>

#include "unidnn/harness.hpp"

using namespace unidnn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool fast = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Scenario config (JSON)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "Override the scenario seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--fast", opts.fast, "Apply the fast profile (m=20000, 150 epochs, N_hid=256)");
}

ScenarioConfig make_scenario(const CommonOpts& opts) {
    ScenarioConfig scn;
    if (!opts.config_path.empty()) scn = load_scenario(opts.config_path);
    if (opts.fast) apply_fast_profile(scn);
    if (opts.seed_set) scn.seed = opts.seed;
    return scn;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link-level OFDM simulator with conventional and neural receivers"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    std::string gen_out = "dataset.bin";
    auto* gen = app.add_subcommand("gen-data", "Generate a labeled dataset");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "Output dataset file");

    CommonOpts train_opts;
    std::string train_data, train_models_dir = "models";
    auto* train_cmd = app.add_subcommand("train", "Train the scenario's detector architectures");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--data", train_data,
                          "Dataset file (generated from the scenario when omitted)");
    train_cmd->add_option("--models-dir", train_models_dir, "Checkpoint output directory");

    CommonOpts sweep_opts;
    std::string sweep_models_dir = "models", sweep_out = "ber.csv";
    auto* sweep = app.add_subcommand("sweep", "Run a BER-vs-SNR sweep");
    add_common(sweep, sweep_opts);
    sweep->add_option("--models-dir", sweep_models_dir, "Trained checkpoint directory");
    sweep->add_option("--out", sweep_out, "Output CSV");

    CommonOpts eval_opts;
    std::string eval_models_dir = "models", eval_arch = "UniA";
    std::string eval_confusion_out = "confusion.csv", eval_accuracy_out = "accuracy.csv";
    auto* eval = app.add_subcommand("classify-eval", "Evaluate the channel classifier per SNR");
    add_common(eval, eval_opts);
    eval->add_option("--models-dir", eval_models_dir, "Trained checkpoint directory");
    eval->add_option("--arch", eval_arch, "Cascaded architecture providing the classifier");
    eval->add_option("--confusion-out", eval_confusion_out, "Confusion matrix CSV");
    eval->add_option("--accuracy-out", eval_accuracy_out, "Accuracy CSV");

    CommonOpts img_opts;
    std::string img_in, img_out = "received.pgm", img_method = "LS", img_models_dir = "models";
    double img_snr = 20.0;
    auto* img = app.add_subcommand("image-demo", "Transmit a PGM image through the channel");
    add_common(img, img_opts);
    img->add_option("--image", img_in, "Input image (binary PGM, P5)")
        ->required()
        ->check(CLI::ExistingFile);
    img->add_option("--out", img_out, "Reconstructed image output");
    img->add_option("--method", img_method, "Receiver method tag");
    img->add_option("--snr", img_snr, "SNR in dB");
    img->add_option("--models-dir", img_models_dir, "Trained checkpoint directory");

    CommonOpts time_opts;
    std::string time_models_dir = "models", time_out = "timing.csv";
    std::size_t time_trials = 256;
    auto* timing = app.add_subcommand("timing", "Per-symbol inference timing benchmark");
    add_common(timing, time_opts);
    timing->add_option("--models-dir", time_models_dir, "Trained checkpoint directory");
    timing->add_option("--out", time_out, "Output CSV");
    timing->add_option("--trials", time_trials, "Prepared symbols in the timing pool");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const ScenarioConfig scn = make_scenario(gen_opts);
            std::cout << "generating " << scn.m << " samples (N_p=" << scn.n_p << ")...\n";
            const auto ds = generate_dataset(scn);
            save_dataset(ds, gen_out);
            std::cout << "wrote " << gen_out << "\n";
        } else if (train_cmd->parsed()) {
            const ScenarioConfig scn = make_scenario(train_opts);
            LabeledDataset ds;
            if (train_data.empty()) {
                std::cout << "generating " << scn.m << " samples...\n";
                ds = generate_dataset(scn);
            } else {
                ds = load_dataset(train_data);
            }
            const auto bundles = train_scenario(scn, ds, &std::cout);
            save_models(bundles, train_models_dir, scn.n_p);
            std::cout << "wrote " << bundles.size() << " bundle(s) to " << train_models_dir
                      << "\n";
        } else if (sweep->parsed()) {
            const ScenarioConfig scn = make_scenario(sweep_opts);
            const auto bundles = load_models(scn.methods, sweep_models_dir, scn.n_p);
            const auto curves = run_ber_sweep(scn, bundles, &std::cerr);
            write_ber_csv(curves, sweep_out);
            std::cout << "wrote " << sweep_out << "\n";
        } else if (eval->parsed()) {
            const ScenarioConfig scn = make_scenario(eval_opts);
            const Arch arch = arch_from_name(eval_arch);
            require(arch_uses_classifier(arch), "classify-eval: --arch must be UniA/UniB/UniC");
            const auto bundle = load_bundle(bundle_prefix(eval_models_dir, arch, scn.n_p));
            const auto rows = run_classifier_eval(scn, bundle);
            write_confusion_csv(rows, eval_confusion_out);
            write_accuracy_csv(rows, eval_accuracy_out);
            std::cout << "wrote " << eval_confusion_out << " and " << eval_accuracy_out << "\n";
        } else if (img->parsed()) {
            const ScenarioConfig scn = make_scenario(img_opts);
            const Method method = method_from_name(img_method);
            BundleMap bundles;
            if (method_is_neural(method))
                bundles = load_models({method}, img_models_dir, scn.n_p);
            const auto input = read_pgm(img_in);
            const auto result = run_image_demo(scn, bundles, method, img_snr, input);
            write_pgm(result.image, img_out);
            std::cout << "method " << method_name(method) << " at " << img_snr
                      << " dB: BER " << result.ber << " over " << result.payload_bits
                      << " payload bits; wrote " << img_out << "\n";
        } else if (timing->parsed()) {
            const ScenarioConfig scn = make_scenario(time_opts);
            BundleMap bundles;
            for (Method m : scn.methods)
                if (method_is_neural(m)) {
                    bundles = load_models(scn.methods, time_models_dir, scn.n_p);
                    break;
                }
            const auto report = run_timing(scn, bundles, time_trials);
            write_timing_csv(report, time_out);
            std::cout << "T_LS = " << report.t_ls * 1e6 << " us/symbol\n";
            for (const auto& row : report.rows)
                std::cout << "  " << method_name(row.method) << ": " << row.sec_per_symbol * 1e6
                          << " us/symbol (" << row.ratio_to_ls << " T_LS)\n";
            std::cout << "wrote " << time_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
