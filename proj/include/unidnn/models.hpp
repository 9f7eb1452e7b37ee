// Receiver networks: single-channel and multi-channel detectors, the channel
// classifier, and the three cascaded architectures that feed the classifier
// output into the detector. Includes the two-stage training protocol (train
// the classifier, freeze it, train the detector on its predictions).
#pragma once

#include <optional>

#include "unidnn/channel.hpp"
#include "unidnn/nn.hpp"
#include "unidnn/phy.hpp"

namespace unidnn {

enum class Arch { Single = 0, Multi = 1, UniA = 2, UniB = 3, UniC = 4 };

inline const char* arch_name(Arch a) {
    switch (a) {
        case Arch::Single: return "Single";
        case Arch::Multi: return "Multi";
        case Arch::UniA: return "UniA";
        case Arch::UniB: return "UniB";
        case Arch::UniC: return "UniC";
    }
    return "?";
}

inline Arch arch_from_name(const std::string& s) {
    for (int i = 0; i <= 4; ++i) {
        const Arch a = static_cast<Arch>(i);
        if (s == arch_name(a)) return a;
    }
    throw std::invalid_argument("unknown architecture: " + s);
}

inline bool arch_uses_classifier(Arch a) {
    return a == Arch::UniA || a == Arch::UniB || a == Arch::UniC;
}

// Classifier output handling when assembling detector inputs. Hard routing
// activates only the argmax class (one-hot); soft routing weights by the
// softmax probabilities.
enum class Routing { Hard, Soft };

inline const char* routing_name(Routing r) { return r == Routing::Hard ? "hard" : "soft"; }

inline Routing routing_from_name(const std::string& s) {
    if (s == "hard") return Routing::Hard;
    if (s == "soft") return Routing::Soft;
    throw std::invalid_argument("unknown routing mode: " + s);
}

// [Re(y_0..63) || Im(y_0..63)], length 2 * n_sub = 128.
inline std::vector<double> featurize(const cvec& y) {
    require(y.size() == 64, "featurize: expected 64 received subcarriers");
    std::vector<double> f(2 * y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        f[k] = y[k].real();
        f[k + y.size()] = y[k].imag();
    }
    return f;
}

inline std::vector<double> one_hot_class(ChannelClass cls) {
    std::vector<double> v(kNumChannelClasses, 0.0);
    v[static_cast<std::size_t>(cls)] = 1.0;
    return v;
}

inline std::size_t argmax_index(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// 128 x 5 grid: rows are the feature entries, columns the channel classes.
// Hard routing copies the features into the argmax column; soft routing
// scales every column by its class probability. Stored row-major, so the
// flattened layout is index = row * 5 + class.
inline Tensor build_grid_input(std::span<const double> features, std::span<const double> cls,
                               Routing routing) {
    require(cls.size() == kNumChannelClasses, "build_grid_input: class vector must have 5 entries");
    Tensor grid(std::vector<std::size_t>{features.size(), kNumChannelClasses});
    if (routing == Routing::Hard) {
        const std::size_t col = argmax_index(cls);
        for (std::size_t i = 0; i < features.size(); ++i)
            grid.data[i * kNumChannelClasses + col] = features[i];
    } else {
        for (std::size_t i = 0; i < features.size(); ++i)
            for (std::size_t c = 0; c < kNumChannelClasses; ++c)
                grid.data[i * kNumChannelClasses + c] = cls[c] * features[i];
    }
    return grid;
}

struct ModelConfig {
    std::size_t n_hid = 512;
    std::size_t n_out = 112;       // 2 * (n_sub - n_pilots)
    double drop_rate = 0.01;
    std::size_t conv_kernel = 1;   // spatial extent k of the UniC convolution
    Routing routing = Routing::Hard;
    std::uint64_t init_seed = 1;
};

struct NetworkBundle {
    Arch arch = Arch::Single;
    std::size_t n_p = 8;
    Routing routing = Routing::Hard;
    std::size_t conv_kernel = 1;
    Network detector;
    Network classifier;  // meaningful only when arch_uses_classifier(arch)
    bool trained = false;

    std::size_t detector_input_width() const { return detector.input_width(); }
};

// Detector/classifier wiring per architecture:
//   Single/Multi: 128 -> n_hid (ReLU) -> n_out (sigmoid)
//   UniA:         133 -> n_hid (ReLU) -> n_out (sigmoid)
//   UniB:         flatten(128 x 5) = 640 -> n_hid (ReLU) -> n_out (sigmoid)
//   UniC:         conv1d over the 128 axis (5 channels, 5 filters, extent k,
//                 same padding, ReLU) -> flatten 640 -> n_hid (ReLU) -> n_out
//                 (sigmoid)
// The classifier is 128 -> n_hid (ReLU) -> 5 (softmax) with the same hidden
// width. Dropout sits after each hidden ReLU.
inline NetworkBundle build_detector(Arch arch, const ModelConfig& cfg) {
    require(cfg.n_out == 64 || cfg.n_out == 96 || cfg.n_out == 112,
            "build_detector: n_out must match a pilot configuration");
    require(cfg.conv_kernel % 2 == 1, "build_detector: conv kernel extent must be odd");

    NetworkBundle bundle;
    bundle.arch = arch;
    bundle.n_p = 64 - cfg.n_out / 2;
    bundle.routing = cfg.routing;
    bundle.conv_kernel = cfg.conv_kernel;

    Rng rng(cfg.init_seed);
    switch (arch) {
        case Arch::Single:
        case Arch::Multi:
            bundle.detector = make_network({128});
            add_dense(bundle.detector, 128, cfg.n_hid, Activation::Relu);
            break;
        case Arch::UniA:
            bundle.detector = make_network({128 + kNumChannelClasses});
            add_dense(bundle.detector, 128 + kNumChannelClasses, cfg.n_hid, Activation::Relu);
            break;
        case Arch::UniB:
            bundle.detector = make_network({128 * kNumChannelClasses});
            add_dense(bundle.detector, 128 * kNumChannelClasses, cfg.n_hid, Activation::Relu);
            break;
        case Arch::UniC:
            bundle.detector = make_network({128, kNumChannelClasses});
            add_conv1d(bundle.detector, kNumChannelClasses, kNumChannelClasses, cfg.conv_kernel,
                       Activation::Relu);
            add_dense(bundle.detector, 128 * kNumChannelClasses, cfg.n_hid, Activation::Relu);
            break;
        default:
            throw std::invalid_argument("build_detector: unknown architecture tag");
    }
    add_dropout(bundle.detector, cfg.drop_rate);
    add_dense(bundle.detector, cfg.n_hid, cfg.n_out, Activation::Sigmoid);
    init_network(bundle.detector, rng);

    if (arch_uses_classifier(arch)) {
        bundle.classifier = make_network({128});
        add_dense(bundle.classifier, 128, cfg.n_hid, Activation::Relu);
        add_dropout(bundle.classifier, cfg.drop_rate);
        add_dense(bundle.classifier, cfg.n_hid, kNumChannelClasses, Activation::Softmax);
        Rng crng(splitmix64(cfg.init_seed ^ 0xC1A55ull));
        init_network(bundle.classifier, crng);
    }
    return bundle;
}

// Assemble one detector input row from features and a class vector.
inline void assemble_detector_row(Arch arch, Routing routing, std::span<const double> features,
                                  std::span<const double> cls, double* out) {
    switch (arch) {
        case Arch::Single:
        case Arch::Multi:
            std::copy(features.begin(), features.end(), out);
            break;
        case Arch::UniA: {
            std::copy(features.begin(), features.end(), out);
            if (routing == Routing::Hard) {
                std::fill(out + features.size(), out + features.size() + kNumChannelClasses, 0.0);
                out[features.size() + argmax_index(cls)] = 1.0;
            } else {
                std::copy(cls.begin(), cls.end(), out + features.size());
            }
            break;
        }
        case Arch::UniB:
        case Arch::UniC: {
            const Tensor grid = build_grid_input(features, cls, routing);
            std::copy(grid.data.begin(), grid.data.end(), out);
            break;
        }
    }
}

inline std::size_t detector_input_width(Arch arch) {
    switch (arch) {
        case Arch::Single:
        case Arch::Multi: return 128;
        case Arch::UniA: return 128 + kNumChannelClasses;
        case Arch::UniB:
        case Arch::UniC: return 128 * kNumChannelClasses;
    }
    return 0;
}

// Batch assembly: features [m, 128], cls [m, 5] -> detector inputs.
inline Tensor assemble_detector_inputs(Arch arch, Routing routing, const Tensor& features,
                                       const Tensor& cls) {
    require(features.row_width() == 128, "assemble: features must be m x 128");
    require(cls.row_width() == kNumChannelClasses, "assemble: class matrix must be m x 5");
    require(features.rows() == cls.rows(), "assemble: row count mismatch");
    const std::size_t m = features.rows();
    const std::size_t w = detector_input_width(arch);
    Tensor out(std::vector<std::size_t>{m, w});
    for (std::size_t i = 0; i < m; ++i)
        assemble_detector_row(arch, routing,
                              std::span(features.data.data() + i * 128, 128),
                              std::span(cls.data.data() + i * kNumChannelClasses,
                                        kNumChannelClasses),
                              out.data.data() + i * w);
    if (arch == Arch::UniC) out.shape = {m, 128, kNumChannelClasses};
    return out;
}

struct TwoStageReport {
    std::optional<TrainReport> classifier;
    TrainReport detector;
};

// Stage 1 trains the classifier on (features -> one-hot class) with
// cross-entropy; its parameters are then frozen. Stage 2 trains the detector
// on inputs assembled from the classifier's predictions (default) or from
// the ground-truth labels when use_ground_truth is set.
inline TwoStageReport train_two_stage(NetworkBundle& bundle, const Tensor& features,
                                      const Tensor& bit_labels, const Tensor& class_labels,
                                      const TrainConfig& base_cfg, bool use_ground_truth = false) {
    TwoStageReport report;
    Tensor detector_class = class_labels;
    if (arch_uses_classifier(bundle.arch)) {
        TrainConfig clf_cfg = base_cfg;
        clf_cfg.loss = LossKind::CrossEntropy;
        clf_cfg.seed = splitmix64(base_cfg.seed ^ 0x5747A6E1ull);
        report.classifier = train(bundle.classifier, features, class_labels, clf_cfg);
        if (!use_ground_truth) detector_class = predict(bundle.classifier, features);
    }
    const Tensor inputs =
        assemble_detector_inputs(bundle.arch, bundle.routing, features, detector_class);
    TrainConfig det_cfg = base_cfg;
    det_cfg.loss = LossKind::Mse;
    report.detector = train(bundle.detector, inputs, bit_labels, det_cfg);
    bundle.trained = true;
    return report;
}

struct InferenceResult {
    BitBlock bits;
    std::vector<double> class_probs;  // softmax output; uniform for Single/Multi
};

// Classifier forward (cascaded architectures), input assembly, detector
// forward, and a 0.5 threshold on the sigmoid outputs.
inline InferenceResult infer(const NetworkBundle& bundle, const cvec& y) {
    require(bundle.trained, "infer: bundle has not been trained");
    const auto features = featurize(y);

    InferenceResult result;
    result.class_probs.assign(kNumChannelClasses, 1.0 / kNumChannelClasses);
    if (arch_uses_classifier(bundle.arch)) {
        Tensor fx(std::vector<std::size_t>{1, features.size()});
        std::copy(features.begin(), features.end(), fx.data.begin());
        const Tensor probs = predict(bundle.classifier, fx);
        result.class_probs.assign(probs.data.begin(), probs.data.end());
    }

    Tensor input(std::vector<std::size_t>{1, detector_input_width(bundle.arch)});
    assemble_detector_row(bundle.arch, bundle.routing, features, result.class_probs,
                          input.data.data());
    if (bundle.arch == Arch::UniC) input.shape = {1, 128, kNumChannelClasses};
    const Tensor out = forward(bundle.detector, input, false);

    result.bits.resize(out.numel());
    for (std::size_t i = 0; i < out.numel(); ++i) result.bits[i] = out.data[i] > 0.5 ? 1 : 0;
    return result;
}

// Row-normalized confusion matrix (true class x predicted class) over a
// labeled feature set. Rows with no samples stay zero.
inline std::vector<double> classifier_confusion(const NetworkBundle& bundle,
                                                const Tensor& features,
                                                const Tensor& class_labels) {
    require(arch_uses_classifier(bundle.arch), "classifier_confusion: bundle has no classifier");
    require(features.rows() == class_labels.rows(), "classifier_confusion: row mismatch");
    const Tensor probs = predict(bundle.classifier, features);
    std::vector<double> counts(kNumChannelClasses * kNumChannelClasses, 0.0);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const std::size_t truth = argmax_index(
            std::span(class_labels.data.data() + i * kNumChannelClasses, kNumChannelClasses));
        const std::size_t pred = argmax_index(
            std::span(probs.data.data() + i * kNumChannelClasses, kNumChannelClasses));
        counts[truth * kNumChannelClasses + pred] += 1.0;
    }
    for (std::size_t r = 0; r < kNumChannelClasses; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < kNumChannelClasses; ++c)
            row += counts[r * kNumChannelClasses + c];
        if (row > 0.0)
            for (std::size_t c = 0; c < kNumChannelClasses; ++c)
                counts[r * kNumChannelClasses + c] /= row;
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Bundle checkpointing: a text manifest plus one checkpoint per network.

inline void save_bundle(const NetworkBundle& bundle, const std::string& prefix) {
    std::ofstream os(prefix + ".manifest");
    if (!os) throw std::runtime_error("save_bundle: cannot open " + prefix + ".manifest");
    os << "arch " << arch_name(bundle.arch) << "\n";
    os << "n_p " << bundle.n_p << "\n";
    os << "routing " << routing_name(bundle.routing) << "\n";
    os << "conv_kernel " << bundle.conv_kernel << "\n";
    os << "class_order";
    for (std::size_t i = 0; i < kNumChannelClasses; ++i)
        os << " " << channel_class_name(static_cast<ChannelClass>(i));
    os << "\n";
    os << "classifier " << (arch_uses_classifier(bundle.arch) ? "present" : "none") << "\n";
    save_network(bundle.detector, prefix + ".detector.nnckpt");
    if (arch_uses_classifier(bundle.arch))
        save_network(bundle.classifier, prefix + ".classifier.nnckpt");
}

inline NetworkBundle load_bundle(const std::string& prefix) {
    std::ifstream is(prefix + ".manifest");
    if (!is) throw std::runtime_error("load_bundle: missing manifest " + prefix + ".manifest");
    NetworkBundle bundle;
    std::string key;
    while (is >> key) {
        if (key == "arch") {
            std::string v;
            is >> v;
            bundle.arch = arch_from_name(v);
        } else if (key == "n_p") {
            is >> bundle.n_p;
        } else if (key == "routing") {
            std::string v;
            is >> v;
            bundle.routing = routing_from_name(v);
        } else if (key == "conv_kernel") {
            is >> bundle.conv_kernel;
        } else {
            std::string rest;
            std::getline(is, rest);
        }
    }
    bundle.detector = load_network(prefix + ".detector.nnckpt");
    if (arch_uses_classifier(bundle.arch))
        bundle.classifier = load_network(prefix + ".classifier.nnckpt");
    bundle.trained = true;
    return bundle;
}

}  // namespace unidnn
