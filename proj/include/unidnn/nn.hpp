// Minimal deterministic neural-network engine: real64 tensors, dense and 1-D
// convolution layers, ReLU/sigmoid/softmax, MSE and cross-entropy losses,
// inverted dropout, L2 regularization, ADAM, and mini-batch training with a
// seeded 70/30 train/validation split.
//
// Training is single-threaded and bit-reproducible for a fixed seed. Dense
// products are evaluated through Eigen maps over the tensor buffers; Eigen's
// single-threaded kernels keep the arithmetic order fixed run to run.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>

#include "unidnn/common.hpp"
#include "unidnn/rng.hpp"

namespace unidnn {

// 64-byte-aligned buffers keep Eigen's vectorized kernels on the same code
// path for every allocation, which makes training trajectories bit-identical
// across runs and within a process.
template <typename T, std::size_t Align>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }
    template <typename U>
    bool operator==(const AlignedAllocator<U, Align>&) const {
        return true;
    }
};

using AlignedF64Vec = std::vector<double, AlignedAllocator<double, 64>>;

// ---------------------------------------------------------------------------
// Tensor

struct Tensor {
    std::vector<std::size_t> shape;
    AlignedF64Vec data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0);
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    // All trailing dimensions collapsed: the per-row feature width.
    std::size_t row_width() const { return shape.empty() ? 0 : numel() / std::max<std::size_t>(shape[0], 1); }

    double& at(std::size_t r, std::size_t c) { return data[r * row_width() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * row_width() + c]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap mat_view(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(cols));
}

inline MatMap mat_view_mut(Tensor& t, std::size_t rows, std::size_t cols) {
    return MatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline Tensor gather_rows(const Tensor& x, std::span<const std::size_t> idx) {
    const std::size_t w = x.row_width();
    Tensor out;
    out.shape = x.shape;
    out.shape[0] = idx.size();
    out.data.resize(idx.size() * w);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * w), w,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * w));
    return out;
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { None, Relu, Sigmoid, Softmax };

inline Tensor relu(const Tensor& z) {
    Tensor out = z;
    for (auto& v : out.data) v = std::max(0.0, v);
    return out;
}

// Indicator(z > 0); the subgradient at exactly 0 is taken as 0.
inline Tensor relu_grad(const Tensor& z) {
    Tensor out = z;
    for (auto& v : out.data) v = v > 0.0 ? 1.0 : 0.0;
    return out;
}

inline double sigmoid_scalar(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& z) {
    Tensor out = z;
    for (auto& v : out.data) v = sigmoid_scalar(v);
    return out;
}

// Gradient in terms of the activation output: s (1 - s).
inline Tensor sigmoid_grad_from_output(const Tensor& s) {
    Tensor out = s;
    for (auto& v : out.data) v = v * (1.0 - v);
    return out;
}

// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& z) {
    Tensor out = z;
    const std::size_t w = z.row_width();
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < w; ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < w; ++c) {
            out.at(r, c) = std::exp(out.at(r, c) - mx);
            sum += out.at(r, c);
        }
        for (std::size_t c = 0; c < w; ++c) out.at(r, c) /= sum;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses

// J = 1/2 sum (y - yhat)^2; gradient w.r.t. yhat is (yhat - y).
inline std::pair<double, Tensor> mse_loss(const Tensor& y, const Tensor& yhat) {
    require(y.shape == yhat.shape, "mse_loss: shape mismatch");
    double j = 0.0;
    Tensor grad = yhat;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = yhat.data[i] - y.data[i];
        j += 0.5 * d * d;
        grad.data[i] = d;
    }
    return {j, grad};
}

// J = -sum y log(p) with p clamped to [1e-12, 1]; the returned gradient is
// the combined softmax + cross-entropy gradient w.r.t. the logits: p - y.
inline std::pair<double, Tensor> cross_entropy_loss(const Tensor& one_hot, const Tensor& probs) {
    require(one_hot.shape == probs.shape, "cross_entropy_loss: shape mismatch");
    double j = 0.0;
    Tensor grad = probs;
    for (std::size_t i = 0; i < probs.data.size(); ++i) {
        const double p = std::clamp(probs.data[i], 1e-12, 1.0);
        j -= one_hot.data[i] * std::log(p);
        grad.data[i] = probs.data[i] - one_hot.data[i];
    }
    return {j, grad};
}

// ---------------------------------------------------------------------------
// Layers

enum class LayerKind { Dense, Conv1d, Dropout };

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t fan_in = 0, fan_out = 0;                         // dense
    std::size_t in_channels = 0, out_filters = 0, kernel_extent = 0;  // conv1d, "same" padding
    double drop_rate = 0.0;                                      // dropout
    Activation act = Activation::None;
};

struct Layer {
    LayerSpec spec;
    Tensor w;  // dense: [fan_out, fan_in]; conv1d: [filters, in_channels, k]
    Tensor b;  // dense: [fan_out]; conv1d: [filters]
};

// Z = X W^T + b, batched over rows of X.
inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t batch = x.rows();
    const std::size_t fan_in = x.row_width();
    const std::size_t fan_out = w.shape.at(0);
    require(w.shape.size() == 2 && w.shape[1] == fan_in, "dense_forward: weight shape mismatch");
    require(b.numel() == fan_out, "dense_forward: bias shape mismatch");
    Tensor z(std::vector<std::size_t>{batch, fan_out});
    auto mz = mat_view_mut(z, batch, fan_out);
    mz.noalias() = mat_view(x, batch, fan_in) * mat_view(w, fan_out, fan_in).transpose();
    const auto vb = Eigen::Map<const Eigen::RowVectorXd>(b.data.data(),
                                                         static_cast<Eigen::Index>(fan_out));
    mz.rowwise() += vb;
    return z;
}

struct DenseGrads {
    Tensor dx, dw, db;
};

// Exact gradients for Z = X W^T + b given dZ; dW includes the L2 term l2 * W.
inline DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& dz, double l2) {
    const std::size_t batch = x.rows();
    const std::size_t fan_in = x.row_width();
    const std::size_t fan_out = w.shape.at(0);
    require(dz.rows() == batch && dz.row_width() == fan_out, "dense_backward: dz shape mismatch");

    DenseGrads g;
    g.dw = Tensor(w.shape);
    g.db = Tensor(std::vector<std::size_t>{fan_out});
    g.dx.shape = x.shape;
    g.dx.data.assign(x.data.size(), 0.0);

    auto mdz = mat_view(dz, batch, fan_out);
    mat_view_mut(g.dw, fan_out, fan_in).noalias() = mdz.transpose() * mat_view(x, batch, fan_in);
    if (l2 != 0.0)
        mat_view_mut(g.dw, fan_out, fan_in) += l2 * mat_view(w, fan_out, fan_in);
    Eigen::Map<Eigen::RowVectorXd>(g.db.data.data(), static_cast<Eigen::Index>(fan_out)) =
        mdz.colwise().sum();
    mat_view_mut(g.dx, batch, fan_in).noalias() = mdz * mat_view(w, fan_out, fan_in);
    return g;
}

// Cross-correlation along the length axis with zero "same" padding.
// x: [batch, len, in_ch], w: [filters, in_ch, k] (k odd), b: [filters].
inline Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.shape.size() == 3, "conv1d_forward: input must be [batch, len, channels]");
    const std::size_t batch = x.shape[0], len = x.shape[1], in_ch = x.shape[2];
    require(w.shape.size() == 3 && w.shape[1] == in_ch, "conv1d_forward: filter shape mismatch");
    const std::size_t filters = w.shape[0], k = w.shape[2];
    require(k % 2 == 1, "conv1d_forward: kernel extent must be odd for same padding");
    require(b.numel() == filters, "conv1d_forward: bias shape mismatch");

    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k) / 2;
    Tensor z(std::vector<std::size_t>{batch, len, filters});
    for (std::size_t n = 0; n < batch; ++n) {
        const double* xp = x.data.data() + n * len * in_ch;
        double* zp = z.data.data() + n * len * filters;
        for (std::size_t t = 0; t < len; ++t)
            for (std::size_t f = 0; f < filters; ++f) {
                double acc = b.data[f];
                const double* wf = w.data.data() + f * in_ch * k;
                for (std::size_t c = 0; c < in_ch; ++c)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                                   static_cast<std::ptrdiff_t>(kk) - half;
                        if (src >= 0 && src < static_cast<std::ptrdiff_t>(len))
                            acc += xp[static_cast<std::size_t>(src) * in_ch + c] * wf[c * k + kk];
                    }
                zp[t * filters + f] = acc;
            }
    }
    return z;
}

struct ConvGrads {
    Tensor dx, dw, db;
};

inline ConvGrads conv1d_backward(const Tensor& x, const Tensor& w, const Tensor& dz, double l2) {
    const std::size_t batch = x.shape[0], len = x.shape[1], in_ch = x.shape[2];
    const std::size_t filters = w.shape[0], k = w.shape[2];
    require(dz.shape.size() == 3 && dz.shape[0] == batch && dz.shape[1] == len &&
                dz.shape[2] == filters,
            "conv1d_backward: dz shape mismatch");
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k) / 2;

    ConvGrads g;
    g.dx = Tensor(x.shape);
    g.dw = Tensor(w.shape);
    g.db = Tensor(std::vector<std::size_t>{filters});
    for (std::size_t n = 0; n < batch; ++n) {
        const double* xp = x.data.data() + n * len * in_ch;
        const double* dzp = dz.data.data() + n * len * filters;
        double* dxp = g.dx.data.data() + n * len * in_ch;
        for (std::size_t t = 0; t < len; ++t)
            for (std::size_t f = 0; f < filters; ++f) {
                const double d = dzp[t * filters + f];
                g.db.data[f] += d;
                double* dwf = g.dw.data.data() + f * in_ch * k;
                const double* wf = w.data.data() + f * in_ch * k;
                for (std::size_t c = 0; c < in_ch; ++c)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                                   static_cast<std::ptrdiff_t>(kk) - half;
                        if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) {
                            dwf[c * k + kk] += d * xp[static_cast<std::size_t>(src) * in_ch + c];
                            dxp[static_cast<std::size_t>(src) * in_ch + c] += d * wf[c * k + kk];
                        }
                    }
            }
    }
    if (l2 != 0.0)
        for (std::size_t i = 0; i < w.data.size(); ++i) g.dw.data[i] += l2 * w.data[i];
    return g;
}

// ---------------------------------------------------------------------------
// Network

struct Network {
    std::vector<std::size_t> in_shape;  // per-sample, e.g. {128} or {128, 5}
    std::vector<Layer> layers;

    std::size_t input_width() const { return Tensor::numel_of(in_shape); }
    std::size_t output_width() const {
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
            if (it->spec.kind == LayerKind::Dense) return it->spec.fan_out;
            if (it->spec.kind == LayerKind::Conv1d) return 0;  // callers flatten explicitly
        }
        return input_width();
    }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.numel() + l.b.numel();
        return n;
    }
};

inline Network make_network(std::vector<std::size_t> in_shape) {
    Network net;
    net.in_shape = std::move(in_shape);
    return net;
}

inline void add_dense(Network& net, std::size_t fan_in, std::size_t fan_out, Activation act) {
    Layer l;
    l.spec.kind = LayerKind::Dense;
    l.spec.fan_in = fan_in;
    l.spec.fan_out = fan_out;
    l.spec.act = act;
    l.w = Tensor(std::vector<std::size_t>{fan_out, fan_in});
    l.b = Tensor(std::vector<std::size_t>{fan_out});
    net.layers.push_back(std::move(l));
}

inline void add_conv1d(Network& net, std::size_t in_channels, std::size_t out_filters,
                       std::size_t kernel_extent, Activation act) {
    Layer l;
    l.spec.kind = LayerKind::Conv1d;
    l.spec.in_channels = in_channels;
    l.spec.out_filters = out_filters;
    l.spec.kernel_extent = kernel_extent;
    l.spec.act = act;
    l.w = Tensor(std::vector<std::size_t>{out_filters, in_channels, kernel_extent});
    l.b = Tensor(std::vector<std::size_t>{out_filters});
    net.layers.push_back(std::move(l));
}

inline void add_dropout(Network& net, double rate) {
    require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0,1)");
    Layer l;
    l.spec.kind = LayerKind::Dropout;
    l.spec.drop_rate = rate;
    net.layers.push_back(std::move(l));
}

// Fan-in-scaled uniform init: He-style for ReLU layers, Xavier-style
// otherwise. Biases start at zero.
inline void init_network(Network& net, Rng& rng) {
    for (auto& l : net.layers) {
        if (l.spec.kind == LayerKind::Dropout) continue;
        std::size_t fan_in, fan_out;
        if (l.spec.kind == LayerKind::Dense) {
            fan_in = l.spec.fan_in;
            fan_out = l.spec.fan_out;
        } else {
            fan_in = l.spec.in_channels * l.spec.kernel_extent;
            fan_out = l.spec.out_filters * l.spec.kernel_extent;
        }
        const double limit = l.spec.act == Activation::Relu
                                 ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                 : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : l.w.data) v = rng.uniform(-limit, limit);
        for (auto& v : l.b.data) v = 0.0;
    }
}

struct ForwardCache {
    std::vector<Tensor> inputs;  // input seen by each layer
    std::vector<Tensor> zs;      // pre-activation outputs
    std::vector<Tensor> outs;    // post-activation outputs
    std::vector<Tensor> masks;   // dropout masks (scaled)
};

namespace detail {

inline Tensor apply_activation(Activation act, const Tensor& z) {
    switch (act) {
        case Activation::None: return z;
        case Activation::Relu: return relu(z);
        case Activation::Sigmoid: return sigmoid(z);
        case Activation::Softmax: return softmax_rows(z);
    }
    throw std::invalid_argument("unknown activation");
}

}  // namespace detail

// Forward pass over a batch. In training mode dropout draws a fresh inverted
// mask from rng; in inference mode dropout is the identity.
inline Tensor forward(const Network& net, const Tensor& x, bool training = false,
                      Rng* rng = nullptr, ForwardCache* cache = nullptr) {
    require(x.rows() > 0 && x.row_width() == net.input_width(),
            "forward: input width mismatch");
    Tensor cur = x;
    if (net.in_shape.size() > 1) {
        cur.shape.assign(1, x.rows());
        cur.shape.insert(cur.shape.end(), net.in_shape.begin(), net.in_shape.end());
    }
    if (cache) {
        cache->inputs.clear();
        cache->zs.clear();
        cache->outs.clear();
        cache->masks.assign(net.layers.size(), Tensor{});
    }
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& l = net.layers[li];
        if (cache) cache->inputs.push_back(cur);
        switch (l.spec.kind) {
            case LayerKind::Dense: {
                if (cur.shape.size() > 2) cur.shape = {cur.rows(), cur.row_width()};
                Tensor z = dense_forward(cur, l.w, l.b);
                Tensor a = detail::apply_activation(l.spec.act, z);
                if (cache) {
                    cache->zs.push_back(std::move(z));
                    cache->outs.push_back(a);
                }
                cur = std::move(a);
                break;
            }
            case LayerKind::Conv1d: {
                Tensor z = conv1d_forward(cur, l.w, l.b);
                Tensor a = detail::apply_activation(l.spec.act, z);
                if (cache) {
                    cache->zs.push_back(std::move(z));
                    cache->outs.push_back(a);
                }
                cur = std::move(a);
                break;
            }
            case LayerKind::Dropout: {
                if (cache) {
                    cache->zs.push_back(Tensor{});
                    cache->outs.push_back(Tensor{});
                }
                if (training && l.spec.drop_rate > 0.0) {
                    require(rng != nullptr, "forward: dropout in training mode needs an rng");
                    const double keep = 1.0 - l.spec.drop_rate;
                    Tensor mask = cur;
                    for (auto& v : mask.data) v = rng->uniform() < keep ? 1.0 / keep : 0.0;
                    for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] *= mask.data[i];
                    if (cache) cache->masks[li] = std::move(mask);
                }
                break;
            }
        }
    }
    return cur;
}

struct Gradients {
    std::vector<Tensor> dw, db;  // aligned with net.layers
};

// Backpropagation. dlast is the loss gradient at the network output; when
// dlast_is_dz the last parameterized layer's activation gradient is already
// folded in (softmax + cross-entropy). L2 adds l2 * W to every weight grad.
inline Gradients backward(const Network& net, const ForwardCache& cache, Tensor dlast,
                          bool dlast_is_dz, double l2) {
    Gradients g;
    g.dw.assign(net.layers.size(), Tensor{});
    g.db.assign(net.layers.size(), Tensor{});
    Tensor dcur = std::move(dlast);
    bool pending_dz = dlast_is_dz;
    for (std::size_t ri = net.layers.size(); ri-- > 0;) {
        const auto& l = net.layers[ri];
        switch (l.spec.kind) {
            case LayerKind::Dropout: {
                if (cache.masks[ri].numel() > 0)
                    for (std::size_t i = 0; i < dcur.data.size(); ++i)
                        dcur.data[i] *= cache.masks[ri].data[i];
                break;
            }
            case LayerKind::Dense:
            case LayerKind::Conv1d: {
                Tensor dz;
                if (pending_dz) {
                    dz = std::move(dcur);
                    pending_dz = false;
                } else {
                    dz = dcur;
                    switch (l.spec.act) {
                        case Activation::None: break;
                        case Activation::Relu: {
                            const Tensor m = relu_grad(cache.zs[ri]);
                            for (std::size_t i = 0; i < dz.data.size(); ++i)
                                dz.data[i] *= m.data[i];
                            break;
                        }
                        case Activation::Sigmoid: {
                            const Tensor m = sigmoid_grad_from_output(cache.outs[ri]);
                            for (std::size_t i = 0; i < dz.data.size(); ++i)
                                dz.data[i] *= m.data[i];
                            break;
                        }
                        case Activation::Softmax:
                            throw std::invalid_argument(
                                "backward: softmax must be paired with cross-entropy");
                    }
                }
                if (l.spec.kind == LayerKind::Dense) {
                    Tensor input = cache.inputs[ri];
                    if (input.shape.size() > 2) input.shape = {input.rows(), input.row_width()};
                    if (dz.shape.size() != 2) dz.shape = {dz.rows(), dz.row_width()};
                    DenseGrads dg = dense_backward(input, l.w, dz, l2);
                    dg.dx.shape = cache.inputs[ri].shape;
                    g.dw[ri] = std::move(dg.dw);
                    g.db[ri] = std::move(dg.db);
                    dcur = std::move(dg.dx);
                } else {
                    Tensor dz3 = std::move(dz);
                    dz3.shape = cache.zs[ri].shape;
                    ConvGrads cg = conv1d_backward(cache.inputs[ri], l.w, dz3, l2);
                    g.dw[ri] = std::move(cg.dw);
                    g.db[ri] = std::move(cg.db);
                    dcur = std::move(cg.dx);
                }
                break;
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// ADAM

struct AdamState {
    std::vector<Tensor> m, v;  // first/second moments, aligned with params
    std::size_t step = 0;
};

inline AdamState make_adam_state(const Network& net) {
    AdamState st;
    for (const auto& l : net.layers) {
        st.m.push_back(Tensor(l.w.shape.empty() ? std::vector<std::size_t>{0} : l.w.shape));
        st.m.push_back(Tensor(l.b.shape.empty() ? std::vector<std::size_t>{0} : l.b.shape));
    }
    st.v = st.m;
    return st;
}

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                               std::size_t step, const AdamConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double gi = grad.data[i];
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

// One ADAM step over all network parameters given per-layer gradients.
inline void adam_step(Network& net, const Gradients& g, AdamState& st, const AdamConfig& cfg) {
    ++st.step;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        if (l.spec.kind == LayerKind::Dropout) continue;
        require(g.dw[li].numel() == l.w.numel() && g.db[li].numel() == l.b.numel(),
                "adam_step: gradient shape mismatch");
        adam_update_tensor(l.w, g.dw[li], st.m[2 * li], st.v[2 * li], st.step, cfg);
        adam_update_tensor(l.b, g.db[li], st.m[2 * li + 1], st.v[2 * li + 1], st.step, cfg);
    }
}

// ---------------------------------------------------------------------------
// Training

enum class LossKind { Mse, CrossEntropy };

struct TrainConfig {
    double learning_rate = 0.001;
    double l2 = 2e-6;
    std::size_t batch_size = 3000;
    std::size_t epochs = 700;
    double train_frac = 0.7;
    LossKind loss = LossKind::Mse;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    std::uint64_t seed = 1;
    bool keep_best = true;  // retain the best-validation-loss parameters
};

struct TrainReport {
    std::vector<double> train_loss, val_loss;      // per epoch, per-sample means
    std::vector<double> train_acc, val_acc;        // binary accuracy
    std::size_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> train_indices, val_indices;
};

inline Tensor predict(const Network& net, const Tensor& x) { return forward(net, x, false); }

inline double binary_accuracy(const Tensor& y, const Tensor& yhat, double threshold = 0.5) {
    require(y.shape == yhat.shape, "binary_accuracy: shape mismatch");
    require(y.numel() > 0, "binary_accuracy: empty tensors");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const bool pred = yhat.data[i] > threshold;
        const bool truth = y.data[i] > threshold;
        correct += pred == truth;
    }
    return static_cast<double>(correct) / static_cast<double>(y.numel());
}

inline TrainReport train(Network& net, const Tensor& x, const Tensor& y, const TrainConfig& cfg) {
    const std::size_t m = x.rows();
    require(m > 0 && y.rows() == m, "train: dataset rows mismatch");
    require(y.row_width() == net.output_width(), "train: label width mismatch");
    require(cfg.batch_size > 0, "train: batch size must be positive");
    if (cfg.loss == LossKind::CrossEntropy)
        require(net.layers.back().spec.act == Activation::Softmax,
                "train: cross-entropy expects a softmax output layer");

    Rng rng(cfg.seed);
    TrainReport report;

    // Seeded shuffled 70/30 split.
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i-- > 1;) std::swap(perm[i], perm[rng.index(i + 1)]);
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg.train_frac * static_cast<double>(m)));
    report.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    report.val_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    require(cfg.batch_size <= n_train, "train: batch size exceeds the training split");

    const Tensor x_val = gather_rows(x, report.val_indices);
    const Tensor y_val = gather_rows(y, report.val_indices);

    AdamState adam = make_adam_state(net);
    const AdamConfig acfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
    std::vector<Layer> best_layers = net.layers;

    std::vector<std::size_t> order = report.train_indices;
    ForwardCache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);

        double epoch_loss = 0.0;
        std::size_t correct = 0, total = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> idx(order.data() + start, bsz);
            const Tensor xb = gather_rows(x, idx);
            const Tensor yb = gather_rows(y, idx);

            const Tensor out = forward(net, xb, true, &rng, &cache);
            double j;
            Tensor grad;
            bool grad_is_dz;
            if (cfg.loss == LossKind::Mse) {
                std::tie(j, grad) = mse_loss(yb, out);
                grad_is_dz = false;
            } else {
                std::tie(j, grad) = cross_entropy_loss(yb, out);
                grad_is_dz = true;
            }
            if (!std::isfinite(j))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch));
            const double scale = 1.0 / static_cast<double>(bsz);
            for (auto& v : grad.data) v *= scale;
            epoch_loss += j;
            for (std::size_t i = 0; i < out.data.size(); ++i)
                correct += (out.data[i] > 0.5) == (yb.data[i] > 0.5);
            total += out.numel();

            const Gradients g = backward(net, cache, std::move(grad), grad_is_dz, cfg.l2);
            adam_step(net, g, adam, acfg);
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        report.train_acc.push_back(static_cast<double>(correct) / static_cast<double>(total));

        const Tensor val_out = predict(net, x_val);
        const auto [jv, gv] = cfg.loss == LossKind::Mse ? mse_loss(y_val, val_out)
                                                        : cross_entropy_loss(y_val, val_out);
        const double val_loss = jv / static_cast<double>(std::max<std::size_t>(1, x_val.rows()));
        if (!std::isfinite(val_loss))
            throw std::runtime_error("train: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        report.val_loss.push_back(val_loss);
        report.val_acc.push_back(binary_accuracy(y_val, val_out));

        if (val_loss < report.best_val_loss) {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            if (cfg.keep_best) best_layers = net.layers;
        }
    }
    if (cfg.keep_best) net.layers = std::move(best_layers);
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: versioned binary, little-endian real64 parameter blobs.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint and dataset formats assume a little-endian host");

inline constexpr char kCkptMagic[8] = {'U', 'N', 'N', 'C', 'K', 'P', 'T', '1'};

}  // namespace detail

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_network: cannot open " + path);
    os.write(detail::kCkptMagic, 8);
    detail::write_u32(os, 1);  // version
    detail::write_u32(os, static_cast<std::uint32_t>(net.in_shape.size()));
    for (auto d : net.in_shape) detail::write_u64(os, d);
    detail::write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        detail::write_u32(os, static_cast<std::uint32_t>(l.spec.kind));
        detail::write_u32(os, static_cast<std::uint32_t>(l.spec.act));
        detail::write_u64(os, l.spec.fan_in);
        detail::write_u64(os, l.spec.fan_out);
        detail::write_u64(os, l.spec.in_channels);
        detail::write_u64(os, l.spec.out_filters);
        detail::write_u64(os, l.spec.kernel_extent);
        detail::write_f64(os, l.spec.drop_rate);
    }
    for (const auto& l : net.layers) {
        detail::write_u64(os, l.w.numel());
        os.write(reinterpret_cast<const char*>(l.w.data.data()),
                 static_cast<std::streamsize>(l.w.numel() * sizeof(double)));
        detail::write_u64(os, l.b.numel());
        os.write(reinterpret_cast<const char*>(l.b.data.data()),
                 static_cast<std::streamsize>(l.b.numel() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("save_network: write failed for " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_network: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw std::runtime_error("load_network: bad magic in " + path);
    const std::uint32_t version = detail::read_u32(is);
    if (version != 1) throw std::runtime_error("load_network: unsupported version");

    Network net;
    const std::uint32_t rank = detail::read_u32(is);
    for (std::uint32_t i = 0; i < rank; ++i) net.in_shape.push_back(detail::read_u64(is));
    const std::uint32_t n_layers = detail::read_u32(is);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        Layer l;
        l.spec.kind = static_cast<LayerKind>(detail::read_u32(is));
        l.spec.act = static_cast<Activation>(detail::read_u32(is));
        l.spec.fan_in = detail::read_u64(is);
        l.spec.fan_out = detail::read_u64(is);
        l.spec.in_channels = detail::read_u64(is);
        l.spec.out_filters = detail::read_u64(is);
        l.spec.kernel_extent = detail::read_u64(is);
        l.spec.drop_rate = detail::read_f64(is);
        net.layers.push_back(std::move(l));
    }
    for (auto& l : net.layers) {
        const std::uint64_t wn = detail::read_u64(is);
        switch (l.spec.kind) {
            case LayerKind::Dense:
                l.w.shape = {l.spec.fan_out, l.spec.fan_in};
                break;
            case LayerKind::Conv1d:
                l.w.shape = {l.spec.out_filters, l.spec.in_channels, l.spec.kernel_extent};
                break;
            case LayerKind::Dropout:
                l.w.shape = {0};
                break;
        }
        if (wn != Tensor::numel_of(l.w.shape))
            throw std::runtime_error("load_network: parameter blob size mismatch");
        l.w.data.resize(wn);
        is.read(reinterpret_cast<char*>(l.w.data.data()),
                static_cast<std::streamsize>(wn * sizeof(double)));
        const std::uint64_t bn = detail::read_u64(is);
        l.b.shape = {bn};
        l.b.data.resize(bn);
        is.read(reinterpret_cast<char*>(l.b.data.data()),
                static_cast<std::streamsize>(bn * sizeof(double)));
    }
    if (!is) throw std::runtime_error("load_network: truncated file " + path);
    return net;
}

}  // namespace unidnn
