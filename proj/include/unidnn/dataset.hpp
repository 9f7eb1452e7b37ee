// Labeled dataset container and its versioned binary file format.
//
// Layout: magic "UNIDNN1\0", u32 version, u64 m, u32 n_in, u32 n_out,
// u32 n_chan, u32 n_p, u32 snr-policy kind, f64 snr lo, f64 snr hi, then
// little-endian real64 blocks: features (m x n_in), labels (m x n_out),
// class one-hot (m x n_chan), per-sample SNR (m).
#pragma once

#include <cstring>
#include <fstream>

#include "unidnn/common.hpp"
#include "unidnn/nn.hpp"

namespace unidnn {

struct SnrPolicy {
    enum class Kind { Fixed, Uniform };
    Kind kind = Kind::Uniform;
    double lo = 0.0;
    double hi = 20.0;

    static SnrPolicy fixed(double snr_db) { return {Kind::Fixed, snr_db, snr_db}; }
    static SnrPolicy uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
};

struct LabeledDataset {
    std::uint32_t version = 1;
    std::size_t n_p = 8;
    SnrPolicy policy;
    Tensor features;      // m x n_in
    Tensor labels;        // m x n_out (bit targets as 0.0/1.0)
    Tensor class_onehot;  // m x n_chan
    std::vector<double> snr_db;  // m

    std::size_t size() const { return features.rows(); }

    void check_consistent() const {
        require(features.rows() == labels.rows() && labels.rows() == class_onehot.rows() &&
                    class_onehot.rows() == snr_db.size(),
                "dataset: row counts disagree");
        require(features.all_finite(), "dataset: non-finite features");
    }
};

namespace detail {

inline constexpr char kDatasetMagic[8] = {'U', 'N', 'I', 'D', 'N', 'N', '1', '\0'};

inline void write_f64_block(std::ostream& os, const double* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_f64_block(std::istream& is, double* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
    ds.check_consistent();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
    os.write(detail::kDatasetMagic, 8);
    detail::write_u32(os, ds.version);
    detail::write_u64(os, ds.size());
    detail::write_u32(os, static_cast<std::uint32_t>(ds.features.row_width()));
    detail::write_u32(os, static_cast<std::uint32_t>(ds.labels.row_width()));
    detail::write_u32(os, static_cast<std::uint32_t>(ds.class_onehot.row_width()));
    detail::write_u32(os, static_cast<std::uint32_t>(ds.n_p));
    detail::write_u32(os, static_cast<std::uint32_t>(ds.policy.kind));
    detail::write_f64(os, ds.policy.lo);
    detail::write_f64(os, ds.policy.hi);
    detail::write_f64_block(os, ds.features.data.data(), ds.features.numel());
    detail::write_f64_block(os, ds.labels.data.data(), ds.labels.numel());
    detail::write_f64_block(os, ds.class_onehot.data.data(), ds.class_onehot.numel());
    detail::write_f64_block(os, ds.snr_db.data(), ds.snr_db.size());
    if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kDatasetMagic, 8) != 0)
        throw std::runtime_error("load_dataset: bad magic in " + path);
    LabeledDataset ds;
    ds.version = detail::read_u32(is);
    if (ds.version != 1) throw std::runtime_error("load_dataset: unsupported version");
    const std::uint64_t m = detail::read_u64(is);
    const std::uint32_t n_in = detail::read_u32(is);
    const std::uint32_t n_out = detail::read_u32(is);
    const std::uint32_t n_chan = detail::read_u32(is);
    ds.n_p = detail::read_u32(is);
    ds.policy.kind = static_cast<SnrPolicy::Kind>(detail::read_u32(is));
    ds.policy.lo = detail::read_f64(is);
    ds.policy.hi = detail::read_f64(is);
    ds.features = Tensor({static_cast<std::size_t>(m), n_in});
    ds.labels = Tensor({static_cast<std::size_t>(m), n_out});
    ds.class_onehot = Tensor({static_cast<std::size_t>(m), n_chan});
    ds.snr_db.resize(m);
    detail::read_f64_block(is, ds.features.data.data(), ds.features.numel());
    detail::read_f64_block(is, ds.labels.data.data(), ds.labels.numel());
    detail::read_f64_block(is, ds.class_onehot.data.data(), ds.class_onehot.numel());
    detail::read_f64_block(is, ds.snr_db.data(), ds.snr_db.size());
    if (!is) throw std::runtime_error("load_dataset: truncated file " + path);
    ds.check_consistent();
    return ds;
}

}  // namespace unidnn
