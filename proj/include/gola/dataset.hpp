#pragma once

// Binary container for datasets and model checkpoints, plus grid-to-point
// subsampling. Layout:
//
//   bytes 0..3   magic "GOLA"
//   u32 LE       format version (currently 1)
//   u64 LE       metadata length in bytes
//   ...          JSON metadata (UTF-8); its "arrays" list declares name,
//                rows, cols of each payload array in order
//   ...          payload: row-major float32 LE arrays, concatenated
//
// Values are generated at 64-bit and stored at 32-bit, so load(save(x))
// equals x after one downcast and files re-save bit-identically.

#include "gola/geometry.hpp"
#include "gola/param_store.hpp"
#include "gola/solvers.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gola::io {

class BadMagic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VersionMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TruncatedPayload : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr uint32_t kFormatVersion = 1;
inline constexpr char kMagic[4] = {'G', 'O', 'L', 'A'};

struct NamedArray {
    std::string name;
    RowMatd values;
};

struct Container {
    nlohmann::json metadata;
    std::vector<NamedArray> arrays;
};

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint64_t get_uint(const std::string& buf, size_t pos, int bytes) {
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    return v;
}

inline void put_f32(std::string& out, float v) {
    static_assert(sizeof(float) == 4);
    char raw[4];
    std::memcpy(raw, &v, 4);
    if constexpr (std::endian::native == std::endian::big) {
        std::swap(raw[0], raw[3]);
        std::swap(raw[1], raw[2]);
    }
    out.append(raw, 4);
}

inline float get_f32(const std::string& buf, size_t pos) {
    char raw[4];
    std::memcpy(raw, buf.data() + pos, 4);
    if constexpr (std::endian::native == std::endian::big) {
        std::swap(raw[0], raw[3]);
        std::swap(raw[1], raw[2]);
    }
    float v;
    std::memcpy(&v, raw, 4);
    return v;
}

}  // namespace detail

inline std::string encode_container(const nlohmann::json& metadata,
                                    const std::vector<NamedArray>& arrays) {
    nlohmann::json meta = metadata;
    meta["arrays"] = nlohmann::json::array();
    for (const auto& a : arrays)
        meta["arrays"].push_back({{"name", a.name},
                                  {"rows", a.values.rows()},
                                  {"cols", a.values.cols()}});
    const std::string meta_str = meta.dump();
    std::string out;
    out.append(kMagic, 4);
    detail::put_u32(out, kFormatVersion);
    detail::put_u64(out, meta_str.size());
    out += meta_str;
    for (const auto& a : arrays)
        for (Eigen::Index i = 0; i < a.values.rows(); ++i)
            for (Eigen::Index j = 0; j < a.values.cols(); ++j)
                detail::put_f32(out, static_cast<float>(a.values(i, j)));
    return out;
}

inline Container decode_container(const std::string& buf) {
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw BadMagic("container: bad magic");
    if (buf.size() < 16) throw TruncatedPayload("container: header truncated");
    const auto version = static_cast<uint32_t>(detail::get_uint(buf, 4, 4));
    if (version != kFormatVersion)
        throw VersionMismatch("container: version " + std::to_string(version) +
                              ", expected " + std::to_string(kFormatVersion));
    const uint64_t meta_len = detail::get_uint(buf, 8, 8);
    if (buf.size() < 16 + meta_len) throw TruncatedPayload("container: metadata truncated");
    Container c;
    try {
        c.metadata = nlohmann::json::parse(buf.substr(16, meta_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw TruncatedPayload(std::string("container: metadata unparsable: ") + e.what());
    }
    if (!c.metadata.contains("arrays") || !c.metadata["arrays"].is_array())
        throw TruncatedPayload("container: metadata lacks arrays declaration");
    size_t pos = 16 + meta_len;
    for (const auto& decl : c.metadata["arrays"]) {
        NamedArray a;
        a.name = decl.at("name").get<std::string>();
        const auto rows = decl.at("rows").get<Eigen::Index>();
        const auto cols = decl.at("cols").get<Eigen::Index>();
        const size_t need = static_cast<size_t>(rows) * static_cast<size_t>(cols) * 4;
        if (buf.size() - pos < need)
            throw TruncatedPayload("container: payload short for array " + a.name);
        a.values.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j, pos += 4)
                a.values(i, j) = static_cast<double>(detail::get_f32(buf, pos));
        c.arrays.push_back(std::move(a));
    }
    if (pos != buf.size())
        throw TruncatedPayload("container: payload longer than declared");
    return c;
}

inline void save_container(const std::string& path, const nlohmann::json& metadata,
                           const std::vector<NamedArray>& arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const std::string buf = encode_container(metadata, arrays);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_container(buf);
}

// ---------------------------------------------------------------------------
// datasets

struct Dataset {
    std::string pde_tag;
    int grid_res = 0;
    uint64_t seed = 0;
    double target_std = 1.0;  // std of raw targets; stored u = raw u / target_std
    nlohmann::json spec_echo;
    std::vector<pde::FieldPair> pairs;

    int count() const { return static_cast<int>(pairs.size()); }
};

/// Generates `n` pairs and rescales all targets by one shared factor so the
/// pooled target standard deviation is 1 (inputs stay raw). The factor is
/// recorded so consumers can undo it.
inline Dataset make_dataset(const std::string& pde_tag, const pde::GrfSpec& spec, int n) {
    Dataset ds;
    ds.pde_tag = pde_tag;
    ds.grid_res = spec.grid_res;
    ds.seed = spec.seed;
    ds.spec_echo = {{"grid_res", spec.grid_res}, {"tau", spec.tau}, {"alpha", spec.alpha},
                    {"seed", spec.seed}};
    ds.pairs = pde::generate(pde_tag, spec, n);
    double sum = 0, sq = 0, cnt = 0;
    for (const auto& p : ds.pairs) {
        sum += p.u_grid.sum();
        sq += p.u_grid.array().square().sum();
        cnt += static_cast<double>(p.u_grid.size());
    }
    const double mean = sum / cnt;
    const double var = sq / cnt - mean * mean;
    ds.target_std = var > 1e-24 ? std::sqrt(var) : 1.0;
    for (auto& p : ds.pairs) p.u_grid /= ds.target_std;
    return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    nlohmann::json meta = {{"kind", "dataset"},
                           {"pde_tag", ds.pde_tag},
                           {"grid_res", ds.grid_res},
                           {"count", ds.count()},
                           {"seed", ds.seed},
                           {"target_std", ds.target_std},
                           {"spec", ds.spec_echo}};
    meta["pair_metadata"] = nlohmann::json::array();
    std::vector<NamedArray> arrays;
    for (int i = 0; i < ds.count(); ++i) {
        meta["pair_metadata"].push_back(ds.pairs[static_cast<size_t>(i)].gen_metadata);
        arrays.push_back({"f" + std::to_string(i), ds.pairs[static_cast<size_t>(i)].f_grid});
        arrays.push_back({"u" + std::to_string(i), ds.pairs[static_cast<size_t>(i)].u_grid});
    }
    save_container(path, meta, arrays);
}

inline Dataset load_dataset(const std::string& path) {
    Container c = load_container(path);
    if (c.metadata.value("kind", "") != "dataset")
        throw std::runtime_error("not a dataset file: " + path);
    Dataset ds;
    ds.pde_tag = c.metadata.at("pde_tag").get<std::string>();
    ds.grid_res = c.metadata.at("grid_res").get<int>();
    ds.seed = c.metadata.at("seed").get<uint64_t>();
    ds.target_std = c.metadata.at("target_std").get<double>();
    ds.spec_echo = c.metadata.value("spec", nlohmann::json::object());
    const int count = c.metadata.at("count").get<int>();
    if (static_cast<int>(c.arrays.size()) != 2 * count)
        throw TruncatedPayload("dataset: array count does not match declared pair count");
    for (int i = 0; i < count; ++i) {
        pde::FieldPair p;
        p.pde_tag = ds.pde_tag;
        p.f_grid = c.arrays[static_cast<size_t>(2 * i)].values;
        p.u_grid = c.arrays[static_cast<size_t>(2 * i + 1)].values;
        if (c.metadata.contains("pair_metadata") &&
            i < static_cast<int>(c.metadata["pair_metadata"].size()))
            p.gen_metadata = c.metadata["pair_metadata"][static_cast<size_t>(i)];
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// grid-to-point subsampling

struct SubsampledPair {
    PointSet points;
    Eigen::VectorXd f_values;
    Eigen::VectorXd u_values;
};

/// Samples `density` grid nodes and gathers paired (f, u) values at them.
/// Node indices are recovered from coordinates by rounding, so values match
/// direct grid lookups exactly.
inline SubsampledPair subsample(const pde::FieldPair& pair, int density, uint64_t seed) {
    const int r = static_cast<int>(pair.f_grid.rows());
    SubsampledPair out;
    out.points = sample_points(r, density, seed);
    out.f_values.resize(density);
    out.u_values.resize(density);
    for (int k = 0; k < density; ++k) {
        const int i = static_cast<int>(std::lround(out.points.coords(k, 0) * (r - 1)));
        const int j = static_cast<int>(std::lround(out.points.coords(k, 1) * (r - 1)));
        out.f_values(k) = pair.f_grid(i, j);
        out.u_values(k) = pair.u_grid(i, j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpoints (same container, parameter tensors as the named arrays)

template <typename T>
void save_checkpoint(const std::string& path, const ad::ParamStore<T>& params,
                     const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json meta = extra;
    meta["kind"] = "checkpoint";
    std::vector<NamedArray> arrays;
    for (const auto& [name, tensor] : params) {
        const auto& v = tensor.values();
        const Eigen::Index rows = tensor.shape().empty() ? 1 : tensor.shape()[0];
        const Eigen::Index cols = v.size() / rows;
        NamedArray a;
        a.name = name;
        a.values.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                a.values(i, j) = static_cast<double>(v[i * cols + j]);
        arrays.push_back(std::move(a));
    }
    save_container(path, meta, arrays);
}

/// Loads parameter values into an existing store; every array must match a
/// parameter of the same name and shape.
template <typename T>
nlohmann::json load_checkpoint(const std::string& path, ad::ParamStore<T>& params) {
    Container c = load_container(path);
    if (c.metadata.value("kind", "") != "checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    for (const auto& a : c.arrays) {
        if (!params.contains(a.name))
            throw std::runtime_error("checkpoint: unknown parameter " + a.name);
        auto& t = params.at(a.name);
        const Eigen::Index rows = a.values.rows(), cols = a.values.cols();
        if (rows * cols != t.values().size())
            throw std::runtime_error("checkpoint: shape mismatch for " + a.name);
        ad::Arr<T> v(rows * cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                v[i * cols + j] = static_cast<T>(a.values(i, j));
        t.set_values(v);
    }
    return c.metadata;
}

}  // namespace gola::io
