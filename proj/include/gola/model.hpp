#pragma once

// End-to-end models over one sampled graph. All three share the same input
// contract (points, node features, radius graph with edge attributes) and
// produce one value per node, so the training harness can swap them freely.
//
//   Gola: Fourier encoder -> msgpass blocks -> global linear attention
//         -> neighborhood attention layer(s) -> affine head
//   Gkn:  lift -> T rounds of h = act(W h + mean_j kappa(e_ij) h_j) -> proj
//   Gcn:  lift -> T layers of h = act(W_self h + W_neigh mean_j h_j) -> proj

#include "gola/adapt.hpp"
#include "gola/attention.hpp"
#include "gola/gatlayer.hpp"
#include "gola/geometry.hpp"
#include "gola/msgpass.hpp"
#include "gola/nn.hpp"
#include "gola/spectral.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gola::model {

using ad::ParamStore;
using ad::Tensor;
using ad::add;
using ad::batched_matvec;
using ad::concat;
using ad::gather_rows;
using ad::gelu;
using ad::matmul;
using ad::segment_mean;

enum class ModelKind { gola, gkn, gcn };

inline const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::gola: return "gola";
        case ModelKind::gkn: return "gkn";
        case ModelKind::gcn: return "gcn";
    }
    return "?";
}

inline ModelKind kind_from_name(const std::string& s) {
    if (s == "gola") return ModelKind::gola;
    if (s == "gkn") return ModelKind::gkn;
    if (s == "gcn") return ModelKind::gcn;
    throw std::invalid_argument("unknown model kind: " + s);
}

struct ModelConfig {
    int c_in = 1;
    int c_target = 1;
    // gola
    int modes = 64;
    int channels = 64;
    int heads = 4;
    int head_dim = 16;
    int msgpass_blocks = 3;
    int residual_depth = 2;
    int gat_layers = 1;
    double freq_jitter = 0.01;
    bool final_proj = true;
    // gkn / gcn baselines
    int baseline_channels = 32;
    int baseline_layers = 4;
    int kernel_hidden = 64;
    bool baseline_activation = true;

    int d_e() const { return 4 + 2 * c_in; }
};

template <typename T>
struct Gola {
    spectral::Encoder<T> encoder;
    std::vector<msgpass::Block<T>> blocks;
    attention::MultiHead<T> attn;
    std::vector<gatlayer::Layer<T>> gats;

    static Gola make(ParamStore<T>& ps, const ModelConfig& cfg, Pcg32& rng) {
        Gola m;
        m.encoder = spectral::Encoder<T>::make(ps, "encoder", cfg.c_in, cfg.channels,
                                               cfg.modes, static_cast<T>(cfg.freq_jitter), rng);
        for (int b = 0; b < cfg.msgpass_blocks; ++b)
            m.blocks.push_back(msgpass::Block<T>::make(ps, "mp" + std::to_string(b),
                                                       cfg.channels, cfg.d_e(),
                                                       cfg.residual_depth, rng));
        m.attn = attention::MultiHead<T>::make(ps, "attn", cfg.channels, cfg.heads,
                                               cfg.head_dim, rng, cfg.final_proj);
        for (int l = 0; l < cfg.gat_layers; ++l)
            m.gats.push_back(gatlayer::Layer<T>::make(ps, "gat" + std::to_string(l),
                                                      cfg.channels, cfg.d_e(), cfg.c_target,
                                                      rng));
        return m;
    }

    Tensor<T> forward(const Tensor<T>& points, const Tensor<T>& f, const SpatialGraph& graph,
                      const Tensor<T>& edge_attr) const {
        auto h = encoder.encode(f, points);
        for (const auto& block : blocks) h = block(h, graph, edge_attr);
        h = attn(h);
        for (const auto& gat : gats) h = gat(h, graph, edge_attr);
        return gats.back().predict(h);
    }
};

template <typename T>
struct Gkn {
    nn::Linear<T> lift;   // (x, f) -> C
    nn::Mlp<T> kernel;    // e_ij -> C*C, shared across rounds
    Tensor<T> w;          // {C, C}, shared across rounds
    nn::Linear<T> proj;   // C -> C_target
    int rounds = 0;
    bool activation = true;

    static Gkn make(ParamStore<T>& ps, const ModelConfig& cfg, Pcg32& rng) {
        Gkn m;
        m.rounds = cfg.baseline_layers;
        m.activation = cfg.baseline_activation;
        const int c = cfg.baseline_channels;
        m.lift = nn::Linear<T>::make(ps, "lift", 2 + cfg.c_in, c, rng);
        m.kernel = nn::Mlp<T>::make(ps, "kernel", {cfg.d_e(), cfg.kernel_hidden, c * c}, rng);
        m.w = ps.create_uniform("w", {c, c}, T(1) / std::sqrt(static_cast<T>(c)), rng);
        m.proj = nn::Linear<T>::make(ps, "proj", c, cfg.c_target, rng);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& points, const Tensor<T>& f, const SpatialGraph& graph,
                      const Tensor<T>& edge_attr) const {
        auto h = lift(concat<T>({points, f}, 1));
        auto k = kernel(edge_attr);  // input-only, so computed once
        for (int t = 0; t < rounds; ++t) {
            auto msg = batched_matvec(k, gather_rows(h, graph.send));
            auto agg = segment_mean(msg, graph.offsets);
            h = add(matmul(h, w), agg);
            if (activation) h = gelu(h);
        }
        return proj(h);
    }
};

template <typename T>
struct Gcn {
    nn::Linear<T> lift;
    std::vector<Tensor<T>> w_self, w_neigh;  // per layer {C, C}
    std::vector<Tensor<T>> bias;             // per layer {1, C}
    nn::Linear<T> proj;
    bool activation = true;

    static Gcn make(ParamStore<T>& ps, const ModelConfig& cfg, Pcg32& rng) {
        Gcn m;
        m.activation = cfg.baseline_activation;
        const int c = cfg.baseline_channels;
        const T bc = T(1) / std::sqrt(static_cast<T>(c));
        m.lift = nn::Linear<T>::make(ps, "lift", 2 + cfg.c_in, c, rng);
        for (int t = 0; t < cfg.baseline_layers; ++t) {
            const std::string lp = "conv" + std::to_string(t);
            m.w_self.push_back(ps.create_uniform(lp + ".ws", {c, c}, bc, rng));
            m.w_neigh.push_back(ps.create_uniform(lp + ".wn", {c, c}, bc, rng));
            m.bias.push_back(ps.create_uniform(lp + ".b", {1, c}, bc, rng));
        }
        m.proj = nn::Linear<T>::make(ps, "proj", c, cfg.c_target, rng);
        return m;
    }

    Tensor<T> forward(const Tensor<T>& points, const Tensor<T>& f, const SpatialGraph& graph,
                      const Tensor<T>& /*edge_attr*/) const {
        auto h = lift(concat<T>({points, f}, 1));
        for (size_t t = 0; t < w_self.size(); ++t) {
            auto neigh = segment_mean(gather_rows(h, graph.send), graph.offsets);
            h = add(add(matmul(h, w_self[t]), matmul(neigh, w_neigh[t])), bias[t]);
            if (activation) h = gelu(h);
        }
        return proj(h);
    }
};

/// A model of any kind plus its parameter store, built deterministically
/// from (kind, config, seed).
template <typename T>
struct Built {
    ModelKind kind;
    ModelConfig config;
    std::unique_ptr<ParamStore<T>> params;
    std::variant<Gola<T>, Gkn<T>, Gcn<T>> net;

    Tensor<T> forward(const Tensor<T>& points, const Tensor<T>& f, const SpatialGraph& graph,
                      const Tensor<T>& edge_attr) const {
        return std::visit([&](const auto& m) { return m.forward(points, f, graph, edge_attr); },
                          net);
    }

    Tensor<T> forward(const PointSet& pts, const RowMatd& f, const SpatialGraph& graph) const {
        return forward(to_tensor(pts.coords), to_tensor(f), graph, to_tensor(graph.edge_attr));
    }

    int64_t param_count() const { return params->total_parameters(); }
};

template <typename T>
Built<T> build_model(ModelKind kind, const ModelConfig& cfg, uint64_t seed) {
    Built<T> b;
    b.kind = kind;
    b.config = cfg;
    b.params = std::make_unique<ParamStore<T>>();
    Pcg32 rng(mix_seed(seed, 0x6d6f64656cULL));
    switch (kind) {
        case ModelKind::gola: b.net = Gola<T>::make(*b.params, cfg, rng); break;
        case ModelKind::gkn: b.net = Gkn<T>::make(*b.params, cfg, rng); break;
        case ModelKind::gcn: b.net = Gcn<T>::make(*b.params, cfg, rng); break;
    }
    return b;
}

}  // namespace gola::model
