#pragma once

// Global multi-head self-attention in linear time. Keys and values are
// instance-normalized per channel, then each head accumulates the d_h x d_h
// kernel G_h = (1/N) sum_j ktilde_j^T vtilde_j and applies it to every
// query row. No N x N matrix is ever formed; cost is O(N * d_h^2) per head.

#include "gola/nn.hpp"
#include "gola/param_store.hpp"
#include "gola/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gola::attention {

using ad::ParamStore;
using ad::Tensor;
using ad::add_scalar;
using ad::concat;
using ad::divide;
using ad::matmul;
using ad::mean_axis;
using ad::scale;
using ad::sqrt;
using ad::square;
using ad::sub;
using ad::transpose;

constexpr double kInstanceEps = 1e-5;

/// Per-channel standardization over the point dimension, no learned affine.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& z) {
    auto mu = mean_axis(z, 0);  // {1, d}
    auto centered = sub(z, mu);
    auto var = mean_axis(square(centered), 0);
    return divide(centered, sqrt(add_scalar(var, T(kInstanceEps))));
}

template <typename T>
struct MultiHead {
    std::vector<Tensor<T>> w_q, w_k, w_v;  // per head, {C, d_h}, bias-free
    Tensor<T> w_out;       // {d_h*H, C}
    Tensor<T> final_proj;  // {C, C}, distinct from w_out
    int heads = 0, head_dim = 0, channels = 0;
    bool use_final_proj = true;

    static MultiHead make(ParamStore<T>& ps, const std::string& prefix, int channels,
                          int heads, int head_dim, Pcg32& rng, bool use_final_proj = true) {
        MultiHead a;
        a.heads = heads;
        a.head_dim = head_dim;
        a.channels = channels;
        a.use_final_proj = use_final_proj;
        const T bc = T(1) / std::sqrt(static_cast<T>(channels));
        for (int h = 0; h < heads; ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            a.w_q.push_back(ps.create_uniform(hp + ".wq", {channels, head_dim}, bc, rng));
            a.w_k.push_back(ps.create_uniform(hp + ".wk", {channels, head_dim}, bc, rng));
            a.w_v.push_back(ps.create_uniform(hp + ".wv", {channels, head_dim}, bc, rng));
        }
        const T bo = T(1) / std::sqrt(static_cast<T>(head_dim * heads));
        a.w_out = ps.create_uniform(prefix + ".wout", {head_dim * heads, channels}, bo, rng);
        if (use_final_proj)
            a.final_proj = ps.create_uniform(prefix + ".proj", {channels, channels}, bc, rng);
        return a;
    }

    /// One head: q (G_h), with G_h = (1/N) ktilde^T vtilde.
    Tensor<T> head_apply(const Tensor<T>& hp, int head) const {
        const T inv_n = T(1) / static_cast<T>(hp.dim(0));
        auto q = matmul(hp, w_q[static_cast<size_t>(head)]);
        auto kt = instance_norm(matmul(hp, w_k[static_cast<size_t>(head)]));
        auto vt = instance_norm(matmul(hp, w_v[static_cast<size_t>(head)]));
        auto g = scale(matmul(transpose(kt), vt), inv_n);  // {d_h, d_h}
        return matmul(q, g);
    }

    Tensor<T> operator()(const Tensor<T>& hp) const {
        std::vector<Tensor<T>> outs;
        for (int h = 0; h < heads; ++h) outs.push_back(head_apply(hp, h));
        auto cat = heads == 1 ? outs[0] : concat<T>(outs, 1);
        auto mixed = matmul(cat, w_out);
        return use_final_proj ? matmul(mixed, final_proj) : mixed;
    }
};

}  // namespace gola::attention
