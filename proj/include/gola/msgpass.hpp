#pragma once

// Moment-aggregating message passing. Each directed edge (i, j) produces a
// learned message from (h_i, h_j, e_ij); node i then aggregates its incoming
// messages into concat(mean, max, min, std) and feeds that, with h_i,
// through a post-aggregation network and a residual MLP stack.

#include "gola/adapt.hpp"
#include "gola/geometry.hpp"
#include "gola/nn.hpp"
#include "gola/tensor.hpp"

#include <string>
#include <vector>

namespace gola::msgpass {

using ad::Complex;
using ad::ParamStore;
using ad::Tensor;
using ad::add;
using ad::add_scalar;
using ad::concat;
using ad::gather_rows;
using ad::segment_max;
using ad::segment_mean;
using ad::segment_min;
using ad::sqrt;
using ad::square;
using ad::sub;

constexpr double kStdEps = 1e-8;  // smooths sqrt at zero variance

template <typename T>
struct Block {
    nn::Mlp<T> g_theta;      // message net: 2C + d_e -> C
    nn::Mlp<T> gamma_theta;  // update net: C + 4C -> C
    std::vector<nn::Mlp<T>> residual;  // C -> C blocks applied as h + mlp(h)
    int channels = 0;

    static Block make(ParamStore<T>& ps, const std::string& prefix, int channels, int d_e,
                      int residual_depth, Pcg32& rng) {
        Block b;
        b.channels = channels;
        b.g_theta = nn::Mlp<T>::make(ps, prefix + ".msg",
                                     {2 * channels + d_e, channels, channels}, rng);
        b.gamma_theta = nn::Mlp<T>::make(ps, prefix + ".upd",
                                         {5 * channels, channels, channels}, rng);
        for (int r = 0; r < residual_depth; ++r)
            b.residual.push_back(nn::Mlp<T>::make(
                ps, prefix + ".res" + std::to_string(r), {channels, channels, channels}, rng));
        return b;
    }

    /// m_{ij} = g(concat(h_i, h_j, e_ij)) per edge, rows in graph edge order.
    Tensor<T> messages(const Tensor<T>& h, const SpatialGraph& graph,
                       const Tensor<T>& edge_attr) const {
        auto h_i = gather_rows(h, graph.recv);
        auto h_j = gather_rows(h, graph.send);
        return g_theta(concat<T>({h_i, h_j, edge_attr}, 1));
    }

    /// Per receiving node: concat(mean, max, min, std) over incoming
    /// messages; isolated nodes get zero rows. std is population std with
    /// sqrt(var + eps) - sqrt(eps) smoothing so it stays differentiable
    /// and exactly zero for single-message nodes.
    Tensor<T> aggregate(const Tensor<T>& m, const SpatialGraph& graph) const {
        const auto& off = graph.offsets;
        auto mean_m = segment_mean(m, off);
        auto max_m = segment_max(m, off);
        auto min_m = segment_min(m, off);
        // centered population variance; never negative, so sqrt is safe
        auto centered = sub(m, gather_rows(mean_m, graph.recv));
        auto var = segment_mean(square(centered), off);
        auto std_m = add_scalar(sqrt(add_scalar(var, T(kStdEps))), -std::sqrt(T(kStdEps)));
        return concat<T>({mean_m, max_m, min_m, std_m}, 1);
    }

    /// h'_i = gamma(concat(h_i, agg_i)), then the residual stack.
    Tensor<T> update(const Tensor<T>& h, const Tensor<T>& agg) const {
        auto out = gamma_theta(concat<T>({h, agg}, 1));
        for (const auto& res : residual) out = add(out, res(out));
        return out;
    }

    Tensor<T> operator()(const Tensor<T>& h, const SpatialGraph& graph,
                         const Tensor<T>& edge_attr) const {
        return update(h, aggregate(messages(h, graph, edge_attr), graph));
    }
};

}  // namespace gola::msgpass
