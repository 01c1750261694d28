#pragma once

// Neighborhood attention update with edge features and a skip connection,
// plus the final linear prediction head. Attention coefficients are scaled
// dot products softmaxed over each node's incoming edges:
//
//   l_ij = < W4 h_i, W5 h_j + W3 e_ij > / sqrt(C)
//   a_ij = softmax_{j in N(i)} l_ij
//   h'_i = W1 h_i + sum_j a_ij (W2 h_j + W3 e_ij) + Ws h_i

#include "gola/adapt.hpp"
#include "gola/geometry.hpp"
#include "gola/nn.hpp"
#include "gola/tensor.hpp"

#include <cmath>
#include <string>

namespace gola::gatlayer {

using ad::ParamStore;
using ad::Tensor;
using ad::add;
using ad::gather_rows;
using ad::matmul;
using ad::mul;
using ad::scale;
using ad::segment_softmax;
using ad::segment_sum;
using ad::sum_axis;

template <typename T>
struct Layer {
    Tensor<T> w1, w2, w4, w5, ws;  // {C, C}
    Tensor<T> w3;                  // {d_e, C}
    nn::Linear<T> head;            // C -> C_target affine
    int channels = 0;

    static Layer make(ParamStore<T>& ps, const std::string& prefix, int channels, int d_e,
                      int c_target, Pcg32& rng) {
        Layer l;
        l.channels = channels;
        const T bc = T(1) / std::sqrt(static_cast<T>(channels));
        const T be = T(1) / std::sqrt(static_cast<T>(d_e));
        l.w1 = ps.create_uniform(prefix + ".w1", {channels, channels}, bc, rng);
        l.w2 = ps.create_uniform(prefix + ".w2", {channels, channels}, bc, rng);
        l.w3 = ps.create_uniform(prefix + ".w3", {d_e, channels}, be, rng);
        l.w4 = ps.create_uniform(prefix + ".w4", {channels, channels}, bc, rng);
        l.w5 = ps.create_uniform(prefix + ".w5", {channels, channels}, bc, rng);
        l.ws = ps.create_uniform(prefix + ".ws", {channels, channels}, bc, rng);
        l.head = nn::Linear<T>::make(ps, prefix + ".head", channels, c_target, rng);
        return l;
    }

    /// Pre-softmax scores, one per directed edge, in graph edge order.
    Tensor<T> attention_logits(const Tensor<T>& h, const SpatialGraph& graph,
                               const Tensor<T>& edge_attr) const {
        auto lhs = gather_rows(matmul(h, w4), graph.recv);
        auto rhs = add(gather_rows(matmul(h, w5), graph.send), matmul(edge_attr, w3));
        auto dots = sum_axis(mul(lhs, rhs), 1);  // {E, 1}
        return scale(dots, T(1) / std::sqrt(static_cast<T>(channels)));
    }

    /// Softmax over each receiving node's incoming edges (max-subtracted).
    Tensor<T> attention_coeffs(const Tensor<T>& h, const SpatialGraph& graph,
                               const Tensor<T>& edge_attr) const {
        return segment_softmax(attention_logits(h, graph, edge_attr), graph.offsets);
    }

    /// Attention-weighted neighbor sum with self terms; isolated nodes keep
    /// only W1 h_i + Ws h_i.
    Tensor<T> gat_update(const Tensor<T>& h, const Tensor<T>& alpha,
                         const SpatialGraph& graph, const Tensor<T>& edge_attr) const {
        auto per_edge = add(gather_rows(matmul(h, w2), graph.send), matmul(edge_attr, w3));
        auto weighted = mul(alpha, per_edge);  // {E,1} broadcasts across columns
        auto neigh = segment_sum(weighted, graph.offsets);
        return add(add(matmul(h, w1), neigh), matmul(h, ws));
    }

    Tensor<T> operator()(const Tensor<T>& h, const SpatialGraph& graph,
                         const Tensor<T>& edge_attr) const {
        return gat_update(h, attention_coeffs(h, graph, edge_attr), graph, edge_attr);
    }

    /// Final affine projection to the target channel count.
    Tensor<T> predict(const Tensor<T>& h) const { return head(h); }
};

}  // namespace gola::gatlayer
