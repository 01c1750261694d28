#pragma once

// Small trainable building blocks shared by the models: linear layers and
// GELU MLPs, with weights registered in a ParamStore under dotted names.

#include "gola/param_store.hpp"
#include "gola/tensor.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gola::nn {

using ad::ParamStore;
using ad::Shape;
using ad::Tensor;
using ad::add;
using ad::gelu;
using ad::matmul;

/// y = x W + b with W stored {in, out}; init uniform +-1/sqrt(fan_in).
template <typename T>
struct Linear {
    Tensor<T> w;  // {in, out}
    Tensor<T> b;  // {1, out}

    static Linear make(ParamStore<T>& ps, const std::string& prefix, int in, int out,
                       Pcg32& rng) {
        const T bound = T(1) / std::sqrt(static_cast<T>(in));
        Linear l;
        l.w = ps.create_uniform(prefix + ".w", {in, out}, bound, rng);
        l.b = ps.create_uniform(prefix + ".b", {1, out}, bound, rng);
        return l;
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return add(matmul(x, w), b); }
};

/// Dense stack with GELU between layers (none after the last).
template <typename T>
struct Mlp {
    std::vector<Linear<T>> layers;

    static Mlp make(ParamStore<T>& ps, const std::string& prefix,
                    const std::vector<int>& dims, Pcg32& rng) {
        Mlp m;
        for (size_t i = 0; i + 1 < dims.size(); ++i)
            m.layers.push_back(Linear<T>::make(ps, prefix + ".l" + std::to_string(i),
                                               dims[i], dims[i + 1], rng));
        return m;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        for (size_t i = 0; i < layers.size(); ++i) {
            x = layers[i](x);
            if (i + 1 < layers.size()) x = gelu(x);
        }
        return x;
    }
};

}  // namespace gola::nn
