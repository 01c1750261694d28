#pragma once

// Named parameter registry plus finite-difference gradient checking.
//
// Models register leaf tensors under unique names; the optimizer walks the
// store in name order so updates are deterministic regardless of how the
// model assembled itself.

#include "gola/rng.hpp"
#include "gola/tensor.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gola::ad {

template <typename T>
class ParamStore {
public:
    Tensor<T>& create(const std::string& name, Shape shape, Arr<T> values) {
        auto [it, inserted] =
            params_.emplace(name, Tensor<T>::param(std::move(shape), std::move(values)));
        if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
        return it->second;
    }

    /// Gaussian init, scaled; the usual fan-in recipe is scale = 1/sqrt(fan_in).
    Tensor<T>& create_normal(const std::string& name, Shape shape, T scale, Pcg32& rng) {
        Arr<T> v(numel_of(shape));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<T>(rng.normal()) * scale;
        return create(name, std::move(shape), std::move(v));
    }

    /// Uniform init in [-bound, bound].
    Tensor<T>& create_uniform(const std::string& name, Shape shape, T bound, Pcg32& rng) {
        Arr<T> v(numel_of(shape));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = static_cast<T>(rng.uniform(-static_cast<double>(bound),
                                              static_cast<double>(bound)));
        return create(name, std::move(shape), std::move(v));
    }

    Tensor<T>& create_zeros(const std::string& name, Shape shape) {
        Arr<T> v = Arr<T>::Zero(numel_of(shape));
        return create(name, std::move(shape), std::move(v));
    }

    Tensor<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    size_t size() const { return params_.size(); }
    int64_t total_parameters() const {
        int64_t n = 0;
        for (const auto& [name, p] : params_) n += p.numel();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Tensor<T>> params_;  // ordered for deterministic iteration
};

template <typename T>
struct GradReport {
    T loss;
    std::map<std::string, Arr<T>> grads;  // one entry per parameter, zeros if unused
};

/// Evaluates loss_fn, backpropagates, and collects per-parameter gradients.
template <typename T, typename LossFn>
GradReport<T> forward_backward(ParamStore<T>& params, LossFn&& loss_fn) {
    Tensor<T> loss = loss_fn();
    loss.backward();
    GradReport<T> rep;
    rep.loss = loss.item();
    for (auto& [name, p] : params) rep.grads[name] = p.grad();
    return rep;
}

template <typename T>
struct GradCheckResult {
    T max_rel_err = T(0);
    std::string worst_param;
    int64_t worst_index = -1;
    T analytic = T(0);
    T numeric = T(0);
};

/// Central-difference check of every parameter entry against the tape.
/// Relative error uses max(1, |numeric|) in the denominator so near-zero
/// gradients compare absolutely.
template <typename T, typename LossFn>
GradCheckResult<T> grad_check(ParamStore<T>& params, LossFn&& loss_fn, T step = T(1e-5)) {
    GradReport<T> rep = forward_backward(params, loss_fn);
    GradCheckResult<T> res;
    for (auto& [name, p] : params) {
        Arr<T> base = p.values();
        const Arr<T>& analytic = rep.grads[name];
        for (Eigen::Index i = 0; i < base.size(); ++i) {
            Arr<T> bumped = base;
            bumped[i] = base[i] + step;
            p.set_values(bumped);
            T up = loss_fn().item();
            bumped[i] = base[i] - step;
            p.set_values(bumped);
            T down = loss_fn().item();
            p.set_values(base);
            T numeric = (up - down) / (T(2) * step);
            T rel = std::abs(analytic[i] - numeric) / std::max(T(1), std::abs(numeric));
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = name;
                res.worst_index = i;
                res.analytic = analytic[i];
                res.numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace gola::ad
