#pragma once

// Reverse-mode autodiff over dense Eigen-backed tensors.
//
// A Tensor<T> is a value-semantic handle to a graph node. Building an
// expression records the node; backward(loss) runs the tape in reverse
// topological order and accumulates gradients into every reachable node
// that requires them. Rank is at most 3; matrix-shaped ops (matmul, axis
// reductions, gather/scatter, segment ops) require rank 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace gola::ad {

using Shape = std::vector<int>;

template <typename T>
using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;

template <typename T>
using CMatMap = Eigen::Map<const RowMat<T>>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

[[noreturn]] inline void op_fail(const char* op, const std::string& msg) {
    throw std::invalid_argument(std::string(op) + ": " + msg);
}

template <typename T>
struct Node {
    Shape shape;
    Arr<T> value;
    Arr<T> grad;  // sized on demand during backward
    bool requires_grad = false;  // leaf flag
    bool needs_grad = false;     // true if any leaf below requires grad
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backprop;
    const char* op = "leaf";

    int64_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad = Arr<T>::Zero(value.size());
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Shape shape, Arr<T> values) {
        return make_leaf(std::move(shape), std::move(values), false);
    }
    static Tensor param(Shape shape, Arr<T> values) {
        return make_leaf(std::move(shape), std::move(values), true);
    }
    static Tensor scalar(T v) {
        Arr<T> a(1);
        a[0] = v;
        return make_leaf({1}, std::move(a), false);
    }
    static Tensor zeros(Shape shape) {
        int64_t n = numel_of(shape);
        return make_leaf(std::move(shape), Arr<T>::Zero(n), false);
    }

    bool valid() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return n_->numel(); }
    const Arr<T>& values() const { return n_->value; }
    T item() const {
        if (numel() != 1) op_fail("item", "tensor is not scalar, shape " + shape_str(shape()));
        return n_->value[0];
    }
    bool requires_grad() const { return n_->requires_grad; }

    /// Gradient after backward(); zeros if this tensor was never touched.
    Arr<T> grad() const {
        if (n_->grad.size() == n_->value.size()) return n_->grad;
        return Arr<T>::Zero(n_->value.size());
    }

    /// Replace the stored values of a leaf (optimizer updates between steps).
    void set_values(const Arr<T>& v) {
        if (v.size() != n_->value.size())
            op_fail("set_values", "size mismatch");
        n_->value = v;
    }

    std::shared_ptr<Node<T>> node() const { return n_; }

    /// Runs reverse-mode accumulation from this scalar.
    void backward() const {
        if (numel() != 1) op_fail("backward", "loss must be scalar, shape " + shape_str(shape()));
        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        topo(n_.get(), seen, order);
        for (Node<T>* n : order)
            if (n->needs_grad || n->requires_grad) {
                n->grad = Arr<T>::Zero(n->value.size());
            }
        n_->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backprop && n->needs_grad) n->backprop(*n);
        }
    }

    static Tensor from_node(std::shared_ptr<Node<T>> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    static Tensor make_leaf(Shape shape, Arr<T> values, bool requires_grad) {
        if (numel_of(shape) != values.size())
            op_fail("tensor", "shape " + shape_str(shape) + " does not match value count " +
                                  std::to_string(values.size()));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        n->needs_grad = requires_grad;
        return from_node(std::move(n));
    }

    static void topo(Node<T>* n, std::unordered_set<Node<T>*>& seen,
                     std::vector<Node<T>*>& order) {
        // Iterative post-order DFS; graphs can be deep over a training batch.
        std::vector<std::pair<Node<T>*, size_t>> stack{{n, 0}};
        if (!seen.insert(n).second) return;
        while (!stack.empty()) {
            auto& [cur, idx] = stack.back();
            if (idx < cur->inputs.size()) {
                Node<T>* child = cur->inputs[idx++].get();
                if (seen.insert(child).second) stack.push_back({child, 0});
            } else {
                order.push_back(cur);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> new_node(const char* op, Shape shape, Arr<T> value,
                                  std::vector<std::shared_ptr<Node<T>>> inputs) {
    auto n = std::make_shared<Node<T>>();
    n->op = op;
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (auto& in : n->inputs)
        if (in->needs_grad) n->needs_grad = true;
    return n;
}

template <typename T>
void add_grad(const std::shared_ptr<Node<T>>& n, const Arr<T>& g) {
    if (!n->needs_grad && !n->requires_grad) return;
    n->ensure_grad();
    n->grad += g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops (shapes must match exactly; see broadcast_to below)

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> binary_elementwise(const char* op, const Tensor<T>& a, const Tensor<T>& b,
                             FwdFn fwd, BwdFn bwd) {
    if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
    auto na = a.node();
    auto nb = b.node();
    Arr<T> out = fwd(na->value, nb->value);
    auto n = detail::new_node<T>(op, a.shape(), std::move(out), {na, nb});
    if (n->needs_grad) {
        n->backprop = [na, nb, bwd](Node<T>& self) {
            auto [ga, gb] = bwd(self.grad, na->value, nb->value, self.value);
            detail::add_grad(na, ga);
            detail::add_grad(nb, gb);
        };
    }
    return Tensor<T>::from_node(n);
}

/// Replicates a {1}, {1,K} or {N,1} tensor to the requested rank-2 shape.
/// Backward reduces (sums) over the replicated axis.
template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& target) {
    if (a.shape() == target) return a;
    if (target.size() != 2) {
        // Scalar onto a flat shape: treat the target as a single row.
        if (a.numel() != 1 || target.empty()) shape_fail("broadcast_to", a.shape(), target);
        auto flat = broadcast_to(a, Shape{1, static_cast<int>(numel_of(target))});
        return reshape(flat, target);
    }
    const int rows = target[0], cols = target[1];
    auto na = a.node();
    enum class Kind { Scalar, Row, Col } kind;
    if (a.numel() == 1)
        kind = Kind::Scalar;
    else if (a.rank() == 2 && a.dim(0) == 1 && a.dim(1) == cols)
        kind = Kind::Row;
    else if (a.rank() == 2 && a.dim(1) == 1 && a.dim(0) == rows)
        kind = Kind::Col;
    else
        shape_fail("broadcast_to", a.shape(), target);

    Arr<T> out(static_cast<int64_t>(rows) * cols);
    MatMap<T> m(out.data(), rows, cols);
    if (kind == Kind::Scalar)
        m.setConstant(na->value[0]);
    else if (kind == Kind::Row)
        m = CMatMap<T>(na->value.data(), 1, cols).replicate(rows, 1);
    else
        m = CMatMap<T>(na->value.data(), rows, 1).replicate(1, cols);

    auto n = detail::new_node<T>("broadcast_to", {rows, cols}, std::move(out), {na});
    if (n->needs_grad) {
        n->backprop = [na, rows, cols, kind](Node<T>& self) {
            CMatMap<T> g(self.grad.data(), rows, cols);
            Arr<T> ga(na->value.size());
            if (kind == Kind::Scalar)
                ga[0] = g.sum();
            else if (kind == Kind::Row)
                MatMap<T>(ga.data(), 1, cols) = g.colwise().sum();
            else
                MatMap<T>(ga.data(), rows, 1) = g.rowwise().sum();
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(n);
}

namespace detail {
// Promotes mismatched operands when one side is scalar / row / column.
template <typename T>
void promote(const char* op, Tensor<T>& a, Tensor<T>& b) {
    if (a.shape() == b.shape()) return;
    auto broadcastable = [](const Tensor<T>& x, const Tensor<T>& onto) {
        if (!onto.rank()) return false;
        if (x.numel() == 1) return true;
        if (onto.rank() != 2 || x.rank() != 2) return false;
        return (x.dim(0) == 1 && x.dim(1) == onto.dim(1)) ||
               (x.dim(1) == 1 && x.dim(0) == onto.dim(0));
    };
    if (broadcastable(b, a))
        b = broadcast_to(b, a.shape());
    else if (broadcastable(a, b))
        a = broadcast_to(a, b.shape());
    else
        shape_fail(op, a.shape(), b.shape());
}
}  // namespace detail

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    detail::promote("add", a, b);
    return binary_elementwise<T>(
        "add", a, b, [](const Arr<T>& x, const Arr<T>& y) -> Arr<T> { return x + y; },
        [](const Arr<T>& g, const Arr<T>&, const Arr<T>&, const Arr<T>&) {
            return std::pair<Arr<T>, Arr<T>>(g, g);
        });
}

template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
    detail::promote("sub", a, b);
    return binary_elementwise<T>(
        "sub", a, b, [](const Arr<T>& x, const Arr<T>& y) -> Arr<T> { return x - y; },
        [](const Arr<T>& g, const Arr<T>&, const Arr<T>&, const Arr<T>&) {
            return std::pair<Arr<T>, Arr<T>>(g, Arr<T>(-g));
        });
}

template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    detail::promote("mul", a, b);
    return binary_elementwise<T>(
        "mul", a, b, [](const Arr<T>& x, const Arr<T>& y) -> Arr<T> { return x * y; },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>& y, const Arr<T>&) {
            return std::pair<Arr<T>, Arr<T>>(Arr<T>(g * y), Arr<T>(g * x));
        });
}

template <typename T>
Tensor<T> divide(Tensor<T> a, Tensor<T> b) {
    detail::promote("div", a, b);
    return binary_elementwise<T>(
        "div", a, b, [](const Arr<T>& x, const Arr<T>& y) -> Arr<T> { return x / y; },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>& y, const Arr<T>&) {
            return std::pair<Arr<T>, Arr<T>>(Arr<T>(g / y), Arr<T>(-g * x / (y * y)));
        });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// elementwise unary ops

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> unary_elementwise(const char* op, const Tensor<T>& a, FwdFn fwd, BwdFn bwd) {
    auto na = a.node();
    Arr<T> out = fwd(na->value);
    auto n = detail::new_node<T>(op, a.shape(), std::move(out), {na});
    if (n->needs_grad) {
        n->backprop = [na, bwd](Node<T>& self) {
            detail::add_grad(na, Arr<T>(bwd(self.grad, na->value, self.value)));
        };
    }
    return Tensor<T>::from_node(n);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    return unary_elementwise<T>(
        "scale", a, [c](const Arr<T>& x) -> Arr<T> { return x * c; },
        [c](const Arr<T>& g, const Arr<T>&, const Arr<T>&) -> Arr<T> { return g * c; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) { return scale(a, T(-1)); }

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    return unary_elementwise<T>(
        "add_scalar", a, [c](const Arr<T>& x) -> Arr<T> { return x + c; },
        [](const Arr<T>& g, const Arr<T>&, const Arr<T>&) -> Arr<T> { return g; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "exp", a, [](const Arr<T>& x) -> Arr<T> { return x.exp(); },
        [](const Arr<T>& g, const Arr<T>&, const Arr<T>& y) -> Arr<T> { return g * y; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "sqrt", a, [](const Arr<T>& x) -> Arr<T> { return x.sqrt(); },
        [](const Arr<T>& g, const Arr<T>&, const Arr<T>& y) -> Arr<T> {
            return g / (T(2) * y);
        });
}

template <typename T>
Tensor<T> sin(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "sin", a, [](const Arr<T>& x) -> Arr<T> { return x.sin(); },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>&) -> Arr<T> {
            return g * x.cos();
        });
}

template <typename T>
Tensor<T> cos(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "cos", a, [](const Arr<T>& x) -> Arr<T> { return x.cos(); },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>&) -> Arr<T> {
            return -g * x.sin();
        });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "square", a, [](const Arr<T>& x) -> Arr<T> { return x * x; },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>&) -> Arr<T> {
            return T(2) * g * x;
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "relu", a, [](const Arr<T>& x) -> Arr<T> { return x.max(T(0)); },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>&) -> Arr<T> {
            return (x > T(0)).select(g, Arr<T>::Zero(g.size()));
        });
}

/// Exact GELU, x * Phi(x) with the Gaussian CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    return unary_elementwise<T>(
        "gelu", a,
        [](const Arr<T>& x) -> Arr<T> {
            const T inv_sqrt2 = T(0.70710678118654752440);
            Arr<T> y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i)
                y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
            return y;
        },
        [](const Arr<T>& g, const Arr<T>& x, const Arr<T>&) -> Arr<T> {
            const T inv_sqrt2 = T(0.70710678118654752440);
            const T inv_sqrt2pi = T(0.39894228040143267794);
            Arr<T> d(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
                T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
                d[i] = cdf + x[i] * pdf;
            }
            return Arr<T>(g * d);
        });
}

// ---------------------------------------------------------------------------
// matrix ops

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        shape_fail("matmul", a.shape(), b.shape());
    auto na = a.node();
    auto nb = b.node();
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    Arr<T> out(static_cast<int64_t>(n) * m);
    MatMap<T>(out.data(), n, m).noalias() =
        CMatMap<T>(na->value.data(), n, k) * CMatMap<T>(nb->value.data(), k, m);
    auto node = detail::new_node<T>("matmul", {n, m}, std::move(out), {na, nb});
    if (node->needs_grad) {
        node->backprop = [na, nb, n, k, m](Node<T>& self) {
            CMatMap<T> g(self.grad.data(), n, m);
            if (na->needs_grad || na->requires_grad) {
                Arr<T> ga(static_cast<int64_t>(n) * k);
                MatMap<T>(ga.data(), n, k).noalias() =
                    g * CMatMap<T>(nb->value.data(), k, m).transpose();
                detail::add_grad(na, ga);
            }
            if (nb->needs_grad || nb->requires_grad) {
                Arr<T> gb(static_cast<int64_t>(k) * m);
                MatMap<T>(gb.data(), k, m).noalias() =
                    CMatMap<T>(na->value.data(), n, k).transpose() * g;
                detail::add_grad(nb, gb);
            }
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) op_fail("transpose", "requires rank 2, got " + shape_str(a.shape()));
    auto na = a.node();
    const int n = a.dim(0), m = a.dim(1);
    Arr<T> out(static_cast<int64_t>(n) * m);
    MatMap<T>(out.data(), m, n) = CMatMap<T>(na->value.data(), n, m).transpose();
    auto node = detail::new_node<T>("transpose", {m, n}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, n, m](Node<T>& self) {
            Arr<T> ga(static_cast<int64_t>(n) * m);
            MatMap<T>(ga.data(), n, m) = CMatMap<T>(self.grad.data(), m, n).transpose();
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        shape_fail("reshape", a.shape(), shape);
    auto na = a.node();
    auto node = detail::new_node<T>("reshape", std::move(shape), Arr<T>(na->value), {na});
    if (node->needs_grad) {
        node->backprop = [na](Node<T>& self) { detail::add_grad(na, self.grad); };
    }
    return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    auto na = a.node();
    Arr<T> out(1);
    out[0] = na->value.sum();
    auto node = detail::new_node<T>("sum", {1}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na](Node<T>& self) {
            detail::add_grad(na, Arr<T>(Arr<T>::Constant(na->value.size(), self.grad[0])));
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    auto na = a.node();
    const T inv = T(1) / static_cast<T>(na->value.size());
    Arr<T> out(1);
    out[0] = na->value.sum() * inv;
    auto node = detail::new_node<T>("mean", {1}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, inv](Node<T>& self) {
            detail::add_grad(na,
                             Arr<T>(Arr<T>::Constant(na->value.size(), self.grad[0] * inv)));
        };
    }
    return Tensor<T>::from_node(node);
}

namespace detail {
// Argmax/argmin with ties resolved to the lowest flat index.
template <typename T, typename Cmp>
int64_t arg_extreme(const Arr<T>& v, int64_t lo, int64_t hi, Cmp better) {
    int64_t best = lo;
    for (int64_t i = lo + 1; i < hi; ++i)
        if (better(v[i], v[best])) best = i;
    return best;
}
}  // namespace detail

template <typename T>
Tensor<T> max(const Tensor<T>& a) {
    auto na = a.node();
    if (na->value.size() == 0) op_fail("max", "empty tensor");
    int64_t idx = detail::arg_extreme(na->value, 0, na->value.size(),
                                      [](T x, T y) { return x > y; });
    Arr<T> out(1);
    out[0] = na->value[idx];
    auto node = detail::new_node<T>("max", {1}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, idx](Node<T>& self) {
            Arr<T> g = Arr<T>::Zero(na->value.size());
            g[idx] = self.grad[0];
            detail::add_grad(na, g);
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> min(const Tensor<T>& a) {
    auto na = a.node();
    if (na->value.size() == 0) op_fail("min", "empty tensor");
    int64_t idx = detail::arg_extreme(na->value, 0, na->value.size(),
                                      [](T x, T y) { return x < y; });
    Arr<T> out(1);
    out[0] = na->value[idx];
    auto node = detail::new_node<T>("min", {1}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, idx](Node<T>& self) {
            Arr<T> g = Arr<T>::Zero(na->value.size());
            g[idx] = self.grad[0];
            detail::add_grad(na, g);
        };
    }
    return Tensor<T>::from_node(node);
}

/// Axis reduction for rank-2 tensors; axis 0 collapses rows -> {1,K},
/// axis 1 collapses columns -> {N,1}.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, int axis) {
    if (a.rank() != 2) op_fail("sum_axis", "requires rank 2, got " + shape_str(a.shape()));
    auto na = a.node();
    const int n = a.dim(0), m = a.dim(1);
    CMatMap<T> v(na->value.data(), n, m);
    Shape os = axis == 0 ? Shape{1, m} : Shape{n, 1};
    Arr<T> out(numel_of(os));
    if (axis == 0)
        MatMap<T>(out.data(), 1, m) = v.colwise().sum();
    else
        MatMap<T>(out.data(), n, 1) = v.rowwise().sum();
    auto node = detail::new_node<T>("sum_axis", os, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, n, m, axis](Node<T>& self) {
            Arr<T> ga(static_cast<int64_t>(n) * m);
            if (axis == 0)
                MatMap<T>(ga.data(), n, m) = CMatMap<T>(self.grad.data(), 1, m).replicate(n, 1);
            else
                MatMap<T>(ga.data(), n, m) = CMatMap<T>(self.grad.data(), n, 1).replicate(1, m);
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, int axis) {
    const T inv = T(1) / static_cast<T>(axis == 0 ? a.dim(0) : a.dim(1));
    return scale(sum_axis(a, axis), inv);
}

/// Numerically stable row softmax for rank-2 tensors.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    if (a.rank() != 2) op_fail("softmax", "requires rank 2, got " + shape_str(a.shape()));
    auto na = a.node();
    const int n = a.dim(0), m = a.dim(1);
    Arr<T> out(static_cast<int64_t>(n) * m);
    {
        CMatMap<T> v(na->value.data(), n, m);
        MatMap<T> y(out.data(), n, m);
        for (int i = 0; i < n; ++i) {
            T mx = v.row(i).maxCoeff();
            y.row(i) = (v.row(i).array() - mx).exp();
            y.row(i) /= y.row(i).sum();
        }
    }
    auto node = detail::new_node<T>("softmax", {n, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, n, m](Node<T>& self) {
            CMatMap<T> y(self.value.data(), n, m);
            CMatMap<T> g(self.grad.data(), n, m);
            Arr<T> ga(static_cast<int64_t>(n) * m);
            MatMap<T> out(ga.data(), n, m);
            for (int i = 0; i < n; ++i) {
                T dot = (g.row(i).array() * y.row(i).array()).sum();
                out.row(i) = y.row(i).array() * (g.row(i).array() - dot);
            }
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// indexed ops

using IndexVec = std::vector<int>;

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, IndexVec idx) {
    if (a.rank() != 2) op_fail("gather", "requires rank 2, got " + shape_str(a.shape()));
    auto na = a.node();
    const int n = a.dim(0), m = a.dim(1);
    auto ids = std::make_shared<IndexVec>(std::move(idx));
    const int e = static_cast<int>(ids->size());
    for (int i : *ids)
        if (i < 0 || i >= n) op_fail("gather", "index out of range");
    Arr<T> out(static_cast<int64_t>(e) * m);
    {
        CMatMap<T> v(na->value.data(), n, m);
        MatMap<T> y(out.data(), e, m);
        for (int r = 0; r < e; ++r) y.row(r) = v.row((*ids)[r]);
    }
    auto node = detail::new_node<T>("gather", {e, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, ids, n, m, e](Node<T>& self) {
            Arr<T> ga = Arr<T>::Zero(static_cast<int64_t>(n) * m);
            MatMap<T> out(ga.data(), n, m);
            CMatMap<T> g(self.grad.data(), e, m);
            for (int r = 0; r < e; ++r) out.row((*ids)[r]) += g.row(r);
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> scatter_add_rows(const Tensor<T>& a, IndexVec idx, int out_rows) {
    if (a.rank() != 2) op_fail("scatter_add", "requires rank 2, got " + shape_str(a.shape()));
    auto na = a.node();
    const int e = a.dim(0), m = a.dim(1);
    if (static_cast<int>(idx.size()) != e)
        op_fail("scatter_add", "index count does not match row count");
    auto ids = std::make_shared<IndexVec>(std::move(idx));
    for (int i : *ids)
        if (i < 0 || i >= out_rows) op_fail("scatter_add", "index out of range");
    Arr<T> out = Arr<T>::Zero(static_cast<int64_t>(out_rows) * m);
    {
        CMatMap<T> v(na->value.data(), e, m);
        MatMap<T> y(out.data(), out_rows, m);
        for (int r = 0; r < e; ++r) y.row((*ids)[r]) += v.row(r);
    }
    auto node = detail::new_node<T>("scatter_add", {out_rows, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, ids, m, e, out_rows](Node<T>& self) {
            Arr<T> ga(static_cast<int64_t>(e) * m);
            MatMap<T> out(ga.data(), e, m);
            CMatMap<T> g(self.grad.data(), out_rows, m);
            for (int r = 0; r < e; ++r) out.row(r) = g.row((*ids)[r]);
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// segment ops: rows of `a` grouped into contiguous ranges by `offsets`
// (length n_segments+1). Empty segments reduce to zero rows.

using Offsets = std::vector<int>;

namespace detail {
template <typename T>
void check_segments(const char* op, const Tensor<T>& a, const Offsets& off) {
    if (a.rank() != 2) op_fail(op, "requires rank 2, got " + shape_str(a.shape()));
    if (off.empty() || off.front() != 0 || off.back() != a.dim(0))
        op_fail(op, "offsets must start at 0 and end at row count");
    for (size_t i = 1; i < off.size(); ++i)
        if (off[i] < off[i - 1]) op_fail(op, "offsets must be non-decreasing");
}
}  // namespace detail

template <typename T>
Tensor<T> segment_sum(const Tensor<T>& a, Offsets offsets) {
    detail::check_segments("segment_sum", a, offsets);
    auto na = a.node();
    auto off = std::make_shared<Offsets>(std::move(offsets));
    const int e = a.dim(0), m = a.dim(1);
    const int s = static_cast<int>(off->size()) - 1;
    Arr<T> out = Arr<T>::Zero(static_cast<int64_t>(s) * m);
    {
        CMatMap<T> v(na->value.data(), e, m);
        MatMap<T> y(out.data(), s, m);
        for (int i = 0; i < s; ++i)
            for (int r = (*off)[i]; r < (*off)[i + 1]; ++r) y.row(i) += v.row(r);
    }
    auto node = detail::new_node<T>("segment_sum", {s, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, off, e, m, s](Node<T>& self) {
            Arr<T> ga(static_cast<int64_t>(e) * m);
            MatMap<T> out(ga.data(), e, m);
            CMatMap<T> g(self.grad.data(), s, m);
            for (int i = 0; i < s; ++i)
                for (int r = (*off)[i]; r < (*off)[i + 1]; ++r) out.row(r) = g.row(i);
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

template <typename T>
Tensor<T> segment_mean(const Tensor<T>& a, Offsets offsets) {
    detail::check_segments("segment_mean", a, offsets);
    auto na = a.node();
    auto off = std::make_shared<Offsets>(std::move(offsets));
    const int e = a.dim(0), m = a.dim(1);
    const int s = static_cast<int>(off->size()) - 1;
    Arr<T> out = Arr<T>::Zero(static_cast<int64_t>(s) * m);
    {
        CMatMap<T> v(na->value.data(), e, m);
        MatMap<T> y(out.data(), s, m);
        for (int i = 0; i < s; ++i) {
            const int cnt = (*off)[i + 1] - (*off)[i];
            if (cnt == 0) continue;
            for (int r = (*off)[i]; r < (*off)[i + 1]; ++r) y.row(i) += v.row(r);
            y.row(i) /= static_cast<T>(cnt);
        }
    }
    auto node = detail::new_node<T>("segment_mean", {s, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, off, e, m, s](Node<T>& self) {
            Arr<T> ga = Arr<T>::Zero(static_cast<int64_t>(e) * m);
            MatMap<T> out(ga.data(), e, m);
            CMatMap<T> g(self.grad.data(), s, m);
            for (int i = 0; i < s; ++i) {
                const int cnt = (*off)[i + 1] - (*off)[i];
                if (cnt == 0) continue;
                const T inv = T(1) / static_cast<T>(cnt);
                for (int r = (*off)[i]; r < (*off)[i + 1]; ++r) out.row(r) = g.row(i) * inv;
            }
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

namespace detail {
template <typename T, bool kMax>
Tensor<T> segment_extreme(const char* opname, const Tensor<T>& a, Offsets offsets) {
    check_segments(opname, a, offsets);
    auto na = a.node();
    auto off = std::make_shared<Offsets>(std::move(offsets));
    const int e = a.dim(0), m = a.dim(1);
    const int s = static_cast<int>(off->size()) - 1;
    // argrow[i*m+c]: source row feeding output (i,c); -1 for empty segments.
    auto argrow = std::make_shared<std::vector<int>>(static_cast<size_t>(s) * m, -1);
    Arr<T> out = Arr<T>::Zero(static_cast<int64_t>(s) * m);
    {
        CMatMap<T> v(na->value.data(), e, m);
        MatMap<T> y(out.data(), s, m);
        for (int i = 0; i < s; ++i) {
            if ((*off)[i] == (*off)[i + 1]) continue;
            for (int c = 0; c < m; ++c) {
                int best = (*off)[i];
                for (int r = (*off)[i] + 1; r < (*off)[i + 1]; ++r) {
                    if (kMax ? (v(r, c) > v(best, c)) : (v(r, c) < v(best, c))) best = r;
                }
                y(i, c) = v(best, c);
                (*argrow)[static_cast<size_t>(i) * m + c] = best;
            }
        }
    }
    auto node = new_node<T>(opname, {s, m}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, argrow, e, m, s](Node<T>& self) {
            Arr<T> ga = Arr<T>::Zero(static_cast<int64_t>(e) * m);
            MatMap<T> out(ga.data(), e, m);
            CMatMap<T> g(self.grad.data(), s, m);
            for (int i = 0; i < s; ++i)
                for (int c = 0; c < m; ++c) {
                    int r = (*argrow)[static_cast<size_t>(i) * m + c];
                    if (r >= 0) out(r, c) += g(i, c);
                }
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}
}  // namespace detail

template <typename T>
Tensor<T> segment_max(const Tensor<T>& a, Offsets offsets) {
    return detail::segment_extreme<T, true>("segment_max", a, std::move(offsets));
}

template <typename T>
Tensor<T> segment_min(const Tensor<T>& a, Offsets offsets) {
    return detail::segment_extreme<T, false>("segment_min", a, std::move(offsets));
}

/// Stable softmax over each contiguous segment of an {E,1} column.
template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& a, Offsets offsets) {
    detail::check_segments("segment_softmax", a, offsets);
    if (a.dim(1) != 1) op_fail("segment_softmax", "expects a single column");
    auto na = a.node();
    auto off = std::make_shared<Offsets>(std::move(offsets));
    const int e = a.dim(0);
    const int s = static_cast<int>(off->size()) - 1;
    Arr<T> out(e);
    for (int i = 0; i < s; ++i) {
        const int lo = (*off)[i], hi = (*off)[i + 1];
        if (lo == hi) continue;
        T mx = na->value[lo];
        for (int r = lo + 1; r < hi; ++r) mx = std::max(mx, na->value[r]);
        T z = T(0);
        for (int r = lo; r < hi; ++r) {
            out[r] = std::exp(na->value[r] - mx);
            z += out[r];
        }
        for (int r = lo; r < hi; ++r) out[r] /= z;
    }
    auto node = detail::new_node<T>("segment_softmax", {e, 1}, std::move(out), {na});
    if (node->needs_grad) {
        node->backprop = [na, off, e, s](Node<T>& self) {
            Arr<T> ga = Arr<T>::Zero(e);
            for (int i = 0; i < s; ++i) {
                const int lo = (*off)[i], hi = (*off)[i + 1];
                T dot = T(0);
                for (int r = lo; r < hi; ++r) dot += self.grad[r] * self.value[r];
                for (int r = lo; r < hi; ++r)
                    ga[r] = self.value[r] * (self.grad[r] - dot);
            }
            detail::add_grad(na, ga);
        };
    }
    return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// concat / batched matvec

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) op_fail("concat", "no inputs");
    for (const auto& p : parts)
        if (p.rank() != 2) op_fail("concat", "requires rank 2, got " + shape_str(p.shape()));
    const int fixed = axis == 1 ? parts[0].dim(0) : parts[0].dim(1);
    int total = 0;
    std::vector<std::shared_ptr<Node<T>>> ins;
    for (const auto& p : parts) {
        if ((axis == 1 ? p.dim(0) : p.dim(1)) != fixed)
            shape_fail("concat", parts[0].shape(), p.shape());
        total += axis == 1 ? p.dim(1) : p.dim(0);
        ins.push_back(p.node());
    }
    const int rows = axis == 1 ? fixed : total;
    const int cols = axis == 1 ? total : fixed;
    Arr<T> out(static_cast<int64_t>(rows) * cols);
    {
        MatMap<T> y(out.data(), rows, cols);
        int at = 0;
        for (const auto& in : ins) {
            const int r = in->shape[0], c = in->shape[1];
            CMatMap<T> v(in->value.data(), r, c);
            if (axis == 1) {
                y.middleCols(at, c) = v;
                at += c;
            } else {
                y.middleRows(at, r) = v;
                at += r;
            }
        }
    }
    auto node = detail::new_node<T>("concat", {rows, cols}, std::move(out), std::move(ins));
    if (node->needs_grad) {
        const int ax = axis;
        node->backprop = [ax, rows, cols](Node<T>& self) {
            CMatMap<T> g(self.grad.data(), rows, cols);
            int at = 0;
            for (auto& in : self.inputs) {
                const int r = in->shape[0], c = in->shape[1];
                Arr<T> gi(static_cast<int64_t>(r) * c);
                if (ax == 1) {
                    MatMap<T>(gi.data(), r, c) = g.middleCols(at, c);
                    at += c;
                } else {
                    MatMap<T>(gi.data(), r, c) = g.middleRows(at, r);
                    at += r;
                }
                detail::add_grad(in, gi);
            }
        };
    }
    return Tensor<T>::from_node(node);
}

/// Per-row matrix-vector product: kernels {E, R*C} (each row a row-major
/// R x C matrix) applied to vectors {E, C}, giving {E, R}.
template <typename T>
Tensor<T> batched_matvec(const Tensor<T>& kernels, const Tensor<T>& x) {
    if (kernels.rank() != 2 || x.rank() != 2 || kernels.dim(0) != x.dim(0) ||
        kernels.dim(1) % x.dim(1) != 0)
        shape_fail("batched_matvec", kernels.shape(), x.shape());
    auto nk = kernels.node();
    auto nx = x.node();
    const int e = x.dim(0), c = x.dim(1), r = kernels.dim(1) / c;
    Arr<T> out(static_cast<int64_t>(e) * r);
    for (int i = 0; i < e; ++i) {
        CMatMap<T> K(nk->value.data() + static_cast<int64_t>(i) * r * c, r, c);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> v(
            nx->value.data() + static_cast<int64_t>(i) * c, c);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(
            out.data() + static_cast<int64_t>(i) * r, r);
        y.noalias() = K * v;
    }
    auto node = detail::new_node<T>("batched_matvec", {e, r}, std::move(out), {nk, nx});
    if (node->needs_grad) {
        node->backprop = [nk, nx, e, c, r](Node<T>& self) {
            if (nk->needs_grad || nk->requires_grad) {
                Arr<T> gk(static_cast<int64_t>(e) * r * c);
                for (int i = 0; i < e; ++i) {
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(
                        self.grad.data() + static_cast<int64_t>(i) * r, r);
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> v(
                        nx->value.data() + static_cast<int64_t>(i) * c, c);
                    MatMap<T>(gk.data() + static_cast<int64_t>(i) * r * c, r, c).noalias() =
                        g * v.transpose();
                }
                detail::add_grad(nk, gk);
            }
            if (nx->needs_grad || nx->requires_grad) {
                Arr<T> gx(static_cast<int64_t>(e) * c);
                for (int i = 0; i < e; ++i) {
                    CMatMap<T> K(nk->value.data() + static_cast<int64_t>(i) * r * c, r, c);
                    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(
                        self.grad.data() + static_cast<int64_t>(i) * r, r);
                    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(
                        gx.data() + static_cast<int64_t>(i) * c, c)
                        .noalias() = K.transpose() * g;
                }
                detail::add_grad(nx, gx);
            }
        };
    }
    return Tensor<T>::from_node(node);
}

// ---------------------------------------------------------------------------
// complex helpers over (real, imag) tensor pairs

template <typename T>
struct Complex {
    Tensor<T> re;
    Tensor<T> im;
};

template <typename T>
Complex<T> cmul(const Complex<T>& a, const Complex<T>& b) {
    return {sub(mul(a.re, b.re), mul(a.im, b.im)),
            add(mul(a.re, b.im), mul(a.im, b.re))};
}

template <typename T>
Complex<T> cadd(const Complex<T>& a, const Complex<T>& b) {
    return {add(a.re, b.re), add(a.im, b.im)};
}

template <typename T>
Complex<T> conj(const Complex<T>& a) {
    return {a.re, neg(a.im)};
}

/// Complex matmul on paired tensors.
template <typename T>
Complex<T> cmatmul(const Complex<T>& a, const Complex<T>& b) {
    return {sub(matmul(a.re, b.re), matmul(a.im, b.im)),
            add(matmul(a.re, b.im), matmul(a.im, b.re))};
}

/// exp(i * theta) for a real phase tensor.
template <typename T>
Complex<T> cis(const Tensor<T>& theta) {
    return {cos(theta), sin(theta)};
}

}  // namespace gola::ad
