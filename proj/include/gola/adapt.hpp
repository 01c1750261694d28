#pragma once

// Conversions between plain row-major matrices (geometry / data land) and
// autodiff tensors (model land).

#include "gola/geometry.hpp"
#include "gola/tensor.hpp"

namespace gola {

template <typename T = double>
ad::Tensor<T> to_tensor(const RowMatd& m) {
    ad::Arr<T> a(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            a[i * m.cols() + j] = static_cast<T>(m(i, j));
    return ad::Tensor<T>::constant({static_cast<int>(m.rows()), static_cast<int>(m.cols())},
                                   std::move(a));
}

template <typename T>
RowMatd to_matrix(const ad::Tensor<T>& t) {
    if (t.rank() != 2) throw std::invalid_argument("to_matrix: tensor must be rank 2");
    RowMatd m(t.dim(0), t.dim(1));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = static_cast<double>(t.values()[i * m.cols() + j]);
    return m;
}

}  // namespace gola
