#pragma once

// Learnable non-uniform Fourier encoder. Scattered node samples are
// projected onto complex exponentials at learnable frequencies, filtered
// per mode by learnable complex weights, and synthesized back into real
// node features:
//
//   Phi_{i,m} = exp(2*pi*i <omega_m, x_i>)
//   uhat_{c,m} = (1/N) sum_i f_{i,c} conj(Phi_{i,m})
//   vhat_{o,m} = sum_c uhat_{c,m} W_{c,o,m}
//   h_{i,o}    = Re( sum_m vhat_{o,m} Phi_{i,m} )
//
// Complex arrays are (real, imag) tensor pairs. Cost is O(M*N*C) per call;
// there is no FFT and none is intended.

#include "gola/param_store.hpp"
#include "gola/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace gola::spectral {

using ad::Arr;
using ad::Complex;
using ad::ParamStore;
using ad::Tensor;
using ad::cadd;
using ad::cis;
using ad::cmul;
using ad::conj;
using ad::gather_rows;
using ad::matmul;
using ad::neg;
using ad::scale;
using ad::sub;
using ad::transpose;

/// The M smallest integer frequency pairs in Z^2, ordered by squared norm
/// then lexicographically; both signs are kept (real output symmetry is not
/// exploited). M=5 gives {(0,0),(-1,0),(0,-1),(0,1),(1,0)}.
inline std::vector<std::pair<int, int>> integer_modes(int m_count) {
    int k = 1;
    while ((2 * k + 1) * (2 * k + 1) < m_count) ++k;
    std::vector<std::pair<int, int>> modes;
    for (int a = -k; a <= k; ++a)
        for (int b = -k; b <= k; ++b) modes.push_back({a, b});
    std::sort(modes.begin(), modes.end(), [](auto& p, auto& q) {
        int np = p.first * p.first + p.second * p.second;
        int nq = q.first * q.first + q.second * q.second;
        if (np != nq) return np < nq;
        return p < q;
    });
    modes.resize(static_cast<size_t>(m_count));
    return modes;
}

/// Initial frequency table: lowest integer modes plus Gaussian jitter to
/// break gradient ties once the frequencies start learning.
template <typename T>
Arr<T> init_frequencies(int m_count, T jitter, Pcg32& rng) {
    auto modes = integer_modes(m_count);
    Arr<T> om(static_cast<int64_t>(m_count) * 2);
    for (int m = 0; m < m_count; ++m) {
        om[2 * m + 0] = static_cast<T>(modes[static_cast<size_t>(m)].first) +
                        jitter * static_cast<T>(rng.normal());
        om[2 * m + 1] = static_cast<T>(modes[static_cast<size_t>(m)].second) +
                        jitter * static_cast<T>(rng.normal());
    }
    return om;
}

template <typename T>
struct Encoder {
    Tensor<T> omegas;        // {M, 2}, learnable frequencies
    Tensor<T> w_re, w_im;    // {C_in*C_out, M}, row c*C_out+o holds W_{c,o,:}
    int c_in = 0, c_out = 0, modes = 0;

    static Encoder make(ParamStore<T>& ps, const std::string& prefix, int c_in, int c_out,
                        int m_count, T jitter, Pcg32& rng) {
        Encoder e;
        e.c_in = c_in;
        e.c_out = c_out;
        e.modes = m_count;
        e.omegas = ps.create(prefix + ".omegas", {m_count, 2},
                             init_frequencies<T>(m_count, jitter, rng));
        const T bound = T(1) / std::sqrt(static_cast<T>(c_in) * static_cast<T>(m_count));
        e.w_re = ps.create_uniform(prefix + ".w_re", {c_in * c_out, m_count}, bound, rng);
        e.w_im = ps.create_uniform(prefix + ".w_im", {c_in * c_out, m_count}, bound, rng);
        return e;
    }

    /// Phi_{i,m} for points {N,2}; unit modulus by construction.
    Complex<T> basis(const Tensor<T>& points) const {
        auto phase = scale(matmul(points, transpose(omegas)),
                           T(2) * std::numbers::pi_v<T>);
        return cis(phase);
    }

    /// uhat {C_in, M}: per-channel projection of f {N, C_in} onto the basis.
    Complex<T> forward_coefficients(const Tensor<T>& f, const Complex<T>& phi) const {
        const T inv_n = T(1) / static_cast<T>(f.dim(0));
        auto ft = transpose(f);
        return {scale(matmul(ft, phi.re), inv_n),
                scale(matmul(ft, neg(phi.im)), inv_n)};
    }

    /// vhat {C_out, M}: per-mode complex contraction over input channels.
    Complex<T> filter(const Complex<T>& uhat) const {
        Complex<T> vhat;
        for (int c = 0; c < c_in; ++c) {
            Complex<T> u_c{gather_rows(uhat.re, {c}), gather_rows(uhat.im, {c})};
            ad::IndexVec rows(static_cast<size_t>(c_out));
            for (int o = 0; o < c_out; ++o) rows[static_cast<size_t>(o)] = c * c_out + o;
            Complex<T> w_c{gather_rows(w_re, rows), gather_rows(w_im, rows)};
            Complex<T> term = cmul(u_c, w_c);
            vhat = c == 0 ? term : cadd(vhat, term);
        }
        return vhat;
    }

    /// h {N, C_out} = Re(Phi vhat^T): synthesis back onto the nodes.
    Tensor<T> inverse(const Complex<T>& vhat, const Complex<T>& phi) const {
        return sub(matmul(phi.re, transpose(vhat.re)),
                   matmul(phi.im, transpose(vhat.im)));
    }

    Tensor<T> encode(const Tensor<T>& f, const Tensor<T>& points) const {
        Complex<T> phi = basis(points);
        return inverse(filter(forward_coefficients(f, phi)), phi);
    }
};

}  // namespace gola::spectral
