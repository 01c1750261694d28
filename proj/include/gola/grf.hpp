#pragma once

// Gaussian random fields with spectrum (-Laplacian + tau^2 I)^(-alpha) on
// the periodic unit square, synthesized by direct DFT matrices (no FFT;
// grids stay small enough that two dense complex matmuls are cheap).
//
// The returned grid is endpoint-inclusive (grid_res x grid_res) with the
// last row and column mirroring the first, so the array represents a
// periodic function sampled at multiples of 1/(grid_res-1). Fields are
// scaled to unit marginal variance so downstream transforms (thresholding,
// exponentials, squaring) see a consistent amplitude.

#include "gola/geometry.hpp"
#include "gola/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace gola::pde {

struct GrfSpec {
    int grid_res = 64;
    double tau = 3.0;
    double alpha = 2.0;
    uint64_t seed = 0;
};

inline RowMatd sample_grf(const GrfSpec& spec) {
    if (spec.tau <= 0 || spec.alpha <= 1)
        throw std::invalid_argument("sample_grf: need tau > 0 and alpha > 1");
    const int r = spec.grid_res;
    const int q = r - 1;  // distinct periodic samples per axis
    if (q < 2) throw std::invalid_argument("sample_grf: grid_res too small");

    // sqrt of the spectrum, on aliased wavenumbers
    Eigen::MatrixXd amp(q, q);
    double total_var = 0;
    const double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;
    for (int k1 = 0; k1 < q; ++k1)
        for (int k2 = 0; k2 < q; ++k2) {
            const int a = k1 <= q / 2 ? k1 : k1 - q;
            const int b = k2 <= q / 2 ? k2 : k2 - q;
            double c = std::pow(four_pi2 * (a * a + b * b) + spec.tau * spec.tau,
                                -spec.alpha);
            amp(k1, k2) = std::sqrt(c);
            total_var += 0.5 * c;  // Re(xi e^{i theta}) carries half the power
        }
    const double norm = 1.0 / std::sqrt(total_var);

    Pcg32 rng(spec.seed);
    const double half = 1.0 / std::numbers::sqrt2;  // re/im each carry variance 1/2
    Eigen::MatrixXcd w(q, q);
    for (int k1 = 0; k1 < q; ++k1)
        for (int k2 = 0; k2 < q; ++k2) {
            double re = rng.normal() * half;
            double im = rng.normal() * half;
            w(k1, k2) = std::complex<double>(re, im) * (amp(k1, k2) * norm);
        }

    Eigen::MatrixXcd dft(q, q);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) {
            double th = 2.0 * std::numbers::pi * j * k / q;
            dft(j, k) = std::complex<double>(std::cos(th), std::sin(th));
        }
    Eigen::MatrixXd field = (dft * w * dft.transpose()).real();

    RowMatd out(r, r);
    out.topLeftCorner(q, q) = field;
    out.col(q) = out.col(0);
    out.row(q) = out.row(0);
    return out;
}

/// Fraction of spectral energy above half the Nyquist band, measured by
/// direct projection; used to verify smoother fields for larger alpha.
inline double high_freq_energy_fraction(const RowMatd& grid) {
    const int q = static_cast<int>(grid.rows()) - 1;
    Eigen::MatrixXcd dft(q, q);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) {
            double th = -2.0 * std::numbers::pi * j * k / q;
            dft(j, k) = std::complex<double>(std::cos(th), std::sin(th));
        }
    const Eigen::MatrixXcd g = grid.topLeftCorner(q, q).cast<std::complex<double>>();
    Eigen::MatrixXcd coeff = (dft * g * dft.transpose()) / double(q * q);
    double total = 0, high = 0;
    for (int k1 = 0; k1 < q; ++k1)
        for (int k2 = 0; k2 < q; ++k2) {
            const int a = k1 <= q / 2 ? k1 : k1 - q;
            const int b = k2 <= q / 2 ? k2 : k2 - q;
            double e = std::norm(coeff(k1, k2));
            total += e;
            if (std::max(std::abs(a), std::abs(b)) > q / 8) high += e;
        }
    return total > 0 ? high / total : 0.0;
}

}  // namespace gola::pde
