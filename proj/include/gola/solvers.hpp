#pragma once

// Ground-truth solvers for the four benchmark families, all on the unit
// square. Grids are endpoint-inclusive grid_res x grid_res arrays; the
// periodic problems (advection, nonlinear diffusion) treat the last row and
// column as mirrors of the first, so the grid_res-1 leading rows/columns
// are the distinct periodic samples.
//
//   darcy      -div(a grad u) = 1, u = 0 on the boundary, a in {3, 12}
//   advection  u_t + c . grad u = 0, c = (1, 0.5), target at T = 0.5
//   eikonal    |grad u| = 1/s, u = 0 on the boundary, fast sweeping
//   nonlinear_diffusion  u_t = div(D(u) grad u), D = 0.01 + 0.1 u^2, T = 0.2

#include "gola/grf.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace gola::pde {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FieldPair {
    RowMatd f_grid;  // input function samples
    RowMatd u_grid;  // solution samples
    std::string pde_tag;
    nlohmann::json gen_metadata;
};

// ---------------------------------------------------------------------------
// darcy flow

namespace detail {

/// Flux-form 5-point operator A applied to interior values of u (boundary
/// rows/cols of u are read but never written; they stay 0 for the solve).
inline void darcy_apply(const RowMatd& a, const RowMatd& u, RowMatd& out) {
    const int r = static_cast<int>(a.rows());
    const double inv_h2 = static_cast<double>((r - 1)) * (r - 1);
    for (int i = 1; i < r - 1; ++i)
        for (int j = 1; j < r - 1; ++j) {
            const double an = 0.5 * (a(i, j) + a(i - 1, j));
            const double as = 0.5 * (a(i, j) + a(i + 1, j));
            const double aw = 0.5 * (a(i, j) + a(i, j - 1));
            const double ae = 0.5 * (a(i, j) + a(i, j + 1));
            out(i, j) = inv_h2 * (an * (u(i, j) - u(i - 1, j)) + as * (u(i, j) - u(i + 1, j)) +
                                  aw * (u(i, j) - u(i, j - 1)) + ae * (u(i, j) - u(i, j + 1)));
        }
}

inline double interior_dot(const RowMatd& x, const RowMatd& y) {
    const int r = static_cast<int>(x.rows());
    double acc = 0;
    for (int i = 1; i < r - 1; ++i)
        for (int j = 1; j < r - 1; ++j) acc += x(i, j) * y(i, j);
    return acc;
}

}  // namespace detail

struct DarcyResult {
    RowMatd u;
    double rel_residual = 0;
    int iterations = 0;
};

/// Conjugate gradients on the interior unknowns, zero Dirichlet boundary,
/// right-hand side f identically `rhs`.
inline DarcyResult solve_darcy(const RowMatd& a, double rhs = 1.0, double tol = 1e-8) {
    const int r = static_cast<int>(a.rows());
    DarcyResult res;
    res.u = RowMatd::Zero(r, r);
    RowMatd b = RowMatd::Zero(r, r);
    b.block(1, 1, r - 2, r - 2).setConstant(rhs);
    RowMatd resid = b;  // A*0 = 0
    RowMatd p = resid;
    RowMatd ap = RowMatd::Zero(r, r);
    const double b_norm = std::sqrt(detail::interior_dot(b, b));
    double rr = detail::interior_dot(resid, resid);
    const int max_iter = 10 * r * r;
    int it = 0;
    while (std::sqrt(rr) > tol * b_norm && it < max_iter) {
        detail::darcy_apply(a, p, ap);
        const double alpha = rr / detail::interior_dot(p, ap);
        res.u.block(1, 1, r - 2, r - 2) += alpha * p.block(1, 1, r - 2, r - 2);
        resid.block(1, 1, r - 2, r - 2) -= alpha * ap.block(1, 1, r - 2, r - 2);
        const double rr_new = detail::interior_dot(resid, resid);
        p.block(1, 1, r - 2, r - 2) =
            resid.block(1, 1, r - 2, r - 2) + (rr_new / rr) * p.block(1, 1, r - 2, r - 2);
        rr = rr_new;
        ++it;
    }
    res.rel_residual = std::sqrt(rr) / b_norm;
    res.iterations = it;
    if (res.rel_residual > tol)
        throw SolverError("darcy: CG stalled at relative residual " +
                          std::to_string(res.rel_residual) + " after " + std::to_string(it) +
                          " iterations");
    return res;
}

/// ||A u - b|| / ||b|| over the interior, recomputed from scratch.
inline double darcy_residual(const RowMatd& a, const RowMatd& u, double rhs = 1.0) {
    const int r = static_cast<int>(a.rows());
    RowMatd au = RowMatd::Zero(r, r);
    detail::darcy_apply(a, u, au);
    double num = 0, den = 0;
    for (int i = 1; i < r - 1; ++i)
        for (int j = 1; j < r - 1; ++j) {
            num += (au(i, j) - rhs) * (au(i, j) - rhs);
            den += rhs * rhs;
        }
    return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// eikonal

struct EikonalResult {
    RowMatd u;
    int sweep_rounds = 0;
    double last_update = 0;
};

/// Fast sweeping for |grad u| = 1/s with u = 0 on the boundary. Four sweep
/// orderings per round; converged when the max update drops below tol.
inline EikonalResult solve_eikonal(const RowMatd& s, double tol = 1e-8,
                                   int max_rounds = 100) {
    const int r = static_cast<int>(s.rows());
    const double h = 1.0 / (r - 1);
    EikonalResult res;
    res.u = RowMatd::Constant(r, r, 1e30);
    for (int i = 0; i < r; ++i) {
        res.u(i, 0) = res.u(i, r - 1) = 0;
        res.u(0, i) = res.u(r - 1, i) = 0;
    }
    auto godunov = [&](int i, int j) {
        const double a = std::min(res.u(i - 1, j), res.u(i + 1, j));
        const double b = std::min(res.u(i, j - 1), res.u(i, j + 1));
        const double fh = h / s(i, j);
        double cand;
        if (std::abs(a - b) >= fh)
            cand = std::min(a, b) + fh;
        else
            cand = 0.5 * (a + b + std::sqrt(2 * fh * fh - (a - b) * (a - b)));
        if (cand < res.u(i, j)) {
            double delta = res.u(i, j) - cand;
            res.u(i, j) = cand;
            return delta;
        }
        return 0.0;
    };
    for (int round = 0; round < max_rounds; ++round) {
        double worst = 0;
        for (int sweep = 0; sweep < 4; ++sweep) {
            const bool fwd_i = sweep == 0 || sweep == 1;
            const bool fwd_j = sweep == 0 || sweep == 2;
            for (int ii = 1; ii < r - 1; ++ii)
                for (int jj = 1; jj < r - 1; ++jj) {
                    const int i = fwd_i ? ii : r - 1 - ii;
                    const int j = fwd_j ? jj : r - 1 - jj;
                    worst = std::max(worst, godunov(i, j));
                }
        }
        res.sweep_rounds = round + 1;
        res.last_update = worst;
        if (worst < tol) return res;
    }
    throw SolverError("eikonal: fast sweeping did not converge; last update " +
                      std::to_string(res.last_update));
}

// ---------------------------------------------------------------------------
// advection

/// Exact semi-Lagrangian shift on the periodic grid: u(x, T) = f(x - c T),
/// evaluated by periodic bilinear interpolation of the distinct samples.
inline RowMatd advect_periodic(const RowMatd& f, double cx, double cy, double t_final) {
    const int r = static_cast<int>(f.rows());
    const int q = r - 1;
    auto wrap = [q](double v) {
        v = std::fmod(v, 1.0);
        if (v < 0) v += 1.0;
        return v;
    };
    RowMatd u(r, r);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            const double sx = wrap(static_cast<double>(i) / q - cx * t_final) * q;
            const double sy = wrap(static_cast<double>(j) / q - cy * t_final) * q;
            const int i0 = static_cast<int>(sx) % q, j0 = static_cast<int>(sy) % q;
            const int i1 = (i0 + 1) % q, j1 = (j0 + 1) % q;
            const double fx = sx - std::floor(sx), fy = sy - std::floor(sy);
            u(i, j) = (1 - fx) * (1 - fy) * f(i0, j0) + fx * (1 - fy) * f(i1, j0) +
                      (1 - fx) * fy * f(i0, j1) + fx * fy * f(i1, j1);
        }
    u.col(q) = u.col(0);
    u.row(q) = u.row(0);  // after the column so the corner is defined
    return u;
}

// ---------------------------------------------------------------------------
// nonlinear diffusion

namespace detail {

/// div(D(u) grad u) in flux form on the distinct q x q periodic samples.
inline void diffusion_rhs(const Eigen::ArrayXXd& u, double d0, double d1,
                          Eigen::ArrayXXd& d, Eigen::ArrayXXd& out, double inv_h2) {
    const int q = static_cast<int>(u.rows());
    d = d0 + d1 * u.square();
    for (int i = 0; i < q; ++i) {
        const int ip = (i + 1) % q, im = (i + q - 1) % q;
        for (int j = 0; j < q; ++j) {
            const int jp = (j + 1) % q, jm = (j + q - 1) % q;
            const double de = 0.5 * (d(i, j) + d(i, jp));
            const double dw = 0.5 * (d(i, j) + d(i, jm));
            const double dn = 0.5 * (d(i, j) + d(im, j));
            const double ds = 0.5 * (d(i, j) + d(ip, j));
            out(i, j) = inv_h2 * (de * (u(i, jp) - u(i, j)) - dw * (u(i, j) - u(i, jm)) +
                                  dn * (u(im, j) - u(i, j)) - ds * (u(i, j) - u(ip, j)));
        }
    }
}

}  // namespace detail

/// Explicit RK2 (midpoint) integration of u_t = div(D(u) grad u) with
/// D(u) = d0 + d1 u^2 on the periodic grid, diffusion-stable step
/// dt = safety * h^2 / max(D).
inline RowMatd diffuse_nonlinear(const RowMatd& f, double t_final, double d0 = 0.01,
                                 double d1 = 0.1, double safety = 0.2) {
    const int r = static_cast<int>(f.rows());
    const int q = r - 1;
    const double h = 1.0 / q;
    const double inv_h2 = 1.0 / (h * h);
    Eigen::ArrayXXd u = f.topLeftCorner(q, q).array();
    Eigen::ArrayXXd d(q, q), k1(q, q), k2(q, q), mid(q, q);
    double t = 0;
    while (t < t_final) {
        const double max_d = d0 + d1 * u.square().maxCoeff();
        double dt = safety * h * h / max_d;
        if (dt <= 0 || !std::isfinite(dt))
            throw SolverError("nonlinear diffusion: step size underflow");
        dt = std::min(dt, t_final - t);
        detail::diffusion_rhs(u, d0, d1, d, k1, inv_h2);
        mid = u + 0.5 * dt * k1;
        detail::diffusion_rhs(mid, d0, d1, d, k2, inv_h2);
        u += dt * k2;
        if (!u.isFinite().all())
            throw SolverError("nonlinear diffusion: state became non-finite");
        t += dt;
    }
    RowMatd out(r, r);
    out.topLeftCorner(q, q) = u.matrix();
    out.col(q) = out.col(0);
    out.row(q) = out.row(0);
    return out;
}

/// Sum over the distinct periodic samples (mass for the periodic problems).
inline double periodic_mass(const RowMatd& grid) {
    const int q = static_cast<int>(grid.rows()) - 1;
    return grid.topLeftCorner(q, q).sum();
}

// ---------------------------------------------------------------------------
// dataset generators

inline std::vector<FieldPair> gen_darcy(const GrfSpec& spec, int n) {
    std::vector<FieldPair> pairs;
    for (int idx = 0; idx < n; ++idx) {
        GrfSpec gs = spec;
        gs.seed = mix_seed(spec.seed, static_cast<uint64_t>(idx));
        RowMatd psi = sample_grf(gs);
        RowMatd a = psi.unaryExpr([](double v) { return v >= 0.0 ? 12.0 : 3.0; });
        DarcyResult sol = solve_darcy(a);
        FieldPair p;
        p.pde_tag = "darcy";
        p.f_grid = a;
        p.u_grid = sol.u;
        p.gen_metadata = {{"seed", gs.seed},
                          {"solver", "cg_5point"},
                          {"tol", 1e-8},
                          {"iterations", sol.iterations},
                          {"rel_residual", sol.rel_residual},
                          {"coeff_values", {3.0, 12.0}}};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<FieldPair> gen_advection(const GrfSpec& spec, int n) {
    const double cx = 1.0, cy = 0.5, t_final = 0.5;
    std::vector<FieldPair> pairs;
    for (int idx = 0; idx < n; ++idx) {
        GrfSpec gs = spec;
        gs.seed = mix_seed(spec.seed, static_cast<uint64_t>(idx));
        FieldPair p;
        p.pde_tag = "advection";
        p.f_grid = sample_grf(gs);
        p.u_grid = advect_periodic(p.f_grid, cx, cy, t_final);
        p.gen_metadata = {{"seed", gs.seed},
                          {"solver", "semi_lagrangian_exact"},
                          {"velocity", {cx, cy}},
                          {"t_final", t_final}};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<FieldPair> gen_eikonal(const GrfSpec& spec, int n) {
    std::vector<FieldPair> pairs;
    for (int idx = 0; idx < n; ++idx) {
        GrfSpec gs = spec;
        gs.seed = mix_seed(spec.seed, static_cast<uint64_t>(idx));
        RowMatd s = (0.5 * sample_grf(gs).array()).exp();
        EikonalResult sol = solve_eikonal(s);
        FieldPair p;
        p.pde_tag = "eikonal";
        p.f_grid = s;
        p.u_grid = sol.u;
        p.gen_metadata = {{"seed", gs.seed},
                          {"solver", "fast_sweeping"},
                          {"tol", 1e-8},
                          {"sweep_rounds", sol.sweep_rounds},
                          {"speed_transform", "exp(0.5*grf)"}};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline std::vector<FieldPair> gen_nonlinear_diffusion(const GrfSpec& spec, int n) {
    const double t_final = 0.2;
    std::vector<FieldPair> pairs;
    for (int idx = 0; idx < n; ++idx) {
        GrfSpec gs = spec;
        gs.seed = mix_seed(spec.seed, static_cast<uint64_t>(idx));
        RowMatd z = sample_grf(gs);
        FieldPair p;
        p.pde_tag = "nonlinear_diffusion";
        p.f_grid = z.array().square().matrix();  // non-negative initial condition
        p.u_grid = diffuse_nonlinear(p.f_grid, t_final);
        p.gen_metadata = {{"seed", gs.seed},
                          {"solver", "rk2_flux"},
                          {"t_final", t_final},
                          {"diffusivity", "0.01 + 0.1*u^2"},
                          {"step_safety", 0.2}};
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline const std::vector<std::string>& pde_tags() {
    static const std::vector<std::string> tags = {"darcy", "advection", "eikonal",
                                                  "nonlinear_diffusion"};
    return tags;
}

inline std::vector<FieldPair> generate(const std::string& pde_tag, const GrfSpec& spec, int n) {
    if (pde_tag == "darcy") return gen_darcy(spec, n);
    if (pde_tag == "advection") return gen_advection(spec, n);
    if (pde_tag == "eikonal") return gen_eikonal(spec, n);
    if (pde_tag == "nonlinear_diffusion") return gen_nonlinear_diffusion(spec, n);
    throw std::invalid_argument("unknown pde tag: " + pde_tag);
}

}  // namespace gola::pde
