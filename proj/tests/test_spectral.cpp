#include <doctest.h>

#include "gola/adapt.hpp"
#include "gola/geometry.hpp"
#include "gola/spectral.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace gola;
using namespace gola::ad;
using namespace gola::spectral;

using T = double;
using Td = Tensor<double>;
constexpr double kTau = 2.0 * std::numbers::pi;

namespace {

Encoder<T> plain_encoder(ParamStore<T>& ps, int c_in, int c_out, int m_count,
                         uint64_t seed = 1, T jitter = T(0)) {
    Pcg32 rng(seed);
    return Encoder<T>::make(ps, "enc", c_in, c_out, m_count, jitter, rng);
}

/// Identity spectral filter: C_in == C_out, W_{c,o,m} = delta_{co} + 0i.
void set_identity_filter(ParamStore<T>& ps, const Encoder<T>& enc) {
    Arr<T> re = Arr<T>::Zero(static_cast<int64_t>(enc.c_in) * enc.c_out * enc.modes);
    for (int c = 0; c < enc.c_in; ++c)
        for (int m = 0; m < enc.modes; ++m)
            re[static_cast<int64_t>(c * enc.c_out + c) * enc.modes + m] = 1;
    ps.at("enc.w_re").set_values(re);
    ps.at("enc.w_im").set_values(
        Arr<T>::Zero(static_cast<int64_t>(enc.c_in) * enc.c_out * enc.modes));
}

void set_frequencies(ParamStore<T>& ps, const std::vector<std::pair<double, double>>& fr) {
    Arr<T> om(static_cast<int64_t>(fr.size()) * 2);
    for (size_t m = 0; m < fr.size(); ++m) {
        om[static_cast<int64_t>(2 * m)] = fr[m].first;
        om[static_cast<int64_t>(2 * m) + 1] = fr[m].second;
    }
    ps.at("enc.omegas").set_values(om);
}

}  // namespace

TEST_CASE("integer mode table starts at the origin and walks outward") {
    auto m5 = integer_modes(5);
    std::vector<std::pair<int, int>> want = {{0, 0}, {-1, 0}, {0, -1}, {0, 1}, {1, 0}};
    CHECK(m5 == want);
    auto m64 = integer_modes(64);
    CHECK(m64.size() == 64);
    // squared norms are non-decreasing
    for (size_t i = 1; i < m64.size(); ++i) {
        int a = m64[i - 1].first * m64[i - 1].first + m64[i - 1].second * m64[i - 1].second;
        int b = m64[i].first * m64[i].first + m64[i].second * m64[i].second;
        CHECK(a <= b);
    }
}

TEST_CASE("zero frequency gives the constant basis column") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 3);
    set_frequencies(ps, {{0, 0}, {1, 0}, {0, 1}});
    PointSet pts = sample_points(8, 20, 3);
    auto phi = enc.basis(to_tensor(pts.coords));
    for (int i = 0; i < 20; ++i) {
        CHECK(phi.re.values()[i * 3] == doctest::Approx(1.0));
        CHECK(phi.im.values()[i * 3] == doctest::Approx(0.0));
    }
}

TEST_CASE("half-period point lands on exp(i pi) = -1") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 1);
    set_frequencies(ps, {{1, 0}});
    RowMatd x(1, 2);
    x << 0.5, 0.25;
    auto phi = enc.basis(to_tensor(x));
    CHECK(phi.re.values()[0] == doctest::Approx(-1.0));
    CHECK(std::abs(phi.im.values()[0]) < 1e-12);
}

TEST_CASE("basis matches a scalar cos/sin loop and has unit modulus") {
    ParamStore<T> ps;
    Pcg32 rng(17);
    auto enc = Encoder<T>::make(ps, "enc", 1, 1, 12, T(0.3), rng);
    PointSet pts = sample_points(32, 25, 9);
    auto phi = enc.basis(to_tensor(pts.coords));
    const auto& om = ps.at("enc.omegas").values();
    for (int i = 0; i < 25; ++i)
        for (int m = 0; m < 12; ++m) {
            double theta =
                kTau * (om[2 * m] * pts.coords(i, 0) + om[2 * m + 1] * pts.coords(i, 1));
            CHECK(phi.re.values()[i * 12 + m] == doctest::Approx(std::cos(theta)));
            CHECK(phi.im.values()[i * 12 + m] == doctest::Approx(std::sin(theta)));
            double mod2 = phi.re.values()[i * 12 + m] * phi.re.values()[i * 12 + m] +
                          phi.im.values()[i * 12 + m] * phi.im.values()[i * 12 + m];
            CHECK(std::abs(mod2 - 1.0) < 1e-9);
        }
}

TEST_CASE("constant field projects onto the zero mode as its mean") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 1);
    set_frequencies(ps, {{0, 0}});
    PointSet pts = sample_points(16, 50, 2);
    RowMatd f = RowMatd::Constant(50, 1, 3.0);
    auto phi = enc.basis(to_tensor(pts.coords));
    auto uhat = enc.forward_coefficients(to_tensor(f), phi);
    CHECK(uhat.re.values()[0] == doctest::Approx(3.0));
    CHECK(std::abs(uhat.im.values()[0]) < 1e-12);
}

TEST_CASE("integer modes are orthogonal on the wrap-around lattice") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 2);
    set_frequencies(ps, {{1, 0}, {2, 0}});
    PointSet pts = periodic_lattice(64);
    RowMatd f(pts.size(), 1);
    for (int i = 0; i < pts.size(); ++i) f(i, 0) = std::cos(kTau * pts.coords(i, 0));
    auto phi = enc.basis(to_tensor(pts.coords));
    auto uhat = enc.forward_coefficients(to_tensor(f), phi);
    // cos(2 pi x1) = (e^{i 2 pi x1} + e^{-i 2 pi x1})/2: mode (1,0) holds 1/2
    CHECK(std::abs(uhat.re.values()[0] - 0.5) < 1e-9);
    CHECK(std::abs(uhat.im.values()[0]) < 1e-9);
    // mode (2,0) holds nothing
    CHECK(std::abs(uhat.re.values()[1]) < 1e-9);
    CHECK(std::abs(uhat.im.values()[1]) < 1e-9);
}

TEST_CASE("identity filter passes coefficients through") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 4);
    set_identity_filter(ps, enc);
    Pcg32 rng(3);
    Arr<T> ur(4), ui(4);
    for (int i = 0; i < 4; ++i) {
        ur[i] = rng.uniform(-1, 1);
        ui[i] = rng.uniform(-1, 1);
    }
    Complex<T> uhat{Td::constant({1, 4}, ur), Td::constant({1, 4}, ui)};
    auto vhat = enc.filter(uhat);
    for (int i = 0; i < 4; ++i) {
        CHECK(vhat.re.values()[i] == doctest::Approx(ur[i]));
        CHECK(vhat.im.values()[i] == doctest::Approx(ui[i]));
    }
}

TEST_CASE("imaginary unit filter rotates coefficients by i") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 1);
    ps.at("enc.w_re").set_values(Arr<T>::Zero(1));
    Arr<T> one(1);
    one[0] = 1;
    ps.at("enc.w_im").set_values(one);
    Complex<T> uhat{Td::constant({1, 1}, one), Td::constant({1, 1}, Arr<T>::Zero(1))};
    auto vhat = enc.filter(uhat);
    CHECK(vhat.re.values()[0] == doctest::Approx(0.0));
    CHECK(vhat.im.values()[0] == doctest::Approx(1.0));
}

TEST_CASE("filter matches the naive triple loop") {
    const int cin = 3, cout = 2, m_count = 5;
    ParamStore<T> ps;
    Pcg32 rng(23);
    auto enc = Encoder<T>::make(ps, "enc", cin, cout, m_count, T(0.01), rng);
    Arr<T> ur(cin * m_count), ui(cin * m_count);
    for (Eigen::Index i = 0; i < ur.size(); ++i) {
        ur[i] = rng.uniform(-1, 1);
        ui[i] = rng.uniform(-1, 1);
    }
    Complex<T> uhat{Td::constant({cin, m_count}, ur), Td::constant({cin, m_count}, ui)};
    auto vhat = enc.filter(uhat);
    const auto& wr = ps.at("enc.w_re").values();
    const auto& wi = ps.at("enc.w_im").values();
    for (int o = 0; o < cout; ++o)
        for (int m = 0; m < m_count; ++m) {
            double re = 0, im = 0;
            for (int c = 0; c < cin; ++c) {
                double a = ur[c * m_count + m], b = ui[c * m_count + m];
                double cc = wr[(c * cout + o) * m_count + m], d = wi[(c * cout + o) * m_count + m];
                re += a * cc - b * d;
                im += a * d + b * cc;
            }
            CHECK(vhat.re.values()[o * m_count + m] == doctest::Approx(re).epsilon(1e-10));
            CHECK(vhat.im.values()[o * m_count + m] == doctest::Approx(im).epsilon(1e-10));
        }
}

TEST_CASE("inverse synthesis trivial cases and loop oracle") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 1);
    set_frequencies(ps, {{0, 0}});
    PointSet pts = sample_points(8, 10, 5);
    auto phi = enc.basis(to_tensor(pts.coords));
    Arr<T> one(1);
    one[0] = 1;
    Complex<T> vhat{Td::constant({1, 1}, one), Td::constant({1, 1}, Arr<T>::Zero(1))};
    auto h = enc.inverse(vhat, phi);
    for (int i = 0; i < 10; ++i) CHECK(h.values()[i] == doctest::Approx(1.0));

    Complex<T> zero{Td::constant({1, 1}, Arr<T>::Zero(1)), Td::constant({1, 1}, Arr<T>::Zero(1))};
    auto hz = enc.inverse(zero, phi);
    for (int i = 0; i < 10; ++i) CHECK(hz.values()[i] == 0.0);

    // random instance vs naive loop
    ParamStore<T> ps2;
    Pcg32 rng(31);
    auto enc2 = Encoder<T>::make(ps2, "enc", 1, 3, 6, T(0.2), rng);
    auto phi2 = enc2.basis(to_tensor(pts.coords));
    Arr<T> vr(3 * 6), vi(3 * 6);
    for (Eigen::Index i = 0; i < vr.size(); ++i) {
        vr[i] = rng.uniform(-1, 1);
        vi[i] = rng.uniform(-1, 1);
    }
    Complex<T> v2{Td::constant({3, 6}, vr), Td::constant({3, 6}, vi)};
    auto h2 = enc2.inverse(v2, phi2);
    for (int i = 0; i < 10; ++i)
        for (int o = 0; o < 3; ++o) {
            double want = 0;
            for (int m = 0; m < 6; ++m)
                want += vr[o * 6 + m] * phi2.re.values()[i * 6 + m] -
                        vi[o * 6 + m] * phi2.im.values()[i * 6 + m];
            CHECK(h2.values()[i * 3 + o] == doctest::Approx(want).epsilon(1e-10));
        }
}

TEST_CASE("band-limited fields reconstruct exactly on the full lattice") {
    ParamStore<T> ps;
    auto enc = plain_encoder(ps, 1, 1, 5);
    set_identity_filter(ps, enc);  // frequencies already the 5 lowest integer modes

    PointSet pts = periodic_lattice(64);
    RowMatd f(pts.size(), 1);
    for (int i = 0; i < pts.size(); ++i) {
        double x = pts.coords(i, 0), y = pts.coords(i, 1);
        f(i, 0) = 0.7 + 1.3 * std::cos(kTau * x) - 0.4 * std::sin(kTau * x) +
                  0.9 * std::cos(kTau * y) + 0.2 * std::sin(kTau * y);
    }
    auto h = enc.encode(to_tensor(f), to_tensor(pts.coords));
    double num = 0, den = 0;
    for (int i = 0; i < pts.size(); ++i) {
        num += (h.values()[i] - f(i, 0)) * (h.values()[i] - f(i, 0));
        den += f(i, 0) * f(i, 0);
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("single-point encode reduces to the mode-summed filter weight") {
    ParamStore<T> ps;
    Pcg32 rng(41);
    auto enc = Encoder<T>::make(ps, "enc", 1, 2, 4, T(0.1), rng);
    RowMatd x(1, 2);
    x << 0.3, 0.8;
    RowMatd f(1, 1);
    f << 2.5;
    auto h = enc.encode(to_tensor(f), to_tensor(x));
    // uhat_m = f * conj(Phi_m); h_o = Re(sum_m uhat_m W_om Phi_m) = f * sum_m Re(W_om)
    const auto& wr = ps.at("enc.w_re").values();
    for (int o = 0; o < 2; ++o) {
        double want = 0;
        for (int m = 0; m < 4; ++m) want += wr[o * 4 + m];
        CHECK(h.values()[o] == doctest::Approx(2.5 * want));
    }
}

TEST_CASE("encode is linear in the field") {
    ParamStore<T> ps;
    Pcg32 rng(53);
    auto enc = Encoder<T>::make(ps, "enc", 2, 3, 8, T(0.15), rng);
    PointSet pts = sample_points(32, 30, 8);
    auto xs = to_tensor(pts.coords);
    RowMatd f1(30, 2), f2(30, 2);
    for (int i = 0; i < 30; ++i)
        for (int c = 0; c < 2; ++c) {
            f1(i, c) = rng.uniform(-1, 1);
            f2(i, c) = rng.uniform(-1, 1);
        }
    const double al = 1.7, be = -0.6;
    auto h1 = enc.encode(to_tensor(f1), xs);
    auto h2 = enc.encode(to_tensor(f2), xs);
    auto hc = enc.encode(to_tensor(RowMatd(al * f1 + be * f2)), xs);
    double num = 0, den = 0;
    for (Eigen::Index i = 0; i < hc.numel(); ++i) {
        double want = al * h1.values()[i] + be * h2.values()[i];
        num += (hc.values()[i] - want) * (hc.values()[i] - want);
        den += want * want;
    }
    CHECK(std::sqrt(num / std::max(den, 1e-30)) < 1e-6);

    auto hz = enc.encode(to_tensor(RowMatd(RowMatd::Zero(30, 2))), xs);
    for (Eigen::Index i = 0; i < hz.numel(); ++i) CHECK(hz.values()[i] == doctest::Approx(0.0));
}

TEST_CASE("permuting points permutes the encoding") {
    ParamStore<T> ps;
    Pcg32 rng(61);
    auto enc = Encoder<T>::make(ps, "enc", 1, 4, 6, T(0.1), rng);
    PointSet pts = sample_points(32, 20, 13);
    RowMatd f(20, 1);
    for (int i = 0; i < 20; ++i) f(i, 0) = rng.uniform(-1, 1);
    auto h = enc.encode(to_tensor(f), to_tensor(pts.coords));

    std::vector<int> perm = {5, 3, 19, 0, 7, 12, 1, 18, 2, 9, 4, 11, 6, 17, 8, 15, 10, 14, 13, 16};
    RowMatd xp(20, 2), fp(20, 1);
    for (int i = 0; i < 20; ++i) {
        xp.row(perm[static_cast<size_t>(i)]) = pts.coords.row(i);
        fp.row(perm[static_cast<size_t>(i)]) = f.row(i);
    }
    auto hp = enc.encode(to_tensor(fp), to_tensor(xp));
    for (int i = 0; i < 20; ++i)
        for (int o = 0; o < 4; ++o)
            CHECK(std::abs(hp.values()[perm[static_cast<size_t>(i)] * 4 + o] -
                           h.values()[i * 4 + o]) < 1e-12);
}

TEST_CASE("encoder gradients pass the finite-difference check") {
    ParamStore<T> ps;
    Pcg32 rng(71);
    auto enc = Encoder<T>::make(ps, "enc", 1, 2, 4, T(0.2), rng);
    PointSet pts = sample_points(16, 6, 19);
    auto xs = to_tensor(pts.coords);
    auto& f = ps.create_uniform("f", {6, 1}, T(1), rng);  // field treated as learnable here
    auto res = grad_check(ps, [&] {
        auto h = enc.encode(f, xs);
        return mean(mul(h, h));
    });
    CAPTURE(res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
    // smooth composition at 64-bit typically lands far tighter
    CHECK(res.max_rel_err < 1e-6);
}
