#include <doctest.h>

#include "gola/model.hpp"

#include <cmath>
#include <vector>

using namespace gola;
using namespace gola::ad;
using namespace gola::model;

using T = double;
using Td = Tensor<double>;

namespace {

RowMatd random_mat(int r, int c, Pcg32& rng, double lo = -1, double hi = 1) {
    RowMatd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.modes = 6;
    cfg.channels = 6;
    cfg.heads = 2;
    cfg.head_dim = 3;
    cfg.msgpass_blocks = 2;
    cfg.residual_depth = 1;
    cfg.gat_layers = 1;
    cfg.baseline_channels = 5;
    cfg.baseline_layers = 2;
    cfg.kernel_hidden = 7;
    return cfg;
}

struct Instance {
    PointSet pts;
    SpatialGraph graph;
    RowMatd f;
};

Instance make_instance(int n, uint64_t seed, double radius) {
    Instance in;
    in.pts = sample_points(32, n, seed);
    in.graph = build_radius_graph(in.pts, radius);
    Pcg32 rng(mix_seed(seed, 77));
    in.f = random_mat(n, 1, rng);
    attach_edge_attributes(in.graph, in.pts, in.f);
    return in;
}

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

std::vector<double> mlp_ref(const nn::Mlp<T>& mlp, const std::vector<double>& in) {
    std::vector<double> cur = in;
    for (size_t li = 0; li < mlp.layers.size(); ++li) {
        const auto& w = mlp.layers[li].w;
        const auto& b = mlp.layers[li].b;
        const int ni = w.dim(0), no = w.dim(1);
        std::vector<double> next(static_cast<size_t>(no));
        for (int o = 0; o < no; ++o) {
            double acc = b.values()[o];
            for (int i = 0; i < ni; ++i) acc += cur[static_cast<size_t>(i)] * w.values()[i * no + o];
            next[static_cast<size_t>(o)] = acc;
        }
        if (li + 1 < mlp.layers.size())
            for (auto& v : next) v = gelu_ref(v);
        cur = next;
    }
    return cur;
}

}  // namespace

TEST_CASE("zeroed network outputs the head bias everywhere") {
    auto b = build_model<T>(ModelKind::gola, tiny_config(), 5);
    for (auto& [name, p] : *b.params) p.set_values(Arr<T>::Zero(p.numel()));
    Arr<T> bias(1);
    bias[0] = 2.5;
    b.params->at("gat0.head.b").set_values(bias);
    Instance in = make_instance(14, 3, 0.35);
    auto u = b.forward(in.pts, in.f, in.graph);
    REQUIRE(u.shape() == Shape{14, 1});
    for (int i = 0; i < 14; ++i) CHECK(u.values()[i] == doctest::Approx(2.5));
}

TEST_CASE("identical builds produce bitwise identical outputs") {
    auto a = build_model<T>(ModelKind::gola, tiny_config(), 42);
    auto b = build_model<T>(ModelKind::gola, tiny_config(), 42);
    Instance in = make_instance(16, 9, 0.3);
    auto ua = a.forward(in.pts, in.f, in.graph);
    auto ub = b.forward(in.pts, in.f, in.graph);
    for (Eigen::Index i = 0; i < ua.numel(); ++i) CHECK(ua.values()[i] == ub.values()[i]);
    auto c = build_model<T>(ModelKind::gola, tiny_config(), 43);
    auto uc = c.forward(in.pts, in.f, in.graph);
    bool any_diff = false;
    for (Eigen::Index i = 0; i < ua.numel(); ++i)
        if (ua.values()[i] != uc.values()[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("full model is permutation equivariant") {
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        auto b = build_model<T>(ModelKind::gola, tiny_config(), 11);
        const int n = 15;
        Instance in = make_instance(n, seed, 0.35);
        auto u = b.forward(in.pts, in.f, in.graph);

        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        Pcg32 prng(mix_seed(seed, 5));
        for (int i = n - 1; i > 0; --i)
            std::swap(perm[static_cast<size_t>(i)],
                      perm[static_cast<size_t>(prng.below(static_cast<uint64_t>(i + 1)))]);
        PointSet ppts;
        ppts.coords.resize(n, 2);
        RowMatd pf(n, 1);
        for (int i = 0; i < n; ++i) {
            ppts.coords.row(perm[static_cast<size_t>(i)]) = in.pts.coords.row(i);
            pf.row(perm[static_cast<size_t>(i)]) = in.f.row(i);
        }
        SpatialGraph pg = build_radius_graph(ppts, 0.35);
        attach_edge_attributes(pg, ppts, pf);
        auto up = b.forward(ppts, pf, pg);
        double worst = 0;
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(up.values()[perm[static_cast<size_t>(i)]] -
                                             u.values()[i]));
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("small full-model gradient check") {
    ModelConfig cfg = tiny_config();
    cfg.modes = 4;
    cfg.channels = 4;
    cfg.heads = 1;
    cfg.head_dim = 2;
    cfg.msgpass_blocks = 1;
    auto b = build_model<T>(ModelKind::gola, cfg, 7);
    Instance in = make_instance(8, 21, 0.4);
    auto pts_t = to_tensor(in.pts.coords);
    auto f_t = to_tensor(in.f);
    auto ea_t = to_tensor(in.graph.edge_attr);
    auto res = grad_check(*b.params, [&] {
        auto u = b.forward(pts_t, f_t, in.graph, ea_t);
        return mean(mul(u, u));
    });
    CAPTURE(res.worst_param);
    CAPTURE(res.worst_index);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gkn with zero kernel, identity w, no activation passes h through") {
    ModelConfig cfg = tiny_config();
    cfg.baseline_activation = false;
    auto b = build_model<T>(ModelKind::gkn, cfg, 13);
    const int c = cfg.baseline_channels;
    for (auto& [name, p] : *b.params)
        if (name.rfind("kernel", 0) == 0) p.set_values(Arr<T>::Zero(p.numel()));
    Arr<T> eye = Arr<T>::Zero(c * c);
    for (int i = 0; i < c; ++i) eye[i * c + i] = 1;
    b.params->at("w").set_values(eye);

    Instance in = make_instance(12, 31, 0.35);
    auto u = b.forward(in.pts, in.f, in.graph);
    const auto& gkn = std::get<Gkn<T>>(b.net);
    auto lifted = gkn.lift(concat<T>({to_tensor(in.pts.coords), to_tensor(in.f)}, 1));
    auto want = gkn.proj(lifted);
    for (Eigen::Index i = 0; i < u.numel(); ++i)
        CHECK(u.values()[i] == doctest::Approx(want.values()[i]).epsilon(1e-12));
}

TEST_CASE("gkn matches a per-layer scalar loop and handles isolated nodes") {
    ModelConfig cfg = tiny_config();
    auto b = build_model<T>(ModelKind::gkn, cfg, 17);
    const auto& gkn = std::get<Gkn<T>>(b.net);
    const int c = cfg.baseline_channels;

    // small graph with node 3 isolated
    PointSet pts;
    pts.coords.resize(4, 2);
    pts.coords << 0.1, 0.1, 0.2, 0.1, 0.15, 0.2, 0.9, 0.9;
    SpatialGraph g = build_radius_graph(pts, 0.2);
    Pcg32 rng(19);
    RowMatd f = random_mat(4, 1, rng);
    attach_edge_attributes(g, pts, f);
    REQUIRE(g.offsets[4] == g.offsets[3]);  // node 3 has no incoming edges

    auto u = b.forward(pts, f, g);

    // scalar reference
    std::vector<std::vector<double>> h(4);
    for (int i = 0; i < 4; ++i) {
        std::vector<double> in = {pts.coords(i, 0), pts.coords(i, 1), f(i, 0)};
        nn::Mlp<T> lift_mlp;
        lift_mlp.layers.push_back(gkn.lift);
        h[static_cast<size_t>(i)] = mlp_ref(lift_mlp, in);
    }
    std::vector<std::vector<double>> kmat(static_cast<size_t>(g.num_edges()));
    for (int e = 0; e < g.num_edges(); ++e) {
        std::vector<double> ein;
        for (int k = 0; k < g.edge_attr.cols(); ++k) ein.push_back(g.edge_attr(e, k));
        kmat[static_cast<size_t>(e)] = mlp_ref(gkn.kernel, ein);
    }
    const auto& wv = gkn.w.values();
    for (int t = 0; t < gkn.rounds; ++t) {
        std::vector<std::vector<double>> next(4, std::vector<double>(static_cast<size_t>(c), 0.0));
        for (int i = 0; i < 4; ++i) {
            for (int o = 0; o < c; ++o)
                for (int k = 0; k < c; ++k)
                    next[static_cast<size_t>(i)][static_cast<size_t>(o)] +=
                        h[static_cast<size_t>(i)][static_cast<size_t>(k)] * wv[k * c + o];
            const int lo = g.offsets[static_cast<size_t>(i)], hi = g.offsets[static_cast<size_t>(i) + 1];
            for (int e = lo; e < hi; ++e) {
                int j = g.send[static_cast<size_t>(e)];
                for (int o = 0; o < c; ++o) {
                    double acc = 0;
                    for (int k = 0; k < c; ++k)
                        acc += kmat[static_cast<size_t>(e)][static_cast<size_t>(o * c + k)] *
                               h[static_cast<size_t>(j)][static_cast<size_t>(k)];
                    next[static_cast<size_t>(i)][static_cast<size_t>(o)] += acc / (hi - lo);
                }
            }
            if (gkn.activation)
                for (auto& v : next[static_cast<size_t>(i)]) v = gelu_ref(v);
        }
        h = next;
    }
    for (int i = 0; i < 4; ++i) {
        double want = gkn.proj.b.values()[0];
        for (int k = 0; k < c; ++k)
            want += h[static_cast<size_t>(i)][static_cast<size_t>(k)] * gkn.proj.w.values()[k];
        CHECK(std::abs(u.values()[i] - want) < 1e-10);
    }
}

TEST_CASE("gcn trivial cases") {
    ModelConfig cfg = tiny_config();
    auto b = build_model<T>(ModelKind::gcn, cfg, 23);
    for (auto& [name, p] : *b.params) p.set_values(Arr<T>::Zero(p.numel()));
    Arr<T> bias(1);
    bias[0] = -1.25;
    b.params->at("proj.b").set_values(bias);
    Instance in = make_instance(10, 37, 0.3);
    auto u = b.forward(in.pts, in.f, in.graph);
    for (int i = 0; i < 10; ++i) CHECK(u.values()[i] == doctest::Approx(-1.25));

    // complete graph with identical node features: outputs identical
    auto b2 = build_model<T>(ModelKind::gcn, cfg, 29);
    const int n = 6;
    PointSet pts;
    pts.coords = RowMatd::Constant(n, 2, 0.5);
    SpatialGraph g;
    g.num_nodes = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) {
                g.recv.push_back(i);
                g.send.push_back(j);
            }
    g.offsets.resize(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) g.offsets[static_cast<size_t>(i)] = i * (n - 1);
    RowMatd f = RowMatd::Constant(n, 1, 0.7);
    attach_edge_attributes(g, pts, f);
    auto u2 = b2.forward(pts, f, g);
    for (int i = 1; i < n; ++i)
        CHECK(u2.values()[i] == doctest::Approx(u2.values()[0]).epsilon(1e-12));
}

TEST_CASE("gcn matches a scalar loop") {
    ModelConfig cfg = tiny_config();
    auto b = build_model<T>(ModelKind::gcn, cfg, 31);
    const auto& gcn = std::get<Gcn<T>>(b.net);
    const int c = cfg.baseline_channels;
    Instance in = make_instance(9, 41, 0.35);
    auto u = b.forward(in.pts, in.f, in.graph);

    const int n = 9;
    std::vector<std::vector<double>> h(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        nn::Mlp<T> lift_mlp;
        lift_mlp.layers.push_back(gcn.lift);
        h[static_cast<size_t>(i)] =
            mlp_ref(lift_mlp, {in.pts.coords(i, 0), in.pts.coords(i, 1), in.f(i, 0)});
    }
    for (size_t t = 0; t < gcn.w_self.size(); ++t) {
        const auto& ws = gcn.w_self[t].values();
        const auto& wn = gcn.w_neigh[t].values();
        const auto& bb = gcn.bias[t].values();
        std::vector<std::vector<double>> next(static_cast<size_t>(n),
                                              std::vector<double>(static_cast<size_t>(c)));
        for (int i = 0; i < n; ++i) {
            std::vector<double> mean_h(static_cast<size_t>(c), 0.0);
            const int lo = in.graph.offsets[static_cast<size_t>(i)],
                      hi = in.graph.offsets[static_cast<size_t>(i) + 1];
            for (int e = lo; e < hi; ++e)
                for (int k = 0; k < c; ++k)
                    mean_h[static_cast<size_t>(k)] +=
                        h[static_cast<size_t>(in.graph.send[static_cast<size_t>(e)])]
                         [static_cast<size_t>(k)] /
                        (hi - lo);
            for (int o = 0; o < c; ++o) {
                double acc = bb[o];
                for (int k = 0; k < c; ++k)
                    acc += h[static_cast<size_t>(i)][static_cast<size_t>(k)] * ws[k * c + o] +
                           mean_h[static_cast<size_t>(k)] * wn[k * c + o];
                next[static_cast<size_t>(i)][static_cast<size_t>(o)] =
                    gcn.activation ? gelu_ref(acc) : acc;
            }
        }
        h = next;
    }
    for (int i = 0; i < n; ++i) {
        double want = gcn.proj.b.values()[0];
        for (int k = 0; k < c; ++k)
            want += h[static_cast<size_t>(i)][static_cast<size_t>(k)] * gcn.proj.w.values()[k];
        CHECK(std::abs(u.values()[i] - want) < 1e-10);
    }
}

TEST_CASE("parameter counting is a plain total") {
    ParamStore<T> ps;
    Pcg32 rng(1);
    ps.create_uniform("w", {3, 4}, T(1), rng);
    ps.create_zeros("b", {4});
    CHECK(ps.total_parameters() == 16);

    auto b = build_model<T>(ModelKind::gola, tiny_config(), 3);
    int64_t n = 0;
    for (auto& [name, p] : *b.params) n += p.numel();
    CHECK(b.param_count() == n);
    CHECK(b.param_count() > 0);
}
