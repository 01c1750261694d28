#include "gola/train.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace gola;
using model::ModelConfig;
using model::ModelKind;
using ad::Arr;
using ad::Tensor;

namespace {

Eigen::VectorXd random_vector(int n, uint64_t seed) {
    Pcg32 rng(seed);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

/// Dataset whose solution map is affine: u = 0.5 f + 0.2.
io::Dataset affine_dataset(int grid_res, int n, uint64_t seed) {
    io::Dataset ds;
    ds.pde_tag = "synthetic_affine";
    ds.grid_res = grid_res;
    ds.seed = seed;
    for (int i = 0; i < n; ++i) {
        pde::FieldPair p;
        p.pde_tag = ds.pde_tag;
        p.f_grid = pde::sample_grf({grid_res, 3.0, 2.5, mix_seed(seed, static_cast<uint64_t>(i))});
        p.u_grid = 0.5 * p.f_grid + RowMatd::Constant(grid_res, grid_res, 0.2);
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

}  // namespace

TEST_CASE("relative l2 satisfies its unit contract") {
    Eigen::VectorXd truth = random_vector(20, 1);
    CHECK(train::relative_l2_value(truth, truth) == 0.0);
    CHECK(train::relative_l2_value(Eigen::VectorXd::Zero(20), truth) ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(train::relative_l2_value(2.0 * truth, truth) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("relative l2 is scale equivariant and rejects non-finite input") {
    Eigen::VectorXd pred = random_vector(15, 2);
    Eigen::VectorXd truth = random_vector(15, 3);
    const double base = train::relative_l2_value(pred, truth);
    for (double c : {0.5, 3.0, 100.0})
        CHECK(std::abs(train::relative_l2_value(c * pred, c * truth) - base) < 1e-9);

    Eigen::VectorXd bad = pred;
    bad(4) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train::relative_l2_value(bad, truth), std::invalid_argument);
    CHECK_THROWS_AS(train::relative_l2_value(pred, bad), std::invalid_argument);
}

TEST_CASE("tensor relative l2 matches the plain version and is differentiable") {
    Pcg32 rng(7);
    ad::ParamStore<double> ps;
    auto& pred = ps.create_normal("pred", {6}, 1.0, rng);
    Arr<double> tv(6);
    for (int i = 0; i < 6; ++i) tv[i] = rng.normal() + 2.0;
    auto truth = Tensor<double>::constant({6}, tv);

    auto loss = train::relative_l2(pred, truth);
    Eigen::VectorXd pv(6), tvv(6);
    for (int i = 0; i < 6; ++i) {
        pv(i) = pred.values()[i];
        tvv(i) = tv[i];
    }
    CHECK(loss.item() == doctest::Approx(train::relative_l2_value(pv, tvv)).epsilon(1e-12));

    auto res = ad::grad_check<double>(ps, [&] { return train::relative_l2(pred, truth); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("adam first step from zero state matches the hand formula") {
    ad::ParamStore<double> ps;
    Arr<double> init(2);
    init << 1.0, 2.0;
    auto& p = ps.create("p", {2}, init);
    Arr<double> gv(2);
    gv << 0.1, -0.2;
    auto g = Tensor<double>::constant({2}, gv);

    train::AdamConfig cfg;
    train::Adam<double> opt(ps, cfg);
    auto loss = ad::sum(ad::mul(p, g));
    loss.backward();
    opt.step();
    for (int i = 0; i < 2; ++i) {
        const double expect = init[i] - cfg.lr * gv[i] / (std::abs(gv[i]) + cfg.eps);
        CHECK(p.values()[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("adam leaves parameters alone when the gradient is zero") {
    ad::ParamStore<double> ps;
    Arr<double> init(3);
    init << 0.3, -0.4, 0.5;
    auto& p = ps.create("p", {3}, init);
    train::Adam<double> opt(ps, {});
    auto loss = ad::sum(ad::mul(p, Tensor<double>::constant({3}, Arr<double>::Zero(3))));
    loss.backward();
    opt.step();
    for (int i = 0; i < 3; ++i) CHECK(p.values()[i] == init[i]);
}

TEST_CASE("adam update magnitude approaches the learning rate under constant gradient") {
    ad::ParamStore<double> ps;
    auto& p = ps.create("p", {1}, Arr<double>::Zero(1));
    train::AdamConfig cfg;
    train::Adam<double> opt(ps, cfg);
    auto g = Tensor<double>::constant({1}, Arr<double>::Constant(1, 0.37));
    double prev = 0;
    for (int t = 0; t < 50; ++t) {
        prev = p.values()[0];
        auto loss = ad::sum(ad::mul(p, g));
        loss.backward();
        opt.step();
    }
    const double delta = std::abs(p.values()[0] - prev);
    CHECK(delta == doctest::Approx(cfg.lr).epsilon(0.01));
}

TEST_CASE("adam refuses non-finite gradients by name") {
    ad::ParamStore<double> ps;
    ps.create("w.bad", {2}, Arr<double>::Zero(2));
    train::Adam<double> opt(ps, {});
    Arr<double> gv(2);
    gv << std::numeric_limits<double>::infinity(), 1.0;
    auto loss = ad::sum(ad::mul(ps.at("w.bad"), Tensor<double>::constant({2}, gv)));
    loss.backward();
    CHECK_THROWS_WITH_AS(opt.step(), "adam: non-finite gradient for parameter w.bad",
                         std::runtime_error);
}

TEST_CASE("the learning rate halves on the configured interval") {
    ad::ParamStore<double> ps;
    ps.create("p", {1}, Arr<double>::Zero(1));
    train::AdamConfig cfg;
    cfg.lr = 1e-3;
    cfg.decay_factor = 0.5;
    cfg.decay_interval = 100;
    train::Adam<double> opt(ps, cfg);
    opt.set_epoch(0);
    CHECK(opt.learning_rate() == 1e-3);
    opt.set_epoch(99);
    CHECK(opt.learning_rate() == 1e-3);
    opt.set_epoch(100);
    CHECK(opt.learning_rate() == 0.5e-3);
    opt.set_epoch(250);
    CHECK(opt.learning_rate() == 0.25e-3);
}

TEST_CASE("a single affine sample is memorized") {
    auto ds = affine_dataset(17, 2, 11);
    ModelConfig mcfg;
    mcfg.modes = 8;
    mcfg.channels = 8;
    mcfg.heads = 2;
    mcfg.head_dim = 4;
    mcfg.msgpass_blocks = 1;
    mcfg.residual_depth = 1;
    mcfg.gat_layers = 1;
    train::TrainConfig tcfg;
    tcfg.epochs = 200;
    tcfg.batch_size = 1;
    tcfg.lr = 3e-3;
    tcfg.seed = 5;
    tcfg.train_size = 1;
    tcfg.train_density = 30;
    tcfg.test_size = 1;
    tcfg.eval_densities = {30};
    auto report = train::fit(ds, ModelKind::gola, mcfg, tcfg);
    REQUIRE(report.epoch_train_loss.size() == 200);
    CHECK(report.epoch_train_loss.back() < 0.05);
    CHECK(report.final_train_error < 0.05);
}

TEST_CASE("fits are deterministic and evaluating the training graphs matches the report") {
    auto ds = affine_dataset(17, 3, 13);
    ModelConfig mcfg;
    mcfg.baseline_channels = 6;
    mcfg.baseline_layers = 2;
    train::TrainConfig tcfg;
    tcfg.epochs = 4;
    tcfg.batch_size = 2;
    tcfg.seed = 21;
    tcfg.train_size = 2;
    tcfg.train_density = 15;
    tcfg.test_size = 1;
    tcfg.eval_densities = {15, 25};

    auto out1 = train::fit_model(ds, ModelKind::gcn, mcfg, tcfg);
    auto out2 = train::fit_model(ds, ModelKind::gcn, mcfg, tcfg);
    REQUIRE(out1.report.epoch_train_loss.size() == 4);
    CHECK(out1.report.epoch_train_loss == out2.report.epoch_train_loss);
    CHECK(out1.report.density_test_error == out2.report.density_test_error);
    CHECK(out1.report.final_train_error == out2.report.final_train_error);
    CHECK(out1.report.param_count == out2.report.param_count);
    CHECK(out1.report.param_count > 0);
    REQUIRE(out1.report.density_test_error.size() == 2);
    CHECK(out1.report.density_test_error[0].first == 15);
    CHECK(out1.report.density_test_error[1].first == 25);
    for (double v : out1.report.epoch_train_loss) CHECK(std::isfinite(v));

    // the reported train-side error is reproducible from the trained model
    double acc = 0;
    for (int i = 0; i < tcfg.train_size; ++i) {
        auto s = train::build_sample(ds.pairs[static_cast<size_t>(i)], tcfg.train_density,
                                     train::train_sample_seed(tcfg.seed, i), tcfg.radius);
        acc += train::evaluate_sample(out1.model, s);
    }
    CHECK(acc / tcfg.train_size == doctest::Approx(out1.report.final_train_error).epsilon(1e-12));
    CHECK(acc / tcfg.train_size <= out1.report.final_train_error + 1e-6);
}

TEST_CASE("fit validates its inputs") {
    auto ds = affine_dataset(9, 2, 17);
    ModelConfig mcfg;
    train::TrainConfig tcfg;
    tcfg.train_size = 2;  // nothing left for testing
    CHECK_THROWS_AS(train::fit(ds, ModelKind::gcn, mcfg, tcfg), std::invalid_argument);
    tcfg.train_size = 1;
    tcfg.epochs = 0;
    CHECK_THROWS_AS(train::fit(ds, ModelKind::gcn, mcfg, tcfg), std::invalid_argument);
}

TEST_CASE("run reports round-trip through json and csv at printed precision") {
    train::RunReport r;
    r.model_kind = "gola";
    r.seed = 99;
    r.param_count = 123456;
    r.wall_seconds = 12.3456789;
    r.final_train_error = 0.0123456789;
    r.epoch_train_loss = {0.987654321, 0.5, 1e-7, 0.333333333333};
    r.density_test_error = {{50, 0.42691234}, {200, 0.2}, {800, 0.114712345}};
    r.config_echo = train::TrainConfig{}.to_json();

    auto j = r.to_json();
    auto r2 = train::RunReport::from_json(j);
    CHECK(r2.to_json() == j);

    const std::string csv = r.to_csv();
    auto r3 = train::RunReport::from_csv(csv);
    CHECK(r3.to_csv() == csv);
    CHECK(r3.epoch_train_loss.size() == 4);
    CHECK(r3.density_test_error.size() == 3);
}

TEST_CASE("a singleton density sweep equals the corresponding fit") {
    auto ds = affine_dataset(17, 3, 19);
    ModelConfig mcfg;
    mcfg.baseline_channels = 5;
    mcfg.baseline_layers = 2;
    train::TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 2;
    tcfg.seed = 8;
    tcfg.train_size = 2;
    tcfg.test_size = 1;

    auto table = train::density_sweep(ds, {ModelKind::gcn}, {12}, mcfg, tcfg);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].kind == "gcn");
    CHECK(table.rows[0].density == 12);

    train::TrainConfig direct = tcfg;
    direct.train_density = 12;
    direct.eval_densities = {12};
    auto report = train::fit(ds, ModelKind::gcn, mcfg, direct);
    CHECK(table.rows[0].test_rel_l2 == report.density_test_error.front().second);

    const std::string csv = table.to_csv();
    auto back = train::SweepTable::from_csv(csv);
    CHECK(back.to_csv() == csv);
}
