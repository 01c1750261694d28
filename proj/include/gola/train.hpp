#pragma once

// Training and evaluation: relative-L2 loss, Adam, the fit loop over
// subsampled point-cloud graphs, and the density sweep used for the
// model-comparison tables.

#include "gola/dataset.hpp"
#include "gola/model.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gola::train {

constexpr double kRelEps = 1e-12;

/// ||truth - pred|| / (||truth|| + eps), differentiable in pred.
template <typename T>
ad::Tensor<T> relative_l2(const ad::Tensor<T>& pred, const ad::Tensor<T>& truth) {
    auto num = ad::sqrt(ad::sum(ad::square(ad::sub(truth, pred))));
    auto den = ad::add_scalar(ad::sqrt(ad::sum(ad::square(truth))), T(kRelEps));
    return ad::divide(num, den);
}

inline double relative_l2_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (!pred.allFinite() || !truth.allFinite())
        throw std::invalid_argument("relative_l2: non-finite input");
    return (truth - pred).norm() / (truth.norm() + kRelEps);
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay_factor = 0.5;
    int decay_interval = 100;  // epochs between decays; <= 0 disables
};

template <typename T>
class Adam {
public:
    Adam(ad::ParamStore<T>& params, AdamConfig cfg) : params_(&params), cfg_(cfg), lr_now_(cfg.lr) {
        for (const auto& [name, t] : params) {
            m_[name] = ad::Arr<T>::Zero(t.values().size());
            v_[name] = ad::Arr<T>::Zero(t.values().size());
        }
    }

    void set_epoch(int epoch) {
        const int k = cfg_.decay_interval > 0 ? epoch / cfg_.decay_interval : 0;
        lr_now_ = cfg_.lr * std::pow(cfg_.decay_factor, k);
    }
    double learning_rate() const { return lr_now_; }
    int steps_taken() const { return t_; }

    /// Applies one update from the gradients currently stored on the params.
    void step() {
        ++t_;
        const T bc1 = T(1) - std::pow(T(cfg_.beta1), T(t_));
        const T bc2 = T(1) - std::pow(T(cfg_.beta2), T(t_));
        for (auto& [name, tensor] : *params_) {
            const ad::Arr<T> g = tensor.grad();
            if (!g.allFinite())
                throw std::runtime_error("adam: non-finite gradient for parameter " + name);
            auto& m = m_.at(name);
            auto& v = v_.at(name);
            m = T(cfg_.beta1) * m + (T(1) - T(cfg_.beta1)) * g;
            v = T(cfg_.beta2) * v + (T(1) - T(cfg_.beta2)) * g.square();
            const ad::Arr<T> mhat = m / bc1;
            const ad::Arr<T> vhat = v / bc2;
            tensor.set_values(tensor.values() -
                              T(lr_now_) * mhat / (vhat.sqrt() + T(cfg_.eps)));
        }
    }

private:
    ad::ParamStore<T>* params_;
    AdamConfig cfg_;
    double lr_now_;
    int t_ = 0;
    std::map<std::string, ad::Arr<T>> m_, v_;
};

// ---------------------------------------------------------------------------
// graph samples

struct GraphSample {
    PointSet points;
    SpatialGraph graph;
    RowMatd f_node;     // N x C_in node inputs
    Eigen::VectorXd u;  // N targets
};

/// Deterministic seeds: training graphs depend on (run seed, pair index),
/// evaluation graphs on (run seed, density, pair index) so density sweeps
/// are paired across model kinds.
inline uint64_t train_sample_seed(uint64_t run_seed, int pair_index) {
    return mix_seed(mix_seed(run_seed, 0x747261696eULL), static_cast<uint64_t>(pair_index));
}
inline uint64_t eval_sample_seed(uint64_t run_seed, int density, int pair_index) {
    return mix_seed(mix_seed(run_seed, static_cast<uint64_t>(density)),
                    static_cast<uint64_t>(pair_index));
}

inline GraphSample build_sample(const pde::FieldPair& pair, int density, uint64_t seed,
                                double radius = 0.0) {
    auto sub = io::subsample(pair, density, seed);
    GraphSample s;
    s.points = std::move(sub.points);
    const double r = radius > 0 ? radius : default_radius(density);
    s.graph = build_radius_graph(s.points, r);
    s.f_node = sub.f_values;
    attach_edge_attributes(s.graph, s.points, s.f_node);
    s.u = std::move(sub.u_values);
    return s;
}

template <typename T>
double evaluate_sample(const model::Built<T>& model, const GraphSample& s) {
    auto pred = model.forward(s.points, s.f_node, s.graph);
    const auto& v = pred.values();
    Eigen::VectorXd p(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) p(i) = static_cast<double>(v[i]);
    return relative_l2_value(p, s.u);
}

// ---------------------------------------------------------------------------
// run configuration and report

struct TrainConfig {
    int epochs = 300;
    int batch_size = 4;
    double lr = 1e-3;
    double lr_decay_factor = 0.5;
    int lr_decay_interval = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    uint64_t seed = 0;
    int train_size = 30;
    int train_density = 200;
    int test_size = 100;  // capped by what the dataset holds beyond train_size
    std::vector<int> eval_densities = {50, 200, 800};
    double radius = 0.0;  // <= 0 selects the density-adaptive default

    nlohmann::json to_json() const {
        return {{"epochs", epochs},
                {"batch_size", batch_size},
                {"lr", lr},
                {"lr_decay_factor", lr_decay_factor},
                {"lr_decay_interval", lr_decay_interval},
                {"beta1", beta1},
                {"beta2", beta2},
                {"eps_adam", eps_adam},
                {"seed", seed},
                {"train_size", train_size},
                {"train_density", train_density},
                {"test_size", test_size},
                {"eval_densities", eval_densities},
                {"radius", radius}};
    }
};

namespace detail {

inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace detail

struct RunReport {
    std::string model_kind;
    uint64_t seed = 0;
    int64_t param_count = 0;
    double wall_seconds = 0;
    double final_train_error = 0;  // post-training error on the training graphs
    std::vector<double> epoch_train_loss;
    std::vector<std::pair<int, double>> density_test_error;
    nlohmann::json config_echo;

    nlohmann::json to_json() const {
        nlohmann::json dens = nlohmann::json::array();
        for (const auto& [d, e] : density_test_error)
            dens.push_back({{"density", d}, {"error", e}});
        return {{"model_kind", model_kind},
                {"seed", seed},
                {"param_count", param_count},
                {"wall_seconds", wall_seconds},
                {"final_train_error", final_train_error},
                {"epoch_train_loss", epoch_train_loss},
                {"density_test_error", dens},
                {"config", config_echo}};
    }

    static RunReport from_json(const nlohmann::json& j) {
        RunReport r;
        r.model_kind = j.at("model_kind").get<std::string>();
        r.seed = j.at("seed").get<uint64_t>();
        r.param_count = j.at("param_count").get<int64_t>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        r.final_train_error = j.at("final_train_error").get<double>();
        r.epoch_train_loss = j.at("epoch_train_loss").get<std::vector<double>>();
        for (const auto& row : j.at("density_test_error"))
            r.density_test_error.emplace_back(row.at("density").get<int>(),
                                              row.at("error").get<double>());
        r.config_echo = j.value("config", nlohmann::json::object());
        return r;
    }

    /// Three-column CSV (section,key,value). The config echo and wall-clock
    /// live only in the JSON form so reruns of one config emit identical CSVs.
    std::string to_csv() const {
        std::ostringstream out;
        out << "section,key,value\n";
        out << "meta,model_kind," << model_kind << "\n";
        out << "meta,seed," << seed << "\n";
        out << "meta,param_count," << param_count << "\n";
        out << "meta,final_train_error," << detail::fmt9(final_train_error) << "\n";
        for (size_t e = 0; e < epoch_train_loss.size(); ++e)
            out << "train_loss," << e << "," << detail::fmt9(epoch_train_loss[e]) << "\n";
        for (const auto& [d, err] : density_test_error)
            out << "test_rel_l2," << d << "," << detail::fmt9(err) << "\n";
        return out.str();
    }

    static RunReport from_csv(const std::string& csv) {
        RunReport r;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw std::invalid_argument("report csv: malformed line: " + line);
            const std::string section = line.substr(0, c1);
            const std::string key = line.substr(c1 + 1, c2 - c1 - 1);
            const std::string value = line.substr(c2 + 1);
            if (section == "meta") {
                if (key == "model_kind") r.model_kind = value;
                else if (key == "seed") r.seed = std::stoull(value);
                else if (key == "param_count") r.param_count = std::stoll(value);
                else if (key == "final_train_error") r.final_train_error = std::stod(value);
                else throw std::invalid_argument("report csv: unknown meta key: " + key);
            } else if (section == "train_loss") {
                r.epoch_train_loss.push_back(std::stod(value));
            } else if (section == "test_rel_l2") {
                r.density_test_error.emplace_back(std::stoi(key), std::stod(value));
            } else {
                throw std::invalid_argument("report csv: unknown section: " + section);
            }
        }
        return r;
    }
};

// ---------------------------------------------------------------------------
// fit

struct FitOutcome {
    RunReport report;
    model::Built<double> model;
};

inline FitOutcome fit_model(const io::Dataset& ds, model::ModelKind kind,
                            const model::ModelConfig& mcfg,
                            const TrainConfig& tcfg) {
    using T = double;
    if (tcfg.epochs < 1 || tcfg.lr <= 0)
        throw std::invalid_argument("fit: need epochs >= 1 and a positive learning rate");
    if (ds.count() <= tcfg.train_size)
        throw std::invalid_argument("fit: dataset holds " + std::to_string(ds.count()) +
                                    " pairs, need more than train_size = " +
                                    std::to_string(tcfg.train_size));
    const auto t0 = std::chrono::steady_clock::now();
    auto model = model::build_model<T>(kind, mcfg, tcfg.seed);

    struct Prepared {
        GraphSample sample;
        ad::Tensor<T> points, f, edge_attr, truth;
    };
    std::vector<Prepared> prepared;
    for (int i = 0; i < tcfg.train_size; ++i) {
        GraphSample s = build_sample(ds.pairs[static_cast<size_t>(i)], tcfg.train_density,
                                     train_sample_seed(tcfg.seed, i), tcfg.radius);
        const int nodes = static_cast<int>(s.u.size());
        ad::Arr<T> tv(nodes);
        for (int k = 0; k < nodes; ++k) tv[k] = static_cast<T>(s.u(k));
        Prepared p{std::move(s), {}, {}, {}, {}};
        p.points = to_tensor<T>(p.sample.points.coords);
        p.f = to_tensor<T>(p.sample.f_node);
        p.edge_attr = to_tensor<T>(p.sample.graph.edge_attr);
        p.truth = ad::Tensor<T>::constant({nodes, 1}, std::move(tv));
        prepared.push_back(std::move(p));
    }

    Adam<T> opt(*model.params, {tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps_adam,
                                tcfg.lr_decay_factor, tcfg.lr_decay_interval});
    Pcg32 shuffle_rng(mix_seed(tcfg.seed, 0x73687566666cULL));
    std::vector<int> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    RunReport report;
    report.model_kind = model::kind_name(kind);
    report.seed = tcfg.seed;
    report.param_count = model.param_count();
    report.config_echo = tcfg.to_json();

    const int n = static_cast<int>(prepared.size());
    const int bs = std::max(1, tcfg.batch_size);
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        opt.set_epoch(epoch);
        for (int k = n - 1; k > 0; --k) {
            const int j = static_cast<int>(shuffle_rng.below(static_cast<uint64_t>(k + 1)));
            std::swap(order[static_cast<size_t>(k)], order[static_cast<size_t>(j)]);
        }
        double epoch_loss = 0;
        for (int start = 0; start < n; start += bs) {
            const int count = std::min(bs, n - start);
            ad::Tensor<T> batch_loss;
            for (int b = 0; b < count; ++b) {
                const auto& p = prepared[static_cast<size_t>(order[static_cast<size_t>(start + b)])];
                auto pred = model.forward(p.points, p.f, p.sample.graph, p.edge_attr);
                auto loss = relative_l2(pred, p.truth);
                batch_loss = b == 0 ? loss : ad::add(batch_loss, loss);
            }
            batch_loss = ad::scale(batch_loss, T(1) / static_cast<T>(count));
            const T value = batch_loss.item();
            if (!std::isfinite(static_cast<double>(value)))
                throw std::runtime_error("fit: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += static_cast<double>(value) * count;
            batch_loss.backward();
            opt.step();
        }
        report.epoch_train_loss.push_back(epoch_loss / n);
    }

    double train_err = 0;
    for (const auto& p : prepared) train_err += evaluate_sample(model, p.sample);
    report.final_train_error = train_err / n;

    const int avail = ds.count() - tcfg.train_size;
    const int test_n = std::min(tcfg.test_size, avail);
    for (int d : tcfg.eval_densities) {
        double acc = 0;
        for (int i = 0; i < test_n; ++i) {
            GraphSample s = build_sample(ds.pairs[static_cast<size_t>(tcfg.train_size + i)], d,
                                         eval_sample_seed(tcfg.seed, d, i), tcfg.radius);
            acc += evaluate_sample(model, s);
        }
        report.density_test_error.emplace_back(d, acc / test_n);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(report), std::move(model)};
}

inline RunReport fit(const io::Dataset& ds, model::ModelKind kind,
                     const model::ModelConfig& mcfg,
                     const TrainConfig& tcfg) {
    return fit_model(ds, kind, mcfg, tcfg).report;
}

// ---------------------------------------------------------------------------
// density sweep

struct SweepRow {
    std::string kind;
    int density = 0;
    int train_size = 0;
    double test_rel_l2 = 0;
    uint64_t seed = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;

    std::string to_csv() const {
        std::ostringstream out;
        out << "kind,density,train_size,test_rel_l2,seed\n";
        for (const auto& r : rows)
            out << r.kind << "," << r.density << "," << r.train_size << ","
                << detail::fmt9(r.test_rel_l2) << "," << r.seed << "\n";
        return out.str();
    }

    static SweepTable from_csv(const std::string& csv) {
        SweepTable t;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            SweepRow r;
            std::istringstream row(line);
            std::string field;
            std::getline(row, r.kind, ',');
            std::getline(row, field, ',');
            r.density = std::stoi(field);
            std::getline(row, field, ',');
            r.train_size = std::stoi(field);
            std::getline(row, field, ',');
            r.test_rel_l2 = std::stod(field);
            std::getline(row, field, ',');
            r.seed = std::stoull(field);
            t.rows.push_back(std::move(r));
        }
        return t;
    }
};

/// One fit per (kind, density): the model trains and evaluates at that
/// density, mirroring the per-density comparison tables.
inline SweepTable density_sweep(const io::Dataset& ds,
                                const std::vector<model::ModelKind>& kinds,
                                const std::vector<int>& densities,
                                const model::ModelConfig& mcfg,
                                const TrainConfig& base) {
    SweepTable table;
    for (model::ModelKind kind : kinds)
        for (int d : densities) {
            TrainConfig cfg = base;
            cfg.train_density = d;
            cfg.eval_densities = {d};
            RunReport rep = fit(ds, kind, mcfg, cfg);
            table.rows.push_back({model::kind_name(kind), d, cfg.train_size,
                                  rep.density_test_error.front().second, cfg.seed});
        }
    return table;
}

}  // namespace gola::train
