#pragma once

// JSON experiment configs for the command-line tool. A config file carries up
// to four sections (data, model, train, sweep); every section is optional and
// missing keys keep their defaults, but unknown keys are rejected by name so
// typos fail loudly instead of silently running defaults.

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gola/model.hpp"
#include "gola/train.hpp"

namespace gola::cli {

struct DataSection {
    std::string pde = "darcy";
    int grid = 64;
    int count = 40;
    uint64_t seed = 0;
    double tau = 3.0;
    double alpha = 2.0;
    std::string path;  // dataset file consumed by the train/sweep commands
};

struct SweepSection {
    std::vector<int> densities = {50, 200, 800};
    std::vector<std::string> models = {"gola", "gkn"};
    std::string out_dir = ".";
};

struct CliConfig {
    DataSection data;
    model::ModelConfig model;
    train::TrainConfig train;
    SweepSection sweep;
    nlohmann::json echo;  // the parsed document, copied verbatim into reports
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<const char*> known) {
    if (!obj.is_object())
        throw std::invalid_argument("config: " + where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        bool recognized = false;
        for (const char* k : known)
            if (item.key() == k) {
                recognized = true;
                break;
            }
        if (!recognized)
            throw std::invalid_argument("config: unknown key '" + item.key() + "' in " + where);
    }
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline CliConfig parse_config(const nlohmann::json& doc) {
    detail::reject_unknown(doc, "the top level", {"data", "model", "train", "sweep"});
    CliConfig cfg;
    cfg.echo = doc;
    try {
        if (doc.contains("data")) {
            const auto& d = doc.at("data");
            detail::reject_unknown(d, "the data section",
                                   {"pde", "grid", "count", "seed", "tau", "alpha", "path"});
            detail::take(d, "pde", cfg.data.pde);
            detail::take(d, "grid", cfg.data.grid);
            detail::take(d, "count", cfg.data.count);
            detail::take(d, "seed", cfg.data.seed);
            detail::take(d, "tau", cfg.data.tau);
            detail::take(d, "alpha", cfg.data.alpha);
            detail::take(d, "path", cfg.data.path);
        }
        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            detail::reject_unknown(
                m, "the model section",
                {"c_in", "c_target", "modes", "channels", "heads", "head_dim", "msgpass_blocks",
                 "residual_depth", "gat_layers", "freq_jitter", "final_proj", "baseline_channels",
                 "baseline_layers", "kernel_hidden", "baseline_activation"});
            detail::take(m, "c_in", cfg.model.c_in);
            detail::take(m, "c_target", cfg.model.c_target);
            detail::take(m, "modes", cfg.model.modes);
            detail::take(m, "channels", cfg.model.channels);
            detail::take(m, "heads", cfg.model.heads);
            detail::take(m, "head_dim", cfg.model.head_dim);
            detail::take(m, "msgpass_blocks", cfg.model.msgpass_blocks);
            detail::take(m, "residual_depth", cfg.model.residual_depth);
            detail::take(m, "gat_layers", cfg.model.gat_layers);
            detail::take(m, "freq_jitter", cfg.model.freq_jitter);
            detail::take(m, "final_proj", cfg.model.final_proj);
            detail::take(m, "baseline_channels", cfg.model.baseline_channels);
            detail::take(m, "baseline_layers", cfg.model.baseline_layers);
            detail::take(m, "kernel_hidden", cfg.model.kernel_hidden);
            detail::take(m, "baseline_activation", cfg.model.baseline_activation);
        }
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            detail::reject_unknown(t, "the train section",
                                   {"epochs", "batch_size", "lr", "lr_decay_factor",
                                    "lr_decay_interval", "beta1", "beta2", "eps_adam", "seed",
                                    "train_size", "train_density", "test_size", "eval_densities",
                                    "radius"});
            detail::take(t, "epochs", cfg.train.epochs);
            detail::take(t, "batch_size", cfg.train.batch_size);
            detail::take(t, "lr", cfg.train.lr);
            detail::take(t, "lr_decay_factor", cfg.train.lr_decay_factor);
            detail::take(t, "lr_decay_interval", cfg.train.lr_decay_interval);
            detail::take(t, "beta1", cfg.train.beta1);
            detail::take(t, "beta2", cfg.train.beta2);
            detail::take(t, "eps_adam", cfg.train.eps_adam);
            detail::take(t, "seed", cfg.train.seed);
            detail::take(t, "train_size", cfg.train.train_size);
            detail::take(t, "train_density", cfg.train.train_density);
            detail::take(t, "test_size", cfg.train.test_size);
            detail::take(t, "eval_densities", cfg.train.eval_densities);
            detail::take(t, "radius", cfg.train.radius);
        }
        if (doc.contains("sweep")) {
            const auto& s = doc.at("sweep");
            detail::reject_unknown(s, "the sweep section", {"densities", "models", "out_dir"});
            detail::take(s, "densities", cfg.sweep.densities);
            detail::take(s, "models", cfg.sweep.models);
            detail::take(s, "out_dir", cfg.sweep.out_dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    for (const std::string& name : cfg.sweep.models) model::kind_from_name(name);
    return cfg;
}

inline CliConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace gola::cli
