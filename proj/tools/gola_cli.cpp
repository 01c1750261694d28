// Command-line front end: dataset generation, training runs, and density
// sweeps with CSV/JSON/SVG outputs. Exit codes: 0 success, 2 usage or config
// error, 3 runtime or solver failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gola/cliconfig.hpp"
#include "gola/dataset.hpp"
#include "gola/model.hpp"
#include "gola/solvers.hpp"
#include "gola/svgplot.hpp"
#include "gola/train.hpp"

namespace {

using gola::train::detail::fmt9;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

gola::io::Dataset open_dataset(const gola::cli::CliConfig& cfg) {
    if (cfg.data.path.empty())
        throw std::invalid_argument("config: data.path must name the dataset file");
    if (!std::filesystem::exists(cfg.data.path))
        throw std::invalid_argument("dataset not found: " + cfg.data.path);
    return gola::io::load_dataset(cfg.data.path);
}

int run_generate(const std::string& pde, int n, int grid, uint64_t seed, double tau, double alpha,
                 const std::string& out) {
    gola::pde::GrfSpec spec;
    spec.grid_res = grid;
    spec.tau = tau;
    spec.alpha = alpha;
    spec.seed = seed;
    const gola::io::Dataset ds = gola::io::make_dataset(pde, spec, n);
    gola::io::save_dataset(out, ds);
    std::cout << "wrote " << out << ": pde=" << ds.pde_tag << " grid=" << ds.grid_res
              << " count=" << ds.count() << " seed=" << ds.seed
              << " target_std=" << fmt9(ds.target_std) << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& model_name,
              const std::string& out) {
    const gola::cli::CliConfig cfg = gola::cli::load_config(config_path);
    const gola::io::Dataset ds = open_dataset(cfg);
    const gola::model::ModelKind kind = gola::model::kind_from_name(model_name);

    gola::train::FitOutcome outcome = gola::train::fit_model(ds, kind, cfg.model, cfg.train);
    outcome.report.config_echo = cfg.echo;

    write_text(out + ".json", outcome.report.to_json().dump(2) + "\n");
    write_text(out + ".csv", outcome.report.to_csv());
    gola::io::save_checkpoint(out + ".ckpt", *outcome.model.params,
                              {{"model_kind", model_name}, {"seed", cfg.train.seed}});

    std::cout << model_name << ": params=" << outcome.report.param_count
              << " final_train_error=" << fmt9(outcome.report.final_train_error) << "\n";
    for (const auto& [density, error] : outcome.report.density_test_error)
        std::cout << "  density " << density << ": test_rel_l2=" << fmt9(error) << "\n";
    std::cout << "wrote " << out << ".json " << out << ".csv " << out << ".ckpt\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::vector<int>& density_override,
              const std::vector<std::string>& model_override, const std::string& out_dir) {
    gola::cli::CliConfig cfg = gola::cli::load_config(config_path);
    if (!density_override.empty()) cfg.sweep.densities = density_override;
    if (!model_override.empty()) cfg.sweep.models = model_override;
    if (cfg.sweep.densities.empty())
        throw std::invalid_argument("config: sweep needs at least one density");
    if (cfg.sweep.models.empty())
        throw std::invalid_argument("config: sweep needs at least one model");

    std::vector<gola::model::ModelKind> kinds;
    for (const std::string& name : cfg.sweep.models)
        kinds.push_back(gola::model::kind_from_name(name));

    const gola::io::Dataset ds = open_dataset(cfg);
    const gola::train::SweepTable table =
        gola::train::density_sweep(ds, kinds, cfg.sweep.densities, cfg.model, cfg.train);

    std::vector<gola::plot::Series> series;
    for (const std::string& name : cfg.sweep.models) {
        gola::plot::Series s;
        s.label = name;
        for (const auto& row : table.rows)
            if (row.kind == name) s.points.emplace_back(row.density, row.test_rel_l2);
        series.push_back(std::move(s));
    }

    std::filesystem::create_directories(out_dir);
    const std::string csv_path = (std::filesystem::path(out_dir) / "sweep.csv").string();
    const std::string svg_path = (std::filesystem::path(out_dir) / "sweep.svg").string();
    write_text(csv_path, table.to_csv());
    write_text(svg_path,
               gola::plot::line_plot_svg(series, "sample density", "test relative L2"));

    for (const auto& row : table.rows)
        std::cout << row.kind << " density " << row.density
                  << ": test_rel_l2=" << fmt9(row.test_rel_l2) << "\n";
    std::cout << "wrote " << csv_path << " " << svg_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph operator learning: data generation, training, density sweeps"};
    app.require_subcommand(1);

    std::string gen_pde;
    int gen_n = 40;
    int gen_grid = 64;
    uint64_t gen_seed = 0;
    double gen_tau = 3.0;
    double gen_alpha = 2.0;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("generate", "Generate a PDE benchmark dataset file");
    gen->add_option("--pde", gen_pde, "PDE family")
        ->required()
        ->check(CLI::IsMember(gola::pde::pde_tags()));
    gen->add_option("--n", gen_n, "Number of input/solution pairs")->check(CLI::PositiveNumber);
    gen->add_option("--grid", gen_grid, "Grid resolution per side")->check(CLI::Range(4, 4096));
    gen->add_option("--seed", gen_seed, "Generation seed");
    gen->add_option("--tau", gen_tau, "Random-field inverse length scale")
        ->check(CLI::PositiveNumber);
    gen->add_option("--alpha", gen_alpha, "Random-field spectral decay exponent");
    gen->add_option("--out", gen_out, "Output dataset path")->required();

    std::string train_config;
    std::string train_model = "gola";
    std::string train_out;
    CLI::App* train = app.add_subcommand("train", "Train one model and write report files");
    train->add_option("--config", train_config, "JSON config path")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--model", train_model, "Model kind")
        ->check(CLI::IsMember({"gola", "gkn", "gcn"}));
    train->add_option("--out", train_out, "Report path prefix (.json/.csv/.ckpt added)")
        ->required();

    std::string sweep_config;
    std::vector<int> sweep_densities;
    std::vector<std::string> sweep_models;
    std::string sweep_out;
    CLI::App* sweep = app.add_subcommand("sweep", "Run a density sweep and plot the errors");
    sweep->add_option("--config", sweep_config, "JSON config path")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--densities", sweep_densities, "Densities overriding the config")
        ->delimiter(',');
    sweep->add_option("--models", sweep_models, "Model kinds overriding the config")
        ->delimiter(',');
    sweep->add_option("--out", sweep_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(gen))
            return run_generate(gen_pde, gen_n, gen_grid, gen_seed, gen_tau, gen_alpha, gen_out);
        if (app.got_subcommand(train)) return run_train(train_config, train_model, train_out);
        if (app.got_subcommand(sweep))
            return run_sweep(sweep_config, sweep_densities, sweep_models, sweep_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
