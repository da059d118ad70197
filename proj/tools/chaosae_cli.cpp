#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "chaosae/harness.hpp"

namespace h = chaosae::harness;

int main(int argc, char** argv) {
    CLI::App app{"Sparse autoencoder experiments on chaotic time series"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, scale;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON configuration file (comments allowed)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Seed for both integration and training");
    app.add_option("--scale", scale, "Preset: paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    app.add_flag("-q,--quiet", quiet, "Suppress progress output");

    auto* simulate = app.add_subcommand("simulate", "Integrate the configured system and write its trajectory");
    auto* train = app.add_subcommand("train", "Train one autoencoder at the configured window size and alpha");
    auto* sweep = app.add_subcommand("sweep", "Train one model per grid cell");
    std::string sweep_mode = "alpha";
    sweep->add_option("--mode", sweep_mode, "alpha or window")->check(CLI::IsMember({"alpha", "window"}));
    auto* lle = app.add_subcommand("lle", "Estimate largest Lyapunov exponents");
    std::string lle_mode = "input", lle_grid = "alpha";
    lle->add_option("--mode", lle_mode, "input or reconstructed")->check(CLI::IsMember({"input", "reconstructed"}));
    lle->add_option("--grid", lle_grid, "Sweep whose models are used in reconstructed mode")
        ->check(CLI::IsMember({"alpha", "window"}));
    auto* report = app.add_subcommand("report", "Consolidate outputs into report.json and SVG plots");
    auto* show = app.add_subcommand("config", "Print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        h::Overrides ov;
        if (!out_dir.empty()) ov.output_dir = out_dir;
        if (seed) ov.seed = *seed;
        if (!scale.empty()) ov.scale = h::scale_from_string(scale);
        const auto cfg = h::load_config(config_path.empty() ? std::nullopt : std::optional<std::string>(config_path), ov);
        h::validate_config(cfg);
        std::ostream* log = quiet ? nullptr : &std::cerr;

        if (*show) {
            std::cout << h::to_json(cfg).dump(2) << '\n';
        } else if (*simulate) {
            h::simulate(cfg, log);
        } else if (*train) {
            const auto out = h::train_pipeline(cfg, log);
            if (log)
                *log << "final test mse " << out.report.final_test_mse << ", active latent nodes "
                     << out.stats.mean_active_nodes << " (" << out.stats.std_active_nodes << ")\n";
        } else if (*sweep) {
            h::sweep_pipeline(cfg, h::sweep_mode_from_string(sweep_mode), log);
        } else if (*lle) {
            h::lle_pipeline(cfg, h::lle_mode_from_string(lle_mode), h::sweep_mode_from_string(lle_grid), log);
        } else if (*report) {
            h::report_pipeline(cfg, log);
        }
    } catch (const chaosae::Error& e) {
        std::cerr << "error [" << chaosae::to_string(e.kind()) << "]: " << e.what() << '\n';
        return h::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
