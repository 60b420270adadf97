#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mrisim/harness.hpp"

using namespace mrisim;

namespace {

ExperimentConfig resolve_config(const std::string& config_path, const std::string& out_dir,
                                long long seed) {
    ExperimentConfig cfg =
        config_path.empty() ? config_from_json_text("{}") : load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Undersampled Cartesian MRI reconstruction and k-space perturbation testbed"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    std::string train_model;
    app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    app.add_option("--out", out_dir, "output directory (overrides the config's out_dir)");
    app.add_option("--seed", seed, "global seed override");

    CLI::App* c_phantom = app.add_subcommand("phantom", "generate and save the phantom dataset");
    CLI::App* c_train = app.add_subcommand("train", "train the enabled reconstruction models");
    c_train->add_option("--model", train_model, "train only one of: denoiser, unrolled, score");
    CLI::App* c_recon =
        app.add_subcommand("reconstruct", "reconstruct the test split across the acceleration grid");
    CLI::App* c_attack =
        app.add_subcommand("attack", "white-box worst-case k-space perturbation sweep");
    CLI::App* c_transfer =
        app.add_subcommand("transfer", "transfer crafted perturbations to other reconstructors");
    CLI::App* c_report = app.add_subcommand("report", "aggregate CSVs into summary + SVG plots");
    CLI::App* c_pipeline = app.add_subcommand("pipeline", "run every stage end to end");

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = resolve_config(config_path, out_dir, seed);
        if (c_phantom->parsed()) cmd_phantom(cfg);
        if (c_train->parsed()) cmd_train(cfg, train_model);
        if (c_recon->parsed()) cmd_reconstruct(cfg);
        if (c_attack->parsed()) cmd_attack(cfg);
        if (c_transfer->parsed()) cmd_transfer(cfg);
        if (c_report->parsed()) cmd_report(cfg);
        if (c_pipeline->parsed()) {
            RunRecord record = end_to_end_pipeline(cfg);
            std::printf("config %s\n", record.config_hash.c_str());
            for (const auto& [stage, secs] : record.stage_seconds)
                std::printf("  %-12s %8.2fs\n", stage.c_str(), secs);
            for (const std::string& a : record.artifacts) std::printf("  %s\n", a.c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DependencyError& e) {
        std::fprintf(stderr, "dependency error: %s\n", e.what());
        return 3;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
