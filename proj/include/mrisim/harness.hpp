#pragma once

#include <map>
#include <string>
#include <vector>

#include "mrisim/attack.hpp"
#include "mrisim/diffusion.hpp"

namespace mrisim {

struct DatasetSpec {
    std::size_t size = 64;
    std::size_t count = 100;
    std::uint64_t seed = 1;
    std::size_t min_ellipses = 3;
    std::size_t max_ellipses = 8;
};

struct MaskSpec {
    double acceleration = 8.0;
    double center_fraction = 0.04;
    std::uint64_t seed = 3;
};

struct DenoiserSpec {
    bool enabled = true;
    std::size_t hidden = 16;
    std::size_t depth = 4;
    TrainConfig train;
};

struct UnrolledSpec {
    bool enabled = true;
    std::size_t hidden = 16;
    std::size_t depth = 3;
    UnrolledConfig unroll;
    TrainConfig train;
};

struct DiffusionSpec {
    bool enabled = true;
    std::size_t hidden = 16;
    std::size_t depth = 4;
    NoiseSchedule schedule;
    SamplerConfig sampler;
    ScoreTrainConfig train;
};

struct AttackSpec {
    std::vector<double> epsilon_grid = {0.005, 0.01, 0.02, 0.05, 0.1};
    std::size_t iters = 200;
    double lr = 0.0;
    double init_scale_c = 1e4;
    std::uint64_t seed = 5;
};

struct TransferSpec {
    std::vector<std::string> sources = {"denoiser"};
    std::vector<std::string> targets = {"denoiser", "unrolled", "diffusion", "zero_filled"};
    std::vector<double> epsilon_grid = {0.01};
};

struct ExperimentConfig {
    std::string out_dir = "runs/default";
    std::uint64_t seed = 1;
    std::vector<double> accel_grid = {4.0, 8.0, 12.0};
    double noise_sigma = 0.0;
    DatasetSpec dataset;
    MaskSpec mask;
    DenoiserSpec denoiser;
    UnrolledSpec unrolled;
    DiffusionSpec diffusion;
    AttackSpec attack;
    TransferSpec transfer;
    std::string canonical_json;  // for hashing/provenance
};

// Parses and validates a JSON config file. Unknown keys are an error
// listing the offending names. MRISIM_-prefixed environment variables
// (path joined with '_', upper-cased) override individual keys.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct RunRecord {
    std::string config_hash;
    std::vector<std::string> artifacts;
    std::map<std::string, double> stage_seconds;
};

// Subcommand entry points; each throws ConfigError / DependencyError /
// DivergenceError on failure.
void cmd_phantom(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg, const std::string& only_model = "");
void cmd_reconstruct(const ExperimentConfig& cfg);
void cmd_attack(const ExperimentConfig& cfg);
void cmd_transfer(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

RunRecord end_to_end_pipeline(const ExperimentConfig& cfg);

// Minimal SVG line plot: one polyline per series, fixed canvas, legend.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series);

double median(std::vector<double> values);

}  // namespace mrisim
