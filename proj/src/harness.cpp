#include "mrisim/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "mrisim/metrics.hpp"
#include "mrisim/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mrisim {

namespace {

json default_config_json() {
    return json{
        {"out_dir", "runs/default"},
        {"seed", 1},
        {"accel_grid", {4.0, 8.0, 12.0}},
        {"noise_sigma", 0.0},
        {"dataset",
         {{"size", 64}, {"count", 100}, {"seed", 1}, {"min_ellipses", 3}, {"max_ellipses", 8}}},
        {"mask", {{"acceleration", 8.0}, {"center_fraction", 0.04}, {"seed", 3}}},
        {"denoiser",
         {{"enabled", true},
          {"hidden", 16},
          {"depth", 4},
          {"lambda_fid", 1.0},
          {"lr", 1e-3},
          {"batch_size", 4},
          {"epochs", 30},
          {"seed", 11},
          {"acceleration", 8.0},
          {"center_fraction", 0.04}}},
        {"unrolled",
         {{"enabled", true},
          {"hidden", 16},
          {"depth", 3},
          {"n_iters", 8},
          {"step_size", 0.5},
          {"shared_weights", true},
          {"lambda_fid", 1.0},
          {"lr", 1e-3},
          {"batch_size", 2},
          {"epochs", 10},
          {"seed", 13},
          {"acceleration", 8.0},
          {"center_fraction", 0.04}}},
        {"diffusion",
         {{"enabled", true},
          {"hidden", 16},
          {"depth", 4},
          {"sigma_min", 0.01},
          {"sigma_max", 10.0},
          {"n_scales", 1000},
          {"snr_eta", 0.517},
          {"dc_lambda", 1.0},
          {"corrector_steps", 1},
          {"sampler_seed", 77},
          {"noise_matched_measurement", true},
          {"lr", 1e-3},
          {"batch_size", 2},
          {"steps", 3000},
          {"seed", 17}}},
        {"attack",
         {{"epsilon_grid", {0.005, 0.01, 0.02, 0.05, 0.1}},
          {"iters", 200},
          {"lr", 0.0},
          {"init_scale_c", 1e4},
          {"seed", 5}}},
        {"transfer",
         {{"sources", {"denoiser"}},
          {"targets", {"denoiser", "unrolled", "diffusion", "zero_filled"}},
          {"epsilon_grid", {0.01}}}},
    };
}

void collect_unknown_keys(const json& user, const json& defaults, const std::string& prefix,
                          std::vector<std::string>& unknown) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!defaults.contains(it.key())) {
            unknown.push_back(path);
        } else if (it.value().is_object() && defaults.at(it.key()).is_object()) {
            collect_unknown_keys(it.value(), defaults.at(it.key()), path, unknown);
        }
    }
}

void merge_into(json& base, const json& user) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base.at(it.key()).is_object())
            merge_into(base.at(it.key()), it.value());
        else
            base[it.key()] = it.value();
    }
}

void apply_env_overrides(json& node, const std::string& prefix) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        std::string name = prefix + "_" + it.key();
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        if (it.value().is_object()) {
            apply_env_overrides(it.value(), prefix + "_" + it.key());
            continue;
        }
        const char* env = std::getenv(name.c_str());
        if (!env) continue;
        try {
            it.value() = json::parse(env);
        } catch (const json::exception&) {
            it.value() = std::string(env);  // bare strings allowed unquoted
        }
    }
}

TrainConfig parse_train(const json& j) {
    TrainConfig t;
    t.lambda_fid = j.at("lambda_fid");
    t.lr = j.at("lr");
    t.batch_size = j.at("batch_size");
    t.epochs = j.at("epochs");
    t.seed = j.at("seed");
    t.acceleration = j.at("acceleration");
    t.center_fraction = j.at("center_fraction");
    return t;
}

ExperimentConfig config_from_json(json merged) {
    apply_env_overrides(merged, "MRISIM");
    ExperimentConfig cfg;
    cfg.canonical_json = merged.dump();
    cfg.out_dir = merged.at("out_dir");
    cfg.seed = merged.at("seed");
    cfg.accel_grid = merged.at("accel_grid").get<std::vector<double>>();
    cfg.noise_sigma = merged.at("noise_sigma");

    const json& ds = merged.at("dataset");
    cfg.dataset = {ds.at("size"), ds.at("count"), ds.at("seed"), ds.at("min_ellipses"),
                   ds.at("max_ellipses")};
    const json& mk = merged.at("mask");
    cfg.mask = {mk.at("acceleration"), mk.at("center_fraction"), mk.at("seed")};

    const json& dn = merged.at("denoiser");
    cfg.denoiser.enabled = dn.at("enabled");
    cfg.denoiser.hidden = dn.at("hidden");
    cfg.denoiser.depth = dn.at("depth");
    cfg.denoiser.train = parse_train(dn);

    const json& un = merged.at("unrolled");
    cfg.unrolled.enabled = un.at("enabled");
    cfg.unrolled.hidden = un.at("hidden");
    cfg.unrolled.depth = un.at("depth");
    cfg.unrolled.unroll.n_iters = un.at("n_iters");
    cfg.unrolled.unroll.step_size = un.at("step_size");
    cfg.unrolled.unroll.shared_weights = un.at("shared_weights");
    cfg.unrolled.train = parse_train(un);

    const json& df = merged.at("diffusion");
    cfg.diffusion.enabled = df.at("enabled");
    cfg.diffusion.hidden = df.at("hidden");
    cfg.diffusion.depth = df.at("depth");
    cfg.diffusion.schedule.sigma_min = df.at("sigma_min");
    cfg.diffusion.schedule.sigma_max = df.at("sigma_max");
    cfg.diffusion.schedule.n_scales = df.at("n_scales");
    cfg.diffusion.sampler.snr_eta = df.at("snr_eta");
    cfg.diffusion.sampler.dc_lambda = df.at("dc_lambda");
    cfg.diffusion.sampler.corrector_steps = df.at("corrector_steps");
    cfg.diffusion.sampler.seed = df.at("sampler_seed");
    cfg.diffusion.sampler.noise_matched_measurement = df.at("noise_matched_measurement");
    cfg.diffusion.train.lr = df.at("lr");
    cfg.diffusion.train.batch_size = df.at("batch_size");
    cfg.diffusion.train.steps = df.at("steps");
    cfg.diffusion.train.seed = df.at("seed");

    const json& at = merged.at("attack");
    cfg.attack.epsilon_grid = at.at("epsilon_grid").get<std::vector<double>>();
    cfg.attack.iters = at.at("iters");
    cfg.attack.lr = at.at("lr");
    cfg.attack.init_scale_c = at.at("init_scale_c");
    cfg.attack.seed = at.at("seed");

    const json& tr = merged.at("transfer");
    cfg.transfer.sources = tr.at("sources").get<std::vector<std::string>>();
    cfg.transfer.targets = tr.at("targets").get<std::vector<std::string>>();
    cfg.transfer.epsilon_grid = tr.at("epsilon_grid").get<std::vector<double>>();
    return cfg;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Csv {
    std::ofstream out;
    explicit Csv(const fs::path& path, const std::string& header) {
        out.open(path);
        if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
        out << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    }
};

fs::path dataset_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / "dataset"; }
fs::path models_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / "models"; }

Dataset load_dataset_checked(const ExperimentConfig& cfg) {
    const fs::path dir = dataset_dir(cfg);
    if (!fs::exists(dir / "manifest.json"))
        throw DependencyError("dataset missing at " + dir.string() + "; run `phantom` first");
    return load_dataset(dir.string());
}

// Per-item measurement with a deterministic mask draw.
Measurement measure_item(const ExperimentConfig& cfg, const Phantom& item, double acceleration,
                         std::size_t salt) {
    RngStream mask_rng = RngStream(cfg.mask.seed).fork(salt);
    SamplingMask mask = make_cartesian_mask(item.image.rows, item.image.cols, acceleration,
                                            cfg.mask.center_fraction, mask_rng);
    RngStream noise_rng = mask_rng.fork(1);
    return forward(item.image, mask, NoiseModel{cfg.noise_sigma}, noise_rng);
}

struct ModelSet {
    std::map<std::string, std::unique_ptr<Reconstructor>> models;

    const Reconstructor& get(const std::string& name) const {
        auto it = models.find(name);
        if (it == models.end())
            throw DependencyError("model '" + name + "' unavailable; train it first or enable it");
        return *it->second;
    }
    bool has(const std::string& name) const { return models.count(name) != 0; }
};

ModelSet load_models(const ExperimentConfig& cfg, bool require_trained) {
    ModelSet set;
    set.models["zero_filled"] = std::make_unique<ZeroFilledRecon>();
    set.models["cg_least_squares"] = std::make_unique<CgRecon>(0.01, 30);

    const fs::path mdir = models_dir(cfg);
    if (cfg.denoiser.enabled) {
        const fs::path dir = mdir / "denoiser";
        if (fs::exists(dir / "model.json"))
            set.models["denoiser"] = std::make_unique<DenoiserRecon>(load_convnet(dir.string()));
        else if (require_trained)
            throw DependencyError("denoiser checkpoint missing at " + dir.string() +
                                  "; run `train` first");
    }
    if (cfg.unrolled.enabled) {
        const fs::path dir = mdir / "unrolled";
        if (fs::exists(dir / "net_0" / "model.json")) {
            std::vector<ConvNet> nets;
            const std::size_t n = cfg.unrolled.unroll.shared_weights ? 1 : cfg.unrolled.unroll.n_iters;
            for (std::size_t i = 0; i < n; ++i)
                nets.push_back(load_convnet((dir / ("net_" + std::to_string(i))).string()));
            set.models["unrolled"] =
                std::make_unique<UnrolledRecon>(std::move(nets), cfg.unrolled.unroll);
        } else if (require_trained) {
            throw DependencyError("unrolled checkpoint missing at " + dir.string() +
                                  "; run `train` first");
        }
    }
    if (cfg.diffusion.enabled) {
        const fs::path dir = mdir / "score";
        if (fs::exists(dir / "model.json")) {
            ScoreFn score = ScoreFn::learned(load_convnet(dir.string()), cfg.diffusion.schedule);
            set.models["diffusion"] = std::make_unique<DiffusionRecon>(
                std::move(score), cfg.diffusion.schedule, cfg.diffusion.sampler);
        } else if (require_trained) {
            throw DependencyError("score checkpoint missing at " + dir.string() +
                                  "; run `train` first");
        }
    }
    return set;
}

void write_train_csv(const ExperimentConfig& cfg, const std::string& model,
                     const std::vector<double>& losses) {
    fs::create_directories(cfg.out_dir);
    Csv csv(fs::path(cfg.out_dir) / ("train_" + model + ".csv"), "config_hash,model,epoch,loss");
    const std::string hash = config_hash_hex(cfg);
    for (std::size_t e = 0; e < losses.size(); ++e)
        csv.row({hash, model, std::to_string(e), fmt(losses[e])});
}

std::vector<TransferItem> test_items(const ExperimentConfig& cfg, const Dataset& ds,
                                     double acceleration) {
    if (ds.test.empty()) throw ConfigError("empty test split");
    std::vector<TransferItem> items;
    for (std::size_t i = 0; i < ds.test.size(); ++i)
        items.push_back({ds.test[i].image, measure_item(cfg, ds.test[i], acceleration, i)});
    return items;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    json defaults = default_config_json();
    std::vector<std::string> unknown;
    collect_unknown_keys(user, defaults, "", unknown);
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    merge_into(defaults, user);
    return config_from_json(std::move(defaults));
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    // FNV-1a 64 over the canonical JSON dump.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.canonical_json) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ConfigError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void cmd_phantom(const ExperimentConfig& cfg) {
    DatasetConfig dcfg;
    dcfg.size = cfg.dataset.size;
    dcfg.count = cfg.dataset.count;
    dcfg.seed = cfg.dataset.seed;
    dcfg.min_ellipses = cfg.dataset.min_ellipses;
    dcfg.max_ellipses = cfg.dataset.max_ellipses;
    Dataset ds = build_dataset(dcfg);
    save_dataset(dataset_dir(cfg).string(), ds);
}

void cmd_train(const ExperimentConfig& cfg, const std::string& only_model) {
    Dataset ds = load_dataset_checked(cfg);
    const fs::path mdir = models_dir(cfg);
    auto wants = [&](const std::string& name) { return only_model.empty() || only_model == name; };

    if (cfg.denoiser.enabled && wants("denoiser")) {
        ConvNet net;
        net.cin = 1;
        net.cout = 1;
        net.hidden = cfg.denoiser.hidden;
        net.depth = cfg.denoiser.depth;
        net.init(cfg.denoiser.train.seed);
        DenoiserRecon recon(std::move(net));
        TrainReport report = train_supervised(recon, ds.train, cfg.denoiser.train);
        save_convnet((mdir / "denoiser").string(), recon.net());
        write_train_csv(cfg, "denoiser", report.epoch_losses);
    }
    if (cfg.unrolled.enabled && wants("unrolled")) {
        const std::size_t n_nets =
            cfg.unrolled.unroll.shared_weights ? 1 : cfg.unrolled.unroll.n_iters;
        std::vector<ConvNet> nets;
        for (std::size_t i = 0; i < n_nets; ++i) {
            ConvNet net;
            net.cin = 1;
            net.cout = 1;
            net.hidden = cfg.unrolled.hidden;
            net.depth = cfg.unrolled.depth;
            net.init(cfg.unrolled.train.seed + i);
            nets.push_back(std::move(net));
        }
        UnrolledRecon recon(std::move(nets), cfg.unrolled.unroll);
        TrainReport report = train_supervised(recon, ds.train, cfg.unrolled.train);
        for (std::size_t i = 0; i < recon.nets().size(); ++i)
            save_convnet((mdir / "unrolled" / ("net_" + std::to_string(i))).string(),
                         recon.nets()[i]);
        write_train_csv(cfg, "unrolled", report.epoch_losses);
    }
    if (cfg.diffusion.enabled && wants("score")) {
        ConvNet net;
        net.cin = 2;
        net.cout = 1;
        net.hidden = cfg.diffusion.hidden;
        net.depth = cfg.diffusion.depth;
        net.init(cfg.diffusion.train.seed);
        TrainReport report = train_score(net, ds.train, cfg.diffusion.schedule, cfg.diffusion.train);
        save_convnet((mdir / "score").string(), net);
        write_train_csv(cfg, "score", report.epoch_losses);
    }
}

void cmd_reconstruct(const ExperimentConfig& cfg) {
    Dataset ds = load_dataset_checked(cfg);
    if (ds.test.empty()) throw ConfigError("empty test split; nothing to reconstruct");
    ModelSet models = load_models(cfg, true);

    fs::create_directories(cfg.out_dir);
    Csv csv(fs::path(cfg.out_dir) / "recon.csv",
            "config_hash,model,acceleration,item,ssim,psnr,mask_seed");
    const std::string hash = config_hash_hex(cfg);
    for (const auto& [name, model] : models.models) {
        for (std::size_t ai = 0; ai < cfg.accel_grid.size(); ++ai) {
            for (std::size_t i = 0; i < ds.test.size(); ++i) {
                const Phantom& item = ds.test[i];
                const std::size_t salt = ai * 1000000 + i;
                Measurement meas = measure_item(cfg, item, cfg.accel_grid[ai], salt);
                RealTensor2 recon = model->reconstruct(meas);
                const double range = data_range_of(item.image);
                csv.row({hash, name, fmt(cfg.accel_grid[ai]), std::to_string(i),
                         fmt(ssim(item.image, recon, range)), fmt(psnr(item.image, recon, range)),
                         std::to_string(cfg.mask.seed)});
            }
        }
    }
}

namespace {

void run_attack_matrix(const ExperimentConfig& cfg, const std::vector<std::string>& sources,
                       const std::vector<std::string>& target_names,
                       const std::vector<double>& eps_grid, const std::string& csv_name) {
    Dataset ds = load_dataset_checked(cfg);
    ModelSet models = load_models(cfg, true);
    std::vector<TransferItem> items = test_items(cfg, ds, cfg.mask.acceleration);

    fs::create_directories(cfg.out_dir);
    Csv csv(fs::path(cfg.out_dir) / csv_name,
            "config_hash,source,target,epsilon,item,ssim_clean,ssim_adv,ssim_rand,psnr_clean,"
            "psnr_adv,psnr_rand,delta_rel_norm,seed");
    const std::string hash = config_hash_hex(cfg);
    for (const std::string& src : sources) {
        const Reconstructor& source = models.get(src);
        if (!source.differentiable())
            throw ConfigError("attack source '" + src + "' is not differentiable");
        std::vector<const Reconstructor*> targets;
        for (const std::string& t : target_names) targets.push_back(&models.get(t));
        for (double eps : eps_grid) {
            AttackConfig acfg;
            acfg.epsilon = eps;
            acfg.iters = cfg.attack.iters;
            acfg.lr = cfg.attack.lr;
            acfg.init_scale_c = cfg.attack.init_scale_c;
            acfg.seed = cfg.attack.seed;
            TransferReport report = transfer_evaluate(source, targets, items, acfg);
            for (const TransferRow& r : report.rows)
                csv.row({hash, r.source, r.target, fmt(r.epsilon), std::to_string(r.item),
                         fmt(r.ssim_clean), fmt(r.ssim_adv), fmt(r.ssim_rand), fmt(r.psnr_clean),
                         fmt(r.psnr_adv), fmt(r.psnr_rand), fmt(r.delta_rel_norm),
                         std::to_string(r.seed)});
        }
    }
}

}  // namespace

void cmd_attack(const ExperimentConfig& cfg) {
    // White-box sweep: each differentiable trained model attacks itself.
    ModelSet models = load_models(cfg, true);
    std::vector<std::string> sources;
    for (const auto& [name, model] : models.models)
        if (model->differentiable()) sources.push_back(name);
    if (sources.empty()) throw DependencyError("no differentiable trained models to attack");
    for (const std::string& src : sources)
        run_attack_matrix(cfg, {src}, {src}, cfg.attack.epsilon_grid, "attack_" + src + ".csv");
}

void cmd_transfer(const ExperimentConfig& cfg) {
    run_attack_matrix(cfg, cfg.transfer.sources, cfg.transfer.targets, cfg.transfer.epsilon_grid,
                      "transfer.csv");
}

namespace {

struct SeriesKey {
    std::string label;
    double epsilon;
};

// Reads one of the attack/transfer CSVs emitted above.
struct AttackCsvRow {
    std::string source, target;
    double epsilon, ssim_clean, ssim_adv, psnr_clean, psnr_adv;
};

std::vector<AttackCsvRow> read_attack_csv(const fs::path& path) {
    std::ifstream in(path);
    std::vector<AttackCsvRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 13) continue;
        AttackCsvRow r;
        r.source = cells[1];
        r.target = cells[2];
        r.epsilon = std::stod(cells[3]);
        r.ssim_clean = std::stod(cells[5]);
        r.ssim_adv = std::stod(cells[6]);
        r.psnr_clean = std::stod(cells[8]);
        r.psnr_adv = std::stod(cells[9]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

void cmd_report(const ExperimentConfig& cfg) {
    std::vector<AttackCsvRow> rows;
    for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "transfer.csv" || (name.rfind("attack_", 0) == 0 && name.size() > 4 &&
                                       name.substr(name.size() - 4) == ".csv")) {
            auto file_rows = read_attack_csv(entry.path());
            rows.insert(rows.end(), file_rows.begin(), file_rows.end());
        }
    }
    if (rows.empty())
        throw ConfigError("report: no attack/transfer CSV rows found in " + cfg.out_dir);

    // Group by (source->target, epsilon).
    std::map<std::string, std::map<double, std::pair<std::vector<double>, std::vector<double>>>>
        grouped;
    for (const AttackCsvRow& r : rows) {
        auto& bucket = grouped[r.source + "->" + r.target][r.epsilon];
        bucket.first.push_back(r.ssim_clean - r.ssim_adv);
        bucket.second.push_back(r.psnr_clean - r.psnr_adv);
    }

    Csv summary(fs::path(cfg.out_dir) / "summary.csv",
                "config_hash,series,epsilon,median_delta_ssim,median_delta_psnr,n_items");
    const std::string hash = config_hash_hex(cfg);
    std::vector<PlotSeries> ssim_series, psnr_series;
    for (const auto& [label, by_eps] : grouped) {
        PlotSeries ps{label, {}}, pp{label, {}};
        for (const auto& [eps, buckets] : by_eps) {
            const double mds = median(buckets.first);
            const double mdp = median(buckets.second);
            summary.row({hash, label, fmt(eps), fmt(mds), fmt(mdp),
                         std::to_string(buckets.first.size())});
            ps.points.push_back({eps, mds});
            pp.points.push_back({eps, mdp});
        }
        ssim_series.push_back(std::move(ps));
        psnr_series.push_back(std::move(pp));
    }
    write_svg_plot((fs::path(cfg.out_dir) / "report_delta_ssim.svg").string(),
                   "median delta-SSIM vs epsilon", "epsilon", "delta SSIM", ssim_series);
    write_svg_plot((fs::path(cfg.out_dir) / "report_delta_psnr.svg").string(),
                   "median delta-pSNR vs epsilon", "epsilon", "delta pSNR (dB)", psnr_series);
}

RunRecord end_to_end_pipeline(const ExperimentConfig& cfg) {
    RunRecord record;
    record.config_hash = config_hash_hex(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "config.json");
        out << cfg.canonical_json << "\n";
    }

    const std::vector<std::pair<std::string, std::function<void()>>> stages = {
        {"phantom", [&] { cmd_phantom(cfg); }},
        {"train", [&] { cmd_train(cfg); }},
        {"reconstruct", [&] { cmd_reconstruct(cfg); }},
        {"attack", [&] { cmd_attack(cfg); }},
        {"transfer", [&] { cmd_transfer(cfg); }},
        {"report", [&] { cmd_report(cfg); }},
    };
    for (const auto& [name, fn] : stages) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            throw DivergenceError("pipeline stage '" + name + "' failed: " + e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        record.stage_seconds[name] = std::chrono::duration<double>(t1 - t0).count();
    }

    // Timings live outside the reproducibility-compared CSV set.
    json timings;
    for (const auto& [name, secs] : record.stage_seconds) timings[name] = secs;
    std::ofstream tout(fs::path(cfg.out_dir) / "timings.json");
    tout << timings.dump(2) << "\n";

    for (const auto& entry : fs::directory_iterator(cfg.out_dir))
        if (entry.path().extension() == ".csv" || entry.path().extension() == ".svg")
            record.artifacts.push_back(entry.path().string());
    std::sort(record.artifacts.begin(), record.artifacts.end());
    return record;
}

void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw ConfigError("write_svg_plot: no series");
    const double width = 640, height = 480;
    const double ml = 70, mr = 160, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << xml_escape(title)
        << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
    out << "<text x=\"18\" y=\"" << (mt + height - mb) / 2 << "\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 18 " << (mt + height - mb) / 2 << ")\">" << xml_escape(ylabel)
        << "</text>\n";
    for (double frac : {0.0, 0.5, 1.0}) {
        const double xv = xmin + frac * (xmax - xmin);
        const double yv = ymin + frac * (ymax - ymin);
        out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kColors[i % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[i].points) out << px(x) << "," << py(y) << " ";
        out << "\"/>\n";
        const double ly = mt + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << ly << "\" x2=\""
            << width - mr + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << width - mr + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << xml_escape(series[i].label) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace mrisim
