#include "mrisim/phantom.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mrisim/fft.hpp"
#include "mrisim/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mrisim {

namespace {

struct Ellipse {
    double intensity;
    double a, b;        // semi-axes in [-1, 1] coordinates
    double x0, y0;      // center
    double phi_deg;     // rotation
};

// Modified (high-contrast) Shepp-Logan parameter table.
const Ellipse kSheppLogan[10] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
};

void add_ellipse(RealTensor2& img, const Ellipse& e) {
    const double phi = e.phi_deg * M_PI / 180.0;
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double n = static_cast<double>(img.rows);
    for (std::size_t r = 0; r < img.rows; ++r) {
        // y runs top-down in the raster but bottom-up in phantom coordinates.
        const double y = 1.0 - 2.0 * (static_cast<double>(r) + 0.5) / n;
        for (std::size_t c = 0; c < img.cols; ++c) {
            const double x = 2.0 * (static_cast<double>(c) + 0.5) / n - 1.0;
            const double xr = (x - e.x0) * cphi + (y - e.y0) * sphi;
            const double yr = -(x - e.x0) * sphi + (y - e.y0) * cphi;
            if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0)
                img.at(r, c) += e.intensity;
        }
    }
}

void clamp01(RealTensor2& img) {
    for (double& v : img.data) v = std::min(1.0, std::max(0.0, v));
}

}  // namespace

Phantom shepp_logan(std::size_t size) {
    if (!is_power_of_two(size)) throw SizingError("shepp_logan: size must be a power of two");
    Phantom p;
    p.kind = "shepp_logan";
    p.seed = 0;
    p.image = RealTensor2(size, size);
    for (const Ellipse& e : kSheppLogan) add_ellipse(p.image, e);
    clamp01(p.image);
    return p;
}

Phantom random_ellipses(std::size_t size, std::size_t min_count, std::size_t max_count,
                        RngStream& rng) {
    if (!is_power_of_two(size)) throw SizingError("random_ellipses: size must be a power of two");
    if (max_count < min_count) throw ConfigError("random_ellipses: bad count range");
    Phantom p;
    p.kind = "random_ellipses";
    p.seed = rng.seed();
    p.image = RealTensor2(size, size);

    // Skull-like ring: bright outer ellipse, dimmer interior.
    add_ellipse(p.image, {0.9, 0.88, 0.92, 0.0, 0.0, 0.0});
    add_ellipse(p.image, {-0.7, 0.80, 0.84, 0.0, 0.0, 0.0});

    const std::size_t count =
        min_count + static_cast<std::size_t>(rng.uniform_index(max_count - min_count + 1));
    for (std::size_t i = 0; i < count; ++i) {
        Ellipse e;
        e.intensity = 0.1 + 0.5 * rng.uniform();
        if (rng.uniform() < 0.3) e.intensity = -e.intensity;
        e.a = 0.05 + 0.30 * rng.uniform();
        e.b = 0.05 + 0.30 * rng.uniform();
        e.x0 = -0.5 + rng.uniform();
        e.y0 = -0.5 + rng.uniform();
        e.phi_deg = 180.0 * rng.uniform();
        add_ellipse(p.image, e);
    }
    clamp01(p.image);
    return p;
}

Dataset build_dataset(const DatasetConfig& cfg) {
    Dataset ds;
    const std::size_t n_train = cfg.count * 8 / 10;
    const std::size_t n_test = cfg.count - n_train;
    // Train and test seed ranges are disjoint by construction.
    for (std::size_t i = 0; i < n_train; ++i) {
        RngStream rng(cfg.seed + i);
        ds.train.push_back(random_ellipses(cfg.size, cfg.min_ellipses, cfg.max_ellipses, rng));
    }
    for (std::size_t i = 0; i < n_test; ++i) {
        RngStream rng(cfg.seed + 1000000 + i);
        ds.test.push_back(random_ellipses(cfg.size, cfg.min_ellipses, cfg.max_ellipses, rng));
    }
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    fs::create_directories(dir);
    json manifest;
    manifest["items"] = json::array();
    std::size_t index = 0;
    auto dump_split = [&](const std::vector<Phantom>& items, const char* split) {
        for (const Phantom& p : items) {
            const std::string file = std::to_string(index) + ".tnsr";
            save_tensor((fs::path(dir) / file).string(), p.image);
            manifest["items"].push_back({{"index", index},
                                         {"file", file},
                                         {"kind", p.kind},
                                         {"seed", p.seed},
                                         {"size", p.image.rows},
                                         {"split", split}});
            ++index;
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.test, "test");
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw TensorIoError(dir + ": failed writing manifest.json");
}

Dataset load_dataset(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw TensorIoError(manifest_path.string() + ": cannot open manifest");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw TensorIoError(manifest_path.string() + ": bad manifest: " + e.what());
    }
    Dataset ds;
    for (const auto& item : manifest.at("items")) {
        const std::string file = item.at("file");
        const fs::path path = fs::path(dir) / file;
        if (!fs::exists(path))
            throw TensorIoError(dir + ": manifest lists missing file " + file);
        Phantom p;
        p.image = load_real_tensor(path.string());
        p.kind = item.at("kind");
        p.seed = item.at("seed");
        const std::string split = item.at("split");
        (split == "train" ? ds.train : ds.test).push_back(std::move(p));
    }
    return ds;
}

}  // namespace mrisim
