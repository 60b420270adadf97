#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mrisim/phantom.hpp"

using namespace mrisim;
namespace fs = std::filesystem;

TEST_CASE("head phantom spot values match hand-computed ellipse sums") {
    // Oracles derived by hand from the standard high-contrast ellipse
    // table with pixel-center sampling on a 64x64 grid:
    //  - (32,32) maps to (0.015625, -0.015625): inside only the outer
    //    shell (+1.0) and the inner shell (-0.8)  -> 0.2
    //  - (31,38) maps to (0.203125, 0.015625): additionally inside the
    //    right ventricle (-0.2)                   -> 0.0
    //  - (28,31) maps to (-0.015625, 0.109375): inside both the top
    //    ellipse (+0.1) and the small center blob (+0.1) -> 0.4
    Phantom p = shepp_logan(64);
    CHECK(p.image.at(32, 32) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(p.image.at(31, 38) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.image.at(28, 31) == doctest::Approx(0.4).epsilon(1e-12));
    // A corner pixel lies outside every ellipse.
    CHECK(p.image.at(0, 0) == 0.0);
}

TEST_CASE("phantom intensities stay in [0, 1]") {
    Phantom p = shepp_logan(64);
    for (double v : p.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    RngStream rng(4);
    Phantom q = random_ellipses(64, 3, 8, rng);
    for (double v : q.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("random_ellipses is deterministic in the seed") {
    RngStream a(12), b(12), c(13);
    Phantom pa = random_ellipses(32, 3, 8, a);
    Phantom pb = random_ellipses(32, 3, 8, b);
    Phantom pc = random_ellipses(32, 3, 8, c);
    CHECK(pa.image.data == pb.image.data);
    CHECK(pa.image.data != pc.image.data);
}

TEST_CASE("random phantom keeps the skull ring") {
    RngStream rng(7);
    Phantom p = random_ellipses(64, 3, 8, rng);
    // The ring region near the left edge of the outer ellipse is bright.
    double ring_max = 0.0;
    for (std::size_t r = 28; r < 36; ++r)
        for (std::size_t c = 2; c < 6; ++c) ring_max = std::max(ring_max, p.image.at(r, c));
    CHECK(ring_max >= 0.85);
}

TEST_CASE("dataset splits 80/20 with disjoint generator seeds") {
    DatasetConfig cfg;
    cfg.size = 16;
    cfg.count = 10;
    cfg.seed = 5;
    Dataset ds = build_dataset(cfg);
    REQUIRE(ds.train.size() == 8);
    REQUIRE(ds.test.size() == 2);
    for (const Phantom& tr : ds.train)
        for (const Phantom& te : ds.test) CHECK(tr.seed != te.seed);
}

TEST_CASE("dataset save/load roundtrip preserves images and splits") {
    DatasetConfig cfg;
    cfg.size = 16;
    cfg.count = 5;
    cfg.seed = 2;
    Dataset ds = build_dataset(cfg);
    const fs::path dir = fs::temp_directory_path() / "mrisim_test_dataset";
    fs::remove_all(dir);
    save_dataset(dir.string(), ds);
    Dataset back = load_dataset(dir.string());
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.test.size() == ds.test.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i)
        CHECK(back.train[i].image.data == ds.train[i].image.data);
    for (std::size_t i = 0; i < ds.test.size(); ++i)
        CHECK(back.test[i].image.data == ds.test[i].image.data);
    fs::remove_all(dir);
}

TEST_CASE("loading a dataset with a missing tensor file names the file") {
    DatasetConfig cfg;
    cfg.size = 16;
    cfg.count = 5;
    Dataset ds = build_dataset(cfg);
    const fs::path dir = fs::temp_directory_path() / "mrisim_test_dataset_missing";
    fs::remove_all(dir);
    save_dataset(dir.string(), ds);
    fs::remove(dir / "0.tnsr");
    try {
        load_dataset(dir.string());
        FAIL("expected TensorIoError");
    } catch (const TensorIoError& e) {
        CHECK(std::string(e.what()).find("0.tnsr") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("loading from a directory without a manifest fails") {
    const fs::path dir = fs::temp_directory_path() / "mrisim_test_dataset_none";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK_THROWS_AS(load_dataset(dir.string()), TensorIoError);
    fs::remove_all(dir);
}
