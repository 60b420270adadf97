#pragma once

#include <string>
#include <vector>

#include "mrisim/tensor.hpp"

namespace mrisim {

struct Phantom {
    RealTensor2 image;           // values in [0, 1]
    std::string kind;            // "shepp_logan" | "random_ellipses"
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<Phantom> train;
    std::vector<Phantom> test;
};

struct DatasetConfig {
    std::size_t size = 64;       // image side, power of two
    std::size_t count = 100;     // total items; split 80/20
    std::uint64_t seed = 1;
    std::size_t min_ellipses = 3;
    std::size_t max_ellipses = 8;
};

// Standard 10-ellipse Shepp-Logan intensity map, clamped to [0, 1].
Phantom shepp_logan(std::size_t size);

// Skull-like background ring plus random ellipses, clamped to [0, 1].
Phantom random_ellipses(std::size_t size, std::size_t min_count, std::size_t max_count,
                        RngStream& rng);

Dataset build_dataset(const DatasetConfig& cfg);

// Directory layout: manifest.json + {index}.tnsr files.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace mrisim
