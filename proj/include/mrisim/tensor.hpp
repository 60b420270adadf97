#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "mrisim/errors.hpp"

namespace mrisim {

using cplx = std::complex<double>;

// Row-major 2-D tensor of doubles.
struct RealTensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealTensor2() = default;
    RealTensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const RealTensor2& o) const { return rows == o.rows && cols == o.cols; }
};

// Row-major 2-D tensor of complex doubles.
struct ComplexTensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> data;

    ComplexTensor2() = default;
    ComplexTensor2(std::size_t r, std::size_t c, cplx fill = {0.0, 0.0})
        : rows(r), cols(c), data(r * c, fill) {}

    cplx& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    cplx at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const ComplexTensor2& o) const { return rows == o.rows && cols == o.cols; }
};

RealTensor2 real_part(const ComplexTensor2& t);
RealTensor2 imag_part(const ComplexTensor2& t);
ComplexTensor2 to_complex(const RealTensor2& t);
ComplexTensor2 make_complex(const RealTensor2& re, const RealTensor2& im);

double l2_norm(const RealTensor2& t);
double l2_norm(const ComplexTensor2& t);

bool all_finite(const RealTensor2& t);
bool all_finite(const ComplexTensor2& t);

// Deterministic random stream. Uses mt19937_64 (sequence pinned by the
// C++ standard) with an explicit Box-Muller normal transform so that a
// given seed reproduces the exact same draws on every platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal draw.
    double normal();

    // Derive an independent stream; stable function of (seed, salt).
    RngStream fork(std::uint64_t salt) const;

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// i.i.d. standard normal entries.
RealTensor2 gaussian_real(RngStream& rng, std::size_t rows, std::size_t cols);
// Independent standard normal real and imaginary parts.
ComplexTensor2 gaussian_complex(RngStream& rng, std::size_t rows, std::size_t cols);

}  // namespace mrisim
