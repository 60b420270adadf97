#include "mrisim/tensor.hpp"

#include <cmath>

namespace mrisim {

RealTensor2 real_part(const ComplexTensor2& t) {
    RealTensor2 out(t.rows, t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = t.data[i].real();
    return out;
}

RealTensor2 imag_part(const ComplexTensor2& t) {
    RealTensor2 out(t.rows, t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = t.data[i].imag();
    return out;
}

ComplexTensor2 to_complex(const RealTensor2& t) {
    ComplexTensor2 out(t.rows, t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = {t.data[i], 0.0};
    return out;
}

ComplexTensor2 make_complex(const RealTensor2& re, const RealTensor2& im) {
    if (!re.same_shape(im)) throw ShapeError("make_complex: real/imag shape mismatch");
    ComplexTensor2 out(re.rows, re.cols);
    for (std::size_t i = 0; i < re.size(); ++i) out.data[i] = {re.data[i], im.data[i]};
    return out;
}

double l2_norm(const RealTensor2& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

double l2_norm(const ComplexTensor2& t) {
    double s = 0.0;
    for (const cplx& v : t.data) s += v.real() * v.real() + v.imag() * v.imag();
    return std::sqrt(s);
}

bool all_finite(const RealTensor2& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const ComplexTensor2& t) {
    for (const cplx& v : t.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

double RngStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

RngStream RngStream::fork(std::uint64_t salt) const {
    // splitmix64-style mix of (seed, salt).
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return RngStream(z);
}

RealTensor2 gaussian_real(RngStream& rng, std::size_t rows, std::size_t cols) {
    RealTensor2 out(rows, cols);
    for (double& v : out.data) v = rng.normal();
    return out;
}

ComplexTensor2 gaussian_complex(RngStream& rng, std::size_t rows, std::size_t cols) {
    ComplexTensor2 out(rows, cols);
    for (cplx& v : out.data) {
        const double re = rng.normal();
        const double im = rng.normal();
        v = {re, im};
    }
    return out;
}

}  // namespace mrisim
