#include "mrisim/fft.hpp"

#include <cmath>

namespace mrisim {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
    if (!is_power_of_two(rows) || !is_power_of_two(cols))
        throw SizingError("fft2/ifft2: dims must be powers of two, got " + std::to_string(rows) +
                          "x" + std::to_string(cols));
}

// In-place iterative radix-2 transform on a strided line.
// sign = -1 forward, +1 inverse. Applies 1/sqrt(n) scaling.
void fft_line(cplx* data, std::size_t n, std::size_t stride, int sign) {
    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx& a = data[(i + k) * stride];
                cplx& b = data[(i + k + len / 2) * stride];
                const cplx u = a;
                const cplx v = b * w;
                a = u + v;
                b = u - v;
                w *= wl;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) data[i * stride] *= scale;
}

ComplexTensor2 transform2(const ComplexTensor2& t, int sign) {
    check_dims(t.rows, t.cols);
    ComplexTensor2 out = t;
    for (std::size_t r = 0; r < out.rows; ++r) fft_line(out.data.data() + r * out.cols, out.cols, 1, sign);
    for (std::size_t c = 0; c < out.cols; ++c) fft_line(out.data.data() + c, out.rows, out.cols, sign);
    return out;
}

}  // namespace

ComplexTensor2 fft2(const ComplexTensor2& t) { return transform2(t, -1); }

ComplexTensor2 fft2(const RealTensor2& t) { return transform2(to_complex(t), -1); }

ComplexTensor2 ifft2(const ComplexTensor2& t) { return transform2(t, +1); }

}  // namespace mrisim
