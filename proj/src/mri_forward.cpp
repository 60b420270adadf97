#include "mrisim/mri_forward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mrisim {

std::size_t SamplingMask::selected_line_count() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

RealTensor2 SamplingMask::to_tensor() const {
    RealTensor2 t(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!row_selected(r)) continue;
        for (std::size_t c = 0; c < cols; ++c) t.at(r, c) = 1.0;
    }
    return t;
}

SamplingMask make_cartesian_mask(std::size_t rows, std::size_t cols, double acceleration,
                                 double center_fraction, RngStream& rng) {
    if (acceleration < 1.0) throw ConfigError("make_cartesian_mask: acceleration must be >= 1");
    if (center_fraction < 0.0 || center_fraction > 1.0)
        throw ConfigError("make_cartesian_mask: center_fraction must be in [0, 1]");

    const std::size_t budget = static_cast<std::size_t>(std::floor(static_cast<double>(rows) / acceleration));
    const std::size_t n_center = static_cast<std::size_t>(std::floor(center_fraction * static_cast<double>(rows)));
    if (budget < n_center)
        throw ConfigError("make_cartesian_mask: line budget " + std::to_string(budget) +
                          " smaller than center band " + std::to_string(n_center));

    SamplingMask mask;
    mask.rows = rows;
    mask.cols = cols;
    mask.selected.assign(rows, 0);
    mask.acceleration = acceleration;
    mask.center_fraction = center_fraction;

    // Rows sorted by frequency magnitude; the first n_center are the center band.
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto freq = [rows](std::size_t r) { return std::min(r, rows - r); };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return freq(a) < freq(b); });

    for (std::size_t i = 0; i < n_center; ++i) mask.selected[order[i]] = 1;

    // Remaining budget drawn uniformly without replacement from the rest.
    std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_center), order.end());
    std::size_t remaining = budget - n_center;
    for (std::size_t i = 0; i < remaining; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(rest.size() - i));
        std::swap(rest[i], rest[j]);
        mask.selected[rest[i]] = 1;
    }
    return mask;
}

ComplexTensor2 apply_mask(const SamplingMask& mask, const ComplexTensor2& ksp) {
    if (ksp.rows != mask.rows || ksp.cols != mask.cols)
        throw ShapeError("apply_mask: k-space/mask shape mismatch");
    ComplexTensor2 out(ksp.rows, ksp.cols);
    for (std::size_t r = 0; r < ksp.rows; ++r) {
        if (!mask.row_selected(r)) continue;
        for (std::size_t c = 0; c < ksp.cols; ++c) out.at(r, c) = ksp.at(r, c);
    }
    return out;
}

Measurement forward(const RealTensor2& x, const SamplingMask& mask, const NoiseModel& noise,
                    RngStream& rng) {
    if (x.rows != mask.rows || x.cols != mask.cols)
        throw ShapeError("forward: image/mask shape mismatch");
    ComplexTensor2 ksp = fft2(x);
    if (noise.sigma > 0.0) {
        ComplexTensor2 eps = gaussian_complex(rng, x.rows, x.cols);
        for (std::size_t i = 0; i < ksp.size(); ++i) ksp.data[i] += noise.sigma * eps.data[i];
    }
    Measurement meas;
    meas.ksp = apply_mask(mask, ksp);
    meas.mask = mask;
    meas.noise = noise;
    return meas;
}

RealTensor2 adjoint(const Measurement& meas) { return real_part(ifft2(meas.ksp)); }

}  // namespace mrisim
