#pragma once

#include "mrisim/fft.hpp"
#include "mrisim/tensor.hpp"

namespace mrisim {

// Cartesian row mask: a boolean per k-space line (row), broadcast across
// columns. "Center" lines are the lowest frequencies, i.e. rows r with
// smallest min(r, rows - r) in the unshifted fft2 layout.
struct SamplingMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> selected;  // one per row
    double acceleration = 1.0;
    double center_fraction = 0.0;

    bool row_selected(std::size_t r) const { return selected[r] != 0; }
    std::size_t selected_line_count() const;
    std::size_t selected_entry_count() const { return selected_line_count() * cols; }

    // Dense 0/1 map, for serialization and elementwise use.
    RealTensor2 to_tensor() const;
};

struct NoiseModel {
    double sigma = 0.0;  // complex Gaussian std per component, k-space
};

// Zero-filled measurement: ksp is exactly zero wherever the mask is 0.
struct Measurement {
    ComplexTensor2 ksp;
    SamplingMask mask;
    NoiseModel noise;
};

SamplingMask make_cartesian_mask(std::size_t rows, std::size_t cols, double acceleration,
                                 double center_fraction, RngStream& rng);

// Applies the mask to a full-grid k-space tensor (zeroes unselected rows).
ComplexTensor2 apply_mask(const SamplingMask& mask, const ComplexTensor2& ksp);

// y = mask . (fft2(x) + noise); unselected entries exactly zero.
Measurement forward(const RealTensor2& x, const SamplingMask& mask, const NoiseModel& noise,
                    RngStream& rng);

// Real part of ifft2(ksp): the canonical zero-filled reconstruction input.
RealTensor2 adjoint(const Measurement& meas);

}  // namespace mrisim
