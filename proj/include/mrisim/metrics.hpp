#pragma once

#include "mrisim/tensor.hpp"

namespace mrisim {

// Mean local SSIM, 7x7 uniform window, valid-region averaging,
// C1 = (0.01 L)^2, C2 = (0.03 L)^2, sample (n-1) covariance normalization.
double ssim(const RealTensor2& a, const RealTensor2& b, double data_range);

// 10*log10(L^2 / MSE); +infinity when MSE is zero.
double psnr(const RealTensor2& a, const RealTensor2& b, double data_range);

struct DeltaMetrics {
    double delta_ssim = 0.0;
    double delta_psnr = 0.0;
};

// Quality drop of the perturbed reconstruction relative to the clean one,
// both measured against ground truth.
DeltaMetrics delta_metrics(const RealTensor2& gt, const RealTensor2& clean_recon,
                           const RealTensor2& pert_recon, double data_range);

RealTensor2 mae_map(const RealTensor2& gt, const RealTensor2& recon);

// Per-image data_range convention used everywhere: max(gt) - min(gt).
double data_range_of(const RealTensor2& gt);

// Mean of horizontal+vertical lag-1 products of the mean-removed map,
// normalized by its variance. Near 0 for white noise, near 1 for smooth
// structured maps.
double lag1_autocorr(const RealTensor2& t);

}  // namespace mrisim
