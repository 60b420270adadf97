#include "mrisim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrisim/errors.hpp"

namespace mrisim {

namespace {
constexpr std::size_t kWin = 7;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
}  // namespace

double ssim(const RealTensor2& a, const RealTensor2& b, double data_range) {
    if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
    if (data_range <= 0.0) throw ConfigError("ssim: data_range must be > 0");
    if (a.rows < kWin || a.cols < kWin) throw ShapeError("ssim: image smaller than 7x7 window");
    const double c1 = (kK1 * data_range) * (kK1 * data_range);
    const double c2 = (kK2 * data_range) * (kK2 * data_range);
    const double np = static_cast<double>(kWin * kWin);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + kWin <= a.rows; ++r) {
        for (std::size_t c = 0; c + kWin <= a.cols; ++c) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < kWin; ++i) {
                const double* pa = &a.data[(r + i) * a.cols + c];
                const double* pb = &b.data[(r + i) * b.cols + c];
                for (std::size_t j = 0; j < kWin; ++j) {
                    sa += pa[j];
                    sb += pb[j];
                    saa += pa[j] * pa[j];
                    sbb += pb[j] * pb[j];
                    sab += pa[j] * pb[j];
                }
            }
            const double mua = sa / np;
            const double mub = sb / np;
            // Sample normalization (n-1), matching common benchmark code.
            const double va = (saa - np * mua * mua) / (np - 1.0);
            const double vb = (sbb - np * mub * mub) / (np - 1.0);
            const double vab = (sab - np * mua * mub) / (np - 1.0);
            const double num = (2.0 * mua * mub + c1) * (2.0 * vab + c2);
            const double den = (mua * mua + mub * mub + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double psnr(const RealTensor2& a, const RealTensor2& b, double data_range) {
    if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
    if (data_range <= 0.0) throw ConfigError("psnr: data_range must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

DeltaMetrics delta_metrics(const RealTensor2& gt, const RealTensor2& clean_recon,
                           const RealTensor2& pert_recon, double data_range) {
    DeltaMetrics d;
    d.delta_ssim = ssim(gt, clean_recon, data_range) - ssim(gt, pert_recon, data_range);
    d.delta_psnr = psnr(gt, clean_recon, data_range) - psnr(gt, pert_recon, data_range);
    return d;
}

RealTensor2 mae_map(const RealTensor2& gt, const RealTensor2& recon) {
    if (!gt.same_shape(recon)) throw ShapeError("mae_map: shape mismatch");
    RealTensor2 out(gt.rows, gt.cols);
    for (std::size_t i = 0; i < gt.size(); ++i) out.data[i] = std::abs(gt.data[i] - recon.data[i]);
    return out;
}

double data_range_of(const RealTensor2& gt) {
    const auto [mn, mx] = std::minmax_element(gt.data.begin(), gt.data.end());
    return *mx - *mn;
}

double lag1_autocorr(const RealTensor2& t) {
    const double n = static_cast<double>(t.size());
    double mean = 0.0;
    for (double v : t.data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : t.data) var += (v - mean) * (v - mean);
    var /= n;
    if (var == 0.0) return 0.0;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c + 1 < t.cols; ++c) {
            acc += (t.at(r, c) - mean) * (t.at(r, c + 1) - mean);
            ++pairs;
        }
    for (std::size_t r = 0; r + 1 < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c) {
            acc += (t.at(r, c) - mean) * (t.at(r + 1, c) - mean);
            ++pairs;
        }
    return acc / (static_cast<double>(pairs) * var);
}

}  // namespace mrisim
