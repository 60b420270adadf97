#pragma once

#include "mrisim/recon.hpp"

namespace mrisim {

struct AttackConfig {
    double epsilon = 0.01;       // relative norm budget
    std::size_t iters = 200;
    double lr = 0.0;             // 0 => 1e-3 * ||ksp|| / sqrt(m)
    double init_scale_c = 1e4;
    std::uint64_t seed = 0;
};

struct PerturbationResult {
    ComplexTensor2 delta;
    std::vector<double> loss_history;  // -||x - x_hat||^2 per iteration
    double final_rel_norm = 0.0;
};

// Complex Gaussian direction rescaled so ||delta|| = ||ksp|| / c.
ComplexTensor2 init_delta(const ComplexTensor2& ksp, double c, RngStream& rng);

// Radial projection onto the epsilon*||ksp|| ball (no-op inside it).
ComplexTensor2 project_delta(const ComplexTensor2& delta, const ComplexTensor2& ksp,
                             double epsilon);

// Complex Gaussian direction scaled to exactly epsilon*||ksp||.
ComplexTensor2 random_perturb(const ComplexTensor2& ksp, double epsilon, RngStream& rng);

// Adam-driven projected ascent on ||recon(ksp) - recon(ksp + delta)||^2
// over the real and imaginary parts of delta.
PerturbationResult worst_case_perturb(const Reconstructor& recon, const Measurement& meas,
                                      const AttackConfig& acfg);

struct TransferRow {
    std::string source;
    std::string target;
    double epsilon = 0.0;
    std::size_t item = 0;
    double ssim_clean = 0.0, ssim_adv = 0.0, ssim_rand = 0.0;
    double psnr_clean = 0.0, psnr_adv = 0.0, psnr_rand = 0.0;
    double delta_rel_norm = 0.0;
    std::uint64_t seed = 0;
};

struct TransferReport {
    std::vector<TransferRow> rows;
};

struct TransferItem {
    RealTensor2 gt;
    Measurement meas;
};

// Crafts a white-box perturbation on the source for each item, then
// evaluates every target on clean, adversarial, and equal-norm random
// k-space.
TransferReport transfer_evaluate(const Reconstructor& source,
                                 const std::vector<const Reconstructor*>& targets,
                                 const std::vector<TransferItem>& items,
                                 const AttackConfig& acfg);

}  // namespace mrisim
