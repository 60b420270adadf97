#include "mrisim/attack.hpp"

#include <cmath>

#include "mrisim/metrics.hpp"

namespace mrisim {

ComplexTensor2 init_delta(const ComplexTensor2& ksp, double c, RngStream& rng) {
    const double ksp_norm = l2_norm(ksp);
    if (ksp_norm == 0.0) throw ConfigError("init_delta: zero k-space");
    if (c <= 0.0) throw ConfigError("init_delta: c must be > 0");
    ComplexTensor2 delta = gaussian_complex(rng, ksp.rows, ksp.cols);
    const double scale = ksp_norm / (l2_norm(delta) * c);
    for (cplx& v : delta.data) v *= scale;
    return delta;
}

ComplexTensor2 project_delta(const ComplexTensor2& delta, const ComplexTensor2& ksp,
                             double epsilon) {
    const double budget = epsilon * l2_norm(ksp);
    const double norm = l2_norm(delta);
    if (norm <= budget) return delta;
    ComplexTensor2 out = delta;
    const double scale = budget / norm;
    for (cplx& v : out.data) v *= scale;
    return out;
}

ComplexTensor2 random_perturb(const ComplexTensor2& ksp, double epsilon, RngStream& rng) {
    ComplexTensor2 delta(ksp.rows, ksp.cols);
    if (epsilon == 0.0) return delta;
    delta = gaussian_complex(rng, ksp.rows, ksp.cols);
    const double scale = epsilon * l2_norm(ksp) / l2_norm(delta);
    for (cplx& v : delta.data) v *= scale;
    return delta;
}

PerturbationResult worst_case_perturb(const Reconstructor& recon, const Measurement& meas,
                                      const AttackConfig& acfg) {
    if (!recon.differentiable())
        throw ConfigError("worst_case_perturb: " + recon.name() + " is not differentiable");
    if (acfg.epsilon <= 0.0) throw ConfigError("worst_case_perturb: epsilon must be > 0");

    const ComplexTensor2& ksp = meas.ksp;
    const double ksp_norm = l2_norm(ksp);
    const std::size_t m = meas.mask.selected_entry_count();
    const double lr =
        acfg.lr > 0.0 ? acfg.lr : 1e-3 * ksp_norm / std::sqrt(static_cast<double>(m));

    const RealTensor2 x_ref = recon.reconstruct(meas);

    RngStream rng(acfg.seed);
    ComplexTensor2 delta = init_delta(ksp, acfg.init_scale_c, rng);
    std::vector<RealTensor2> params = {real_part(delta), imag_part(delta)};
    AdamState state = make_adam_state(params);
    AdamConfig adam;
    adam.lr = lr;

    PerturbationResult result;
    for (std::size_t it = 0; it < acfg.iters; ++it) {
        Tape tape;
        const NodeId dr = tape.leaf(params[0], true);
        const NodeId di = tape.leaf(params[1], true);
        const NodeId dnode = tape.make_complex_op(dr, di);
        const NodeId perturbed = tape.add(tape.leaf(ksp), dnode);
        const NodeId x_hat = recon.build(tape, perturbed, meas.mask);
        const NodeId diff = tape.sub(tape.leaf(x_ref), x_hat);
        const NodeId loss = tape.scalar_mul(tape.l2_squared(diff), -1.0);
        const double loss_value = tape.scalar_value(loss);
        if (!std::isfinite(loss_value))
            throw DivergenceError("worst_case_perturb: non-finite loss at iteration " +
                                  std::to_string(it));
        tape.backward(loss);
        std::vector<RealTensor2> grads = {tape.real_grad(dr), tape.real_grad(di)};
        adam_update(params, grads, state, adam);

        ComplexTensor2 projected =
            project_delta(make_complex(params[0], params[1]), ksp, acfg.epsilon);
        params[0] = real_part(projected);
        params[1] = imag_part(projected);
        result.loss_history.push_back(loss_value);
    }

    result.delta = make_complex(params[0], params[1]);
    result.final_rel_norm = l2_norm(result.delta) / ksp_norm;
    if (!all_finite(result.delta))
        throw DivergenceError("worst_case_perturb: non-finite perturbation");
    return result;
}

namespace {

Measurement with_ksp(const Measurement& meas, const ComplexTensor2& delta) {
    Measurement out = meas;
    ComplexTensor2 perturbed = meas.ksp;
    for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed.data[i] += delta.data[i];
    out.ksp = apply_mask(meas.mask, perturbed);
    return out;
}

}  // namespace

TransferReport transfer_evaluate(const Reconstructor& source,
                                 const std::vector<const Reconstructor*>& targets,
                                 const std::vector<TransferItem>& items,
                                 const AttackConfig& acfg) {
    TransferReport report;
    for (std::size_t idx = 0; idx < items.size(); ++idx) {
        const TransferItem& item = items[idx];
        AttackConfig item_cfg = acfg;
        item_cfg.seed = RngStream(acfg.seed).fork(idx).seed();

        ComplexTensor2 delta;
        if (acfg.epsilon > 0.0) {
            delta = worst_case_perturb(source, item.meas, item_cfg).delta;
        } else {
            delta = ComplexTensor2(item.meas.ksp.rows, item.meas.ksp.cols);
        }
        RngStream rand_rng = RngStream(item_cfg.seed).fork(0x5eed);
        ComplexTensor2 rand_delta = random_perturb(item.meas.ksp, acfg.epsilon, rand_rng);

        const double range = data_range_of(item.gt);
        const Measurement meas_adv = with_ksp(item.meas, delta);
        const Measurement meas_rand = with_ksp(item.meas, rand_delta);
        for (const Reconstructor* target : targets) {
            TransferRow row;
            row.source = source.name();
            row.target = target->name();
            row.epsilon = acfg.epsilon;
            row.item = idx;
            row.seed = item_cfg.seed;
            row.delta_rel_norm = l2_norm(delta) / l2_norm(item.meas.ksp);
            try {
                const RealTensor2 clean = target->reconstruct(item.meas);
                const RealTensor2 adv = target->reconstruct(meas_adv);
                const RealTensor2 rnd = target->reconstruct(meas_rand);
                row.ssim_clean = ssim(item.gt, clean, range);
                row.ssim_adv = ssim(item.gt, adv, range);
                row.ssim_rand = ssim(item.gt, rnd, range);
                row.psnr_clean = psnr(item.gt, clean, range);
                row.psnr_adv = psnr(item.gt, adv, range);
                row.psnr_rand = psnr(item.gt, rnd, range);
            } catch (const std::exception& e) {
                throw DivergenceError("transfer_evaluate: target " + target->name() + ", item " +
                                      std::to_string(idx) + ": " + e.what());
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

}  // namespace mrisim
