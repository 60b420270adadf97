#include "mrisim/diffusion.hpp"

#include <cmath>
#include <fstream>

#include "mrisim/fft.hpp"

namespace mrisim {

double NoiseSchedule::sigma(std::size_t i) const {
    if (n_scales < 2) throw ConfigError("NoiseSchedule: n_scales must be >= 2");
    if (i >= n_scales) throw ConfigError("NoiseSchedule: index out of range");
    const double t = static_cast<double>(i) / static_cast<double>(n_scales - 1);
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

namespace {

void check_gmm(const GaussianMixture& gmm) {
    if (gmm.means.empty()) throw ConfigError("GaussianMixture: no components");
    if (gmm.means.size() != gmm.weights.size())
        throw ConfigError("GaussianMixture: weights/means count mismatch");
    double sum = 0.0;
    for (double w : gmm.weights) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("GaussianMixture: weights must sum to 1");
}

// Per-component log weight + log Gaussian density at variance var.
std::vector<double> component_logps(const RealTensor2& x, double var,
                                    const GaussianMixture& gmm) {
    const double n = static_cast<double>(x.size());
    const double log_norm = -0.5 * n * std::log(2.0 * M_PI * var);
    std::vector<double> logps(gmm.means.size());
    for (std::size_t c = 0; c < gmm.means.size(); ++c) {
        double d2 = 0.0;
        const RealTensor2& mu = gmm.means[c];
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x.data[i] - mu.data[i];
            d2 += d * d;
        }
        logps[c] = std::log(gmm.weights[c]) + log_norm - 0.5 * d2 / var;
    }
    return logps;
}

}  // namespace

double gmm_log_density(const RealTensor2& x, double sigma, const GaussianMixture& gmm) {
    check_gmm(gmm);
    const double var = gmm.tau * gmm.tau + sigma * sigma;
    const std::vector<double> logps = component_logps(x, var, gmm);
    double mx = logps[0];
    for (double lp : logps) mx = std::max(mx, lp);
    double s = 0.0;
    for (double lp : logps) s += std::exp(lp - mx);
    return mx + std::log(s);
}

RealTensor2 analytic_gmm_score(const RealTensor2& x, double sigma, const GaussianMixture& gmm) {
    check_gmm(gmm);
    const double var = gmm.tau * gmm.tau + sigma * sigma;
    const std::vector<double> logps = component_logps(x, var, gmm);
    double mx = logps[0];
    for (double lp : logps) mx = std::max(mx, lp);
    double z = 0.0;
    std::vector<double> resp(logps.size());
    for (std::size_t c = 0; c < logps.size(); ++c) {
        resp[c] = std::exp(logps[c] - mx);
        z += resp[c];
    }
    RealTensor2 score(x.rows, x.cols);
    for (std::size_t c = 0; c < logps.size(); ++c) {
        const double w = resp[c] / z;
        const RealTensor2& mu = gmm.means[c];
        for (std::size_t i = 0; i < x.size(); ++i)
            score.data[i] += w * (mu.data[i] - x.data[i]) / var;
    }
    return score;
}

ScoreFn ScoreFn::analytic_gmm(GaussianMixture gmm) {
    check_gmm(gmm);
    ScoreFn s;
    s.kind_ = "analytic_gmm";
    s.fn_ = [gmm = std::move(gmm)](const RealTensor2& x, double sigma) {
        return analytic_gmm_score(x, sigma, gmm);
    };
    return s;
}

namespace {

RealTensor2 pack_score_input(const RealTensor2& x, double sigma, const NoiseSchedule& sched) {
    const double t = (std::log(sigma) - std::log(sched.sigma_min)) /
                     (std::log(sched.sigma_max) - std::log(sched.sigma_min));
    RealTensor2 packed(2 * x.rows, x.cols);
    std::copy(x.data.begin(), x.data.end(), packed.data.begin());
    std::fill(packed.data.begin() + static_cast<std::ptrdiff_t>(x.size()), packed.data.end(), t);
    return packed;
}

}  // namespace

ScoreFn ScoreFn::learned(ConvNet net, NoiseSchedule schedule) {
    if (net.cin != 2 || net.cout != 1)
        throw ConfigError("ScoreFn::learned: net must map 2 channels to 1");
    ScoreFn s;
    s.kind_ = "learned";
    s.net_ = std::make_shared<ConvNet>(std::move(net));
    auto net_ptr = s.net_;
    s.fn_ = [net_ptr, schedule](const RealTensor2& x, double sigma) {
        RealTensor2 out = net_ptr->forward_plain(pack_score_input(x, sigma, schedule));
        for (double& v : out.data) v /= sigma;
        return out;
    };
    return s;
}

const ConvNet& ScoreFn::net() const {
    if (!net_) throw ConfigError("ScoreFn::net: not a learned score");
    return *net_;
}

TrainReport train_score(ConvNet& net, const std::vector<Phantom>& train,
                        const NoiseSchedule& schedule, const ScoreTrainConfig& tcfg) {
    if (train.empty()) throw ConfigError("train_score: empty training set");
    if (net.cin != 2 || net.cout != 1) throw ConfigError("train_score: net must map 2 channels to 1");

    std::vector<RealTensor2> param_values = net.params;
    AdamState state = make_adam_state(param_values);
    AdamConfig adam;
    adam.lr = tcfg.lr;
    RngStream rng(tcfg.seed);

    TrainReport report;
    for (std::size_t step = 0; step < tcfg.steps; ++step) {
        Tape tape;
        std::vector<NodeId> pnodes;
        NodeId loss = 0;
        for (std::size_t b = 0; b < tcfg.batch_size; ++b) {
            const Phantom& item = train[rng.uniform_index(train.size())];
            const std::size_t idx = rng.uniform_index(schedule.n_scales);
            const double sigma = schedule.sigma(idx);
            RealTensor2 z = gaussian_real(rng, item.image.rows, item.image.cols);
            RealTensor2 noisy = item.image;
            for (std::size_t i = 0; i < noisy.size(); ++i) noisy.data[i] += sigma * z.data[i];

            const NodeId input = tape.leaf(pack_score_input(noisy, sigma, schedule));
            std::vector<NodeId> pn = net.make_param_leaves(tape, true);
            pnodes.insert(pnodes.end(), pn.begin(), pn.end());
            const NodeId out = net.build(tape, input, pn);
            RealTensor2 neg_z = z;
            for (double& v : neg_z.data) v = -v;
            const NodeId target = tape.leaf(std::move(neg_z));
            const NodeId item_loss = tape.mse(out, target);
            loss = (b == 0) ? item_loss : tape.add(loss, item_loss);
        }
        loss = tape.scalar_mul(loss, 1.0 / static_cast<double>(tcfg.batch_size));
        const double loss_value = tape.scalar_value(loss);
        if (!std::isfinite(loss_value))
            throw DivergenceError("train_score: non-finite loss at step " + std::to_string(step));
        tape.backward(loss);

        const std::size_t n_params = param_values.size();
        std::vector<RealTensor2> grads;
        for (std::size_t j = 0; j < n_params; ++j)
            grads.emplace_back(param_values[j].rows, param_values[j].cols);
        for (std::size_t occ = 0; occ < pnodes.size(); ++occ) {
            if (!tape.has_grad(pnodes[occ])) continue;
            const RealTensor2& g = tape.real_grad(pnodes[occ]);
            RealTensor2& acc = grads[occ % n_params];
            for (std::size_t i = 0; i < g.size(); ++i) acc.data[i] += g.data[i];
        }
        adam_update(param_values, grads, state, adam);
        net.params = param_values;
        report.epoch_losses.push_back(loss_value);
    }
    report.final_loss = report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();
    return report;
}

ComplexTensor2 dc_combine(const ComplexTensor2& ksp_hat, const ComplexTensor2& y_t,
                          const SamplingMask& mask, double dc_lambda) {
    if (!ksp_hat.same_shape(y_t)) throw ShapeError("dc_combine: shape mismatch");
    if (ksp_hat.rows != mask.rows || ksp_hat.cols != mask.cols)
        throw ShapeError("dc_combine: mask shape mismatch");
    if (dc_lambda < 0.0 || dc_lambda > 1.0) throw ConfigError("dc_combine: dc_lambda must be in [0, 1]");
    ComplexTensor2 out = ksp_hat;
    for (std::size_t r = 0; r < mask.rows; ++r) {
        if (!mask.row_selected(r)) continue;
        for (std::size_t c = 0; c < mask.cols; ++c)
            out.at(r, c) = dc_lambda * y_t.at(r, c) + (1.0 - dc_lambda) * ksp_hat.at(r, c);
    }
    return out;
}

RealTensor2 data_consistency(const RealTensor2& x_hat, const ComplexTensor2& y_t,
                             const SamplingMask& mask, double dc_lambda) {
    return real_part(ifft2(dc_combine(fft2(x_hat), y_t, mask, dc_lambda)));
}

SampleResult pc_sample(const ScoreFn& score, const Measurement& meas,
                       const NoiseSchedule& schedule, const SamplerConfig& scfg) {
    if (scfg.snr_eta <= 0.0) throw ConfigError("pc_sample: snr_eta must be > 0");
    if (meas.mask.selected_line_count() == 0) throw ConfigError("pc_sample: empty mask");
    const std::size_t rows = meas.ksp.rows, cols = meas.ksp.cols;
    RngStream rng(scfg.seed);

    std::ofstream trace;
    if (!scfg.trace_csv.empty()) {
        trace.open(scfg.trace_csv);
        trace << "scale,sigma,score_norm,x_norm,corrector_step\n";
    }

    // Start from pure VE noise at the largest scale.
    RealTensor2 x = gaussian_real(rng, rows, cols);
    for (double& v : x.data) v *= schedule.sigma(schedule.n_scales - 1);

    std::size_t evals = 0;
    for (std::size_t step = 0; step < schedule.n_scales; ++step) {
        const std::size_t i = schedule.n_scales - 1 - step;
        const double sig = schedule.sigma(i);
        const double sig_prev = (i > 0) ? schedule.sigma(i - 1) : 0.0;

        // (a) data consistency against a noise-matched measurement.
        ComplexTensor2 y_t = meas.ksp;
        if (scfg.noise_matched_measurement) {
            ComplexTensor2 kn = apply_mask(meas.mask, fft2(gaussian_real(rng, rows, cols)));
            for (std::size_t j = 0; j < y_t.size(); ++j) y_t.data[j] += sig * kn.data[j];
        }
        x = data_consistency(x, y_t, meas.mask, scfg.dc_lambda);

        // (b) reverse-diffusion predictor.
        const double dvar = sig * sig - sig_prev * sig_prev;
        RealTensor2 s = score(x, sig);
        ++evals;
        RealTensor2 z = gaussian_real(rng, rows, cols);
        const double noise_scale = std::sqrt(dvar);
        for (std::size_t j = 0; j < x.size(); ++j)
            x.data[j] += dvar * s.data[j] + noise_scale * z.data[j];

        // (c) Langevin corrector.
        double corr_step = 0.0;
        for (std::size_t cstep = 0; cstep < scfg.corrector_steps; ++cstep) {
            RealTensor2 zc = gaussian_real(rng, rows, cols);
            RealTensor2 sc = score(x, sig);
            ++evals;
            const double s_norm = l2_norm(sc);
            const double z_norm = l2_norm(zc);
            corr_step = 0.0;
            if (s_norm > 0.0) {
                const double ratio = scfg.snr_eta * z_norm / s_norm;
                corr_step = 2.0 * ratio * ratio;
            }
            const double cn = std::sqrt(2.0 * corr_step);
            for (std::size_t j = 0; j < x.size(); ++j)
                x.data[j] += corr_step * sc.data[j] + cn * zc.data[j];
        }

        if (!all_finite(x))
            throw DivergenceError("pc_sample: non-finite state at scale index " + std::to_string(i));
        if (trace.is_open())
            trace << i << "," << sig << "," << l2_norm(s) << "," << l2_norm(x) << "," << corr_step
                  << "\n";
    }

    // Final consistency against the raw measurement pins measured entries.
    x = data_consistency(x, meas.ksp, meas.mask, scfg.dc_lambda);
    return SampleResult{std::move(x), evals};
}

}  // namespace mrisim
