#pragma once

#include <functional>
#include <memory>
#include <string>

#include "mrisim/recon.hpp"

namespace mrisim {

// Geometric VE noise schedule: sigma(i) = sigma_min * (sigma_max/sigma_min)^(i/(n-1)).
struct NoiseSchedule {
    double sigma_min = 0.01;
    double sigma_max = 10.0;
    std::size_t n_scales = 1000;

    double sigma(std::size_t i) const;
};

// Isotropic Gaussian mixture prior over images; component k is
// N(mean_k, tau^2 I) with weight weights[k].
struct GaussianMixture {
    std::vector<RealTensor2> means;
    std::vector<double> weights;
    double tau = 1.0;
};

// Log density of the mixture convolved with N(0, sigma^2 I), via log-sum-exp.
double gmm_log_density(const RealTensor2& x, double sigma, const GaussianMixture& gmm);

// Exact score of the sigma-smoothed mixture.
RealTensor2 analytic_gmm_score(const RealTensor2& x, double sigma, const GaussianMixture& gmm);

// Score plug-in: analytic mixture oracle or a trained denoising-score net.
class ScoreFn {
public:
    static ScoreFn analytic_gmm(GaussianMixture gmm);
    // Net input is 2 packed channels (image, normalized log-sigma map);
    // the net predicts sigma * score.
    static ScoreFn learned(ConvNet net, NoiseSchedule schedule);

    RealTensor2 operator()(const RealTensor2& x, double sigma) const { return fn_(x, sigma); }
    const std::string& kind() const { return kind_; }
    const ConvNet& net() const;

private:
    std::string kind_;
    std::function<RealTensor2(const RealTensor2&, double)> fn_;
    std::shared_ptr<ConvNet> net_;
};

struct ScoreTrainConfig {
    double lr = 1e-3;
    std::size_t steps = 3000;
    std::size_t batch_size = 2;
    std::uint64_t seed = 0;
};

// Denoising score matching with sigma^2 weighting: the net regresses
// -z on input x + sigma*z, uniformly over schedule indices.
TrainReport train_score(ConvNet& net, const std::vector<Phantom>& train,
                        const NoiseSchedule& schedule, const ScoreTrainConfig& tcfg);

struct SamplerConfig {
    double snr_eta = 0.517;
    double dc_lambda = 1.0;
    std::size_t corrector_steps = 1;
    std::uint64_t seed = 0;
    // When true, the measurement fed to each DC step carries fresh
    // mask-domain noise at the current sigma; ablation flag.
    bool noise_matched_measurement = true;
    std::string trace_csv;  // per-step trace when nonempty
};

// The bracket of the consistency step: measured entries become
// lambda*y + (1-lambda)*k, unmeasured entries pass through untouched.
ComplexTensor2 dc_combine(const ComplexTensor2& ksp_hat, const ComplexTensor2& y_t,
                          const SamplingMask& mask, double dc_lambda);

RealTensor2 data_consistency(const RealTensor2& x_hat, const ComplexTensor2& y_t,
                             const SamplingMask& mask, double dc_lambda);

struct SampleResult {
    RealTensor2 image;
    std::size_t score_evals = 0;
};

// Conditional Predictor-Corrector sampling: per scale, DC against the
// noise-matched measurement, then a reverse-diffusion predictor step,
// then Langevin corrector steps; a final DC against the raw measurement
// closes the loop.
SampleResult pc_sample(const ScoreFn& score, const Measurement& meas,
                       const NoiseSchedule& schedule, const SamplerConfig& scfg);

// Transfer-target wrapper around pc_sample with a fixed sampler seed.
class DiffusionRecon : public Reconstructor {
public:
    DiffusionRecon(ScoreFn score, NoiseSchedule schedule, SamplerConfig scfg)
        : score_(std::move(score)), schedule_(schedule), scfg_(std::move(scfg)) {}
    std::string name() const override { return "diffusion"; }
    RealTensor2 reconstruct(const Measurement& meas) const override {
        return pc_sample(score_, meas, schedule_, scfg_).image;
    }

private:
    ScoreFn score_;
    NoiseSchedule schedule_;
    SamplerConfig scfg_;
};

}  // namespace mrisim
