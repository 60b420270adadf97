#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mrisim/diffusion.hpp"

using namespace mrisim;
namespace fs = std::filesystem;

namespace {

RealTensor2 rand_image(std::uint64_t seed, std::size_t n) {
    RngStream rng(seed);
    return gaussian_real(rng, n, n);
}

SamplingMask full_mask(std::size_t n) {
    RngStream rng(0);
    return make_cartesian_mask(n, n, 1.0, 0.0, rng);
}

double cosine(const RealTensor2& a, const RealTensor2& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a.data[i] * b.data[i];
    return dot / (l2_norm(a) * l2_norm(b));
}

}  // namespace

TEST_CASE("noise schedule is geometric between its endpoints") {
    NoiseSchedule s;
    s.sigma_min = 0.01;
    s.sigma_max = 10.0;
    s.n_scales = 1000;
    CHECK(s.sigma(0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(s.sigma(999) == doctest::Approx(10.0).epsilon(1e-12));
    const double ratio = s.sigma(1) / s.sigma(0);
    for (std::size_t i : {std::size_t(100), std::size_t(500), std::size_t(998)})
        CHECK(s.sigma(i + 1) / s.sigma(i) == doctest::Approx(ratio).epsilon(1e-10));
    CHECK_THROWS_AS(s.sigma(1000), ConfigError);
    NoiseSchedule bad;
    bad.n_scales = 1;
    CHECK_THROWS_AS(bad.sigma(0), ConfigError);
}

TEST_CASE("single-component mixture has the Gaussian closed-form score") {
    GaussianMixture gmm;
    gmm.means.push_back(rand_image(1, 8));
    gmm.weights = {1.0};
    gmm.tau = 0.7;
    RealTensor2 x = rand_image(2, 8);
    const double sigma = 0.3;
    const double var = gmm.tau * gmm.tau + sigma * sigma;
    RealTensor2 s = analytic_gmm_score(x, sigma, gmm);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(s.data[i] ==
              doctest::Approx((gmm.means[0].data[i] - x.data[i]) / var).epsilon(1e-12));

    // Log density matches the isotropic Gaussian formula.
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data[i] - gmm.means[0].data[i];
        d2 += d * d;
    }
    const double expected =
        -0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI * var) - 0.5 * d2 / var;
    CHECK(gmm_log_density(x, sigma, gmm) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score vanishes at the midpoint of a symmetric two-component mixture") {
    RealTensor2 mu = rand_image(3, 8);
    RealTensor2 neg = mu;
    for (double& v : neg.data) v = -v;
    GaussianMixture gmm;
    gmm.means = {mu, neg};
    gmm.weights = {0.5, 0.5};
    gmm.tau = 0.5;
    RealTensor2 zero(8, 8);
    RealTensor2 s = analytic_gmm_score(zero, 0.2, gmm);
    CHECK(l2_norm(s) < 1e-12);
}

TEST_CASE("analytic score matches finite differences of the log density") {
    GaussianMixture gmm;
    gmm.means = {rand_image(4, 4), rand_image(5, 4), rand_image(6, 4)};
    gmm.weights = {0.5, 0.3, 0.2};
    gmm.tau = 0.8;
    RealTensor2 x = rand_image(7, 4);
    const double sigma = 0.4;
    RealTensor2 s = analytic_gmm_score(x, sigma, gmm);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
        RealTensor2 xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd =
            (gmm_log_density(xp, sigma, gmm) - gmm_log_density(xm, sigma, gmm)) / (2.0 * h);
        CHECK(std::abs(s.data[i] - fd) < 1e-6 * (1.0 + std::abs(fd)));
    }
}

TEST_CASE("mixture validation rejects malformed inputs") {
    GaussianMixture empty;
    CHECK_THROWS_AS(gmm_log_density(RealTensor2(2, 2), 0.1, empty), ConfigError);
    GaussianMixture unnorm;
    unnorm.means = {RealTensor2(2, 2)};
    unnorm.weights = {0.7};
    CHECK_THROWS_AS(analytic_gmm_score(RealTensor2(2, 2), 0.1, unnorm), ConfigError);
}

TEST_CASE("consistency combine pins measured entries and ignores the rest") {
    RngStream rng(8);
    SamplingMask mask = make_cartesian_mask(16, 16, 2.0, 0.125, rng);
    ComplexTensor2 k_hat = gaussian_complex(rng, 16, 16);
    ComplexTensor2 y = gaussian_complex(rng, 16, 16);

    SUBCASE("full weight replaces measured entries bit-exactly") {
        ComplexTensor2 out = dc_combine(k_hat, y, mask, 1.0);
        for (std::size_t r = 0; r < 16; ++r)
            for (std::size_t c = 0; c < 16; ++c)
                CHECK(out.at(r, c) == (mask.row_selected(r) ? y.at(r, c) : k_hat.at(r, c)));
        // Idempotent: re-applying changes nothing.
        ComplexTensor2 again = dc_combine(out, y, mask, 1.0);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(again.data[i] == out.data[i]);
    }
    SUBCASE("zero weight is the identity") {
        ComplexTensor2 out = dc_combine(k_hat, y, mask, 0.0);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data[i] == k_hat.data[i]);
    }
    SUBCASE("intermediate weight interpolates on measured rows") {
        const double lam = 0.3;
        ComplexTensor2 out = dc_combine(k_hat, y, mask, lam);
        for (std::size_t r = 0; r < 16; ++r)
            for (std::size_t c = 0; c < 16; ++c) {
                const cplx expected = mask.row_selected(r)
                                          ? lam * y.at(r, c) + (1.0 - lam) * k_hat.at(r, c)
                                          : k_hat.at(r, c);
                CHECK(std::abs(out.at(r, c) - expected) < 1e-15);
            }
    }
    SUBCASE("weight outside [0, 1] is rejected") {
        CHECK_THROWS_AS(dc_combine(k_hat, y, mask, 1.5), ConfigError);
        CHECK_THROWS_AS(dc_combine(k_hat, y, mask, -0.1), ConfigError);
    }
}

TEST_CASE("image-level consistency with a full mask returns the measurement image") {
    SamplingMask mask = full_mask(16);
    RealTensor2 gt = rand_image(9, 16);
    ComplexTensor2 y = fft2(gt);
    RealTensor2 x = rand_image(10, 16);
    RealTensor2 out = data_consistency(x, y, mask, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(gt.data[i]).epsilon(1e-10));
}

TEST_CASE("sampler bookkeeping: score evaluations per scale") {
    GaussianMixture gmm;
    gmm.means = {RealTensor2(8, 8, 0.5)};
    gmm.weights = {1.0};
    gmm.tau = 1.0;
    ScoreFn score = ScoreFn::analytic_gmm(gmm);
    NoiseSchedule sched;
    sched.n_scales = 20;
    RngStream rng(11);
    SamplingMask mask = make_cartesian_mask(8, 8, 2.0, 0.25, rng);
    RngStream nrng(0);
    Measurement meas = forward(RealTensor2(8, 8, 0.5), mask, NoiseModel{0.0}, nrng);

    for (std::size_t corr : {std::size_t(0), std::size_t(1), std::size_t(2)}) {
        SamplerConfig scfg;
        scfg.corrector_steps = corr;
        scfg.seed = 12;
        SampleResult res = pc_sample(score, meas, sched, scfg);
        CHECK(res.score_evals == sched.n_scales * (1 + corr));
    }
}

TEST_CASE("sampling with a full mask reproduces the measured image exactly") {
    // The closing consistency pass pins every k-space entry to the
    // measurement when nothing is undersampled.
    RealTensor2 gt = rand_image(13, 16);
    SamplingMask mask = full_mask(16);
    RngStream nrng(0);
    Measurement meas = forward(gt, mask, NoiseModel{0.0}, nrng);

    GaussianMixture gmm;
    gmm.means = {gt};
    gmm.weights = {1.0};
    gmm.tau = 1.0;
    NoiseSchedule sched;
    sched.n_scales = 30;
    SamplerConfig scfg;
    scfg.seed = 14;
    SampleResult res = pc_sample(ScoreFn::analytic_gmm(gmm), meas, sched, scfg);
    for (std::size_t i = 0; i < gt.size(); ++i)
        CHECK(res.image.data[i] == doctest::Approx(gt.data[i]).epsilon(1e-9));
}

TEST_CASE("sampling is deterministic in the sampler seed") {
    RealTensor2 gt = rand_image(15, 16);
    RngStream mrng(16);
    SamplingMask mask = make_cartesian_mask(16, 16, 2.0, 0.125, mrng);
    RngStream nrng(0);
    Measurement meas = forward(gt, mask, NoiseModel{0.0}, nrng);

    GaussianMixture gmm;
    gmm.means = {gt};
    gmm.weights = {1.0};
    gmm.tau = 0.5;
    NoiseSchedule sched;
    sched.n_scales = 25;
    SamplerConfig scfg;
    scfg.seed = 17;
    RealTensor2 a = pc_sample(ScoreFn::analytic_gmm(gmm), meas, sched, scfg).image;
    RealTensor2 b = pc_sample(ScoreFn::analytic_gmm(gmm), meas, sched, scfg).image;
    CHECK(a.data == b.data);
    scfg.seed = 18;
    RealTensor2 c = pc_sample(ScoreFn::analytic_gmm(gmm), meas, sched, scfg).image;
    CHECK(a.data != c.data);
}

TEST_CASE("sampler trace records one row per scale") {
    RealTensor2 gt = rand_image(19, 8);
    SamplingMask mask = full_mask(8);
    RngStream nrng(0);
    Measurement meas = forward(gt, mask, NoiseModel{0.0}, nrng);
    GaussianMixture gmm;
    gmm.means = {gt};
    gmm.weights = {1.0};
    NoiseSchedule sched;
    sched.n_scales = 12;
    SamplerConfig scfg;
    scfg.seed = 20;
    const fs::path trace = fs::temp_directory_path() / "mrisim_test_trace.csv";
    scfg.trace_csv = trace.string();
    pc_sample(ScoreFn::analytic_gmm(gmm), meas, sched, scfg);
    std::ifstream in(trace);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 1 + sched.n_scales);
    fs::remove(trace);
}

TEST_CASE("learned score wrapper divides the net output by sigma") {
    ConvNet net;
    net.cin = 2;
    net.cout = 1;
    net.hidden = 4;
    net.depth = 2;
    net.init(21);
    RngStream rng(22);
    RealTensor2& wf = net.params[2 * (net.depth - 1)];
    wf = gaussian_real(rng, wf.rows, wf.cols);
    NoiseSchedule sched;
    ScoreFn score = ScoreFn::learned(net, sched);
    RealTensor2 x = rand_image(23, 8);
    RealTensor2 s1 = score(x, 0.1);
    RealTensor2 s2 = score(x, 0.1);
    CHECK(s1.data == s2.data);

    ConvNet bad;
    bad.cin = 1;
    bad.init(24);
    CHECK_THROWS_AS(ScoreFn::learned(bad, sched), ConfigError);
}

TEST_CASE("denoising score matching learns the direction of the smoothed score") {
    DatasetConfig dcfg;
    dcfg.size = 16;
    dcfg.count = 3;  // two training phantoms
    dcfg.seed = 25;
    Dataset ds = build_dataset(dcfg);
    REQUIRE(ds.train.size() == 2);

    NoiseSchedule sched;
    sched.sigma_min = 0.05;
    sched.sigma_max = 2.0;
    sched.n_scales = 30;

    ConvNet net;
    net.cin = 2;
    net.cout = 1;
    net.hidden = 8;
    net.depth = 3;
    net.init(26);
    ScoreTrainConfig tcfg;
    tcfg.steps = 1200;
    tcfg.batch_size = 2;
    tcfg.lr = 2e-3;
    tcfg.seed = 27;
    TrainReport report = train_score(net, ds.train, sched, tcfg);

    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < 100; ++i) early += report.epoch_losses[i];
    for (std::size_t i = report.epoch_losses.size() - 100; i < report.epoch_losses.size(); ++i)
        late += report.epoch_losses[i];
    CHECK(late < early);

    // Empirical prior: equal-weight mixture over the training images.
    GaussianMixture gmm;
    for (const Phantom& p : ds.train) gmm.means.push_back(p.image);
    gmm.weights = {0.5, 0.5};
    gmm.tau = 0.0;
    ScoreFn learned = ScoreFn::learned(net, sched);

    const double sigma = 0.5;
    double mean_cos = 0.0;
    RngStream rng(28);
    const int trials = 8;
    for (int t = 0; t < trials; ++t) {
        const Phantom& p = ds.train[t % 2];
        RealTensor2 z = gaussian_real(rng, 16, 16);
        RealTensor2 x = p.image;
        for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += sigma * z.data[i];
        mean_cos += cosine(learned(x, sigma), analytic_gmm_score(x, sigma, gmm));
    }
    mean_cos /= trials;
    CHECK(mean_cos > 0.7);
}
