#pragma once

#include <memory>
#include <string>

#include "mrisim/convnet.hpp"
#include "mrisim/mri_forward.hpp"
#include "mrisim/phantom.hpp"

namespace mrisim {

// Named map from (masked k-space, mask) to image. Differentiable
// reconstructors can also record their pipeline on a tape, starting from
// an arbitrary (possibly perturbed, unmasked) k-space node; the builder
// applies the acquisition mask itself.
class Reconstructor {
public:
    virtual ~Reconstructor() = default;
    virtual std::string name() const = 0;
    virtual RealTensor2 reconstruct(const Measurement& meas) const = 0;
    virtual bool differentiable() const { return false; }
    virtual NodeId build(Tape& tape, NodeId ksp, const SamplingMask& mask) const;
};

RealTensor2 zero_filled(const Measurement& meas);

// Conjugate gradients on the normal equations of
// min ||A x - y||^2 + l2_reg ||x||^2.
RealTensor2 cg_least_squares(const Measurement& meas, double l2_reg, std::size_t iters);

class ZeroFilledRecon : public Reconstructor {
public:
    std::string name() const override { return "zero_filled"; }
    RealTensor2 reconstruct(const Measurement& meas) const override { return zero_filled(meas); }
};

class CgRecon : public Reconstructor {
public:
    CgRecon(double l2_reg, std::size_t iters) : l2_reg_(l2_reg), iters_(iters) {}
    std::string name() const override { return "cg_least_squares"; }
    RealTensor2 reconstruct(const Measurement& meas) const override {
        return cg_least_squares(meas, l2_reg_, iters_);
    }

private:
    double l2_reg_;
    std::size_t iters_;
};

// Residual image-domain CNN: out = zf + net(zf).
class DenoiserRecon : public Reconstructor {
public:
    explicit DenoiserRecon(ConvNet net) : net_(std::move(net)) {}
    std::string name() const override { return "denoiser"; }
    RealTensor2 reconstruct(const Measurement& meas) const override;
    bool differentiable() const override { return true; }
    NodeId build(Tape& tape, NodeId ksp, const SamplingMask& mask) const override;
    NodeId build_train(Tape& tape, NodeId ksp, const SamplingMask& mask,
                       std::vector<NodeId>* param_nodes) const;

    ConvNet& net() { return net_; }
    const ConvNet& net() const { return net_; }

private:
    NodeId build_impl(Tape& tape, NodeId ksp, const SamplingMask& mask, bool train,
                      std::vector<NodeId>* param_nodes) const;
    ConvNet net_;
};

struct UnrolledConfig {
    std::size_t n_iters = 8;
    double step_size = 0.5;
    bool shared_weights = true;
};

// Unrolled gradient descent on the data term with a learned residual
// denoiser after each step.
class UnrolledRecon : public Reconstructor {
public:
    UnrolledRecon(std::vector<ConvNet> nets, UnrolledConfig cfg);
    std::string name() const override { return "unrolled"; }
    RealTensor2 reconstruct(const Measurement& meas) const override;
    bool differentiable() const override { return true; }
    NodeId build(Tape& tape, NodeId ksp, const SamplingMask& mask) const override;
    NodeId build_train(Tape& tape, NodeId ksp, const SamplingMask& mask,
                       std::vector<NodeId>* param_nodes) const;

    std::vector<ConvNet>& nets() { return nets_; }
    const std::vector<ConvNet>& nets() const { return nets_; }
    const UnrolledConfig& config() const { return cfg_; }

private:
    NodeId build_impl(Tape& tape, NodeId ksp, const SamplingMask& mask, bool train,
                      std::vector<NodeId>* param_nodes) const;
    const ConvNet& net_for_iter(std::size_t i) const {
        return cfg_.shared_weights ? nets_[0] : nets_[i];
    }
    std::vector<ConvNet> nets_;
    UnrolledConfig cfg_;
};

struct TrainConfig {
    double lambda_fid = 1.0;
    double lr = 1e-3;
    std::size_t batch_size = 4;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    double acceleration = 8.0;
    double center_fraction = 0.04;
};

struct TrainReport {
    std::vector<double> epoch_losses;
    double final_loss = 0.0;
};

// Joint image-fidelity + k-space-fidelity objective, Adam over
// minibatches with a fresh mask per (item, epoch).
TrainReport train_supervised(DenoiserRecon& recon, const std::vector<Phantom>& train,
                             const TrainConfig& tcfg);
TrainReport train_supervised(UnrolledRecon& recon, const std::vector<Phantom>& train,
                             const TrainConfig& tcfg);

}  // namespace mrisim
