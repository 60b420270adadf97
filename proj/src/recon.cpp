#include "mrisim/recon.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mrisim {

NodeId Reconstructor::build(Tape&, NodeId, const SamplingMask&) const {
    throw std::logic_error(name() + " is not differentiable");
}

RealTensor2 zero_filled(const Measurement& meas) { return adjoint(meas); }

RealTensor2 cg_least_squares(const Measurement& meas, double l2_reg, std::size_t iters) {
    if (l2_reg < 0.0) throw ConfigError("cg_least_squares: l2_reg must be >= 0");
    const SamplingMask& mask = meas.mask;
    auto normal_op = [&](const RealTensor2& x) {
        RealTensor2 out = real_part(ifft2(apply_mask(mask, fft2(x))));
        if (l2_reg > 0.0)
            for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += l2_reg * x.data[i];
        return out;
    };
    auto dot = [](const RealTensor2& a, const RealTensor2& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
        return s;
    };

    RealTensor2 b = adjoint(meas);
    RealTensor2 x(b.rows, b.cols);
    RealTensor2 r = b;  // x starts at zero
    RealTensor2 p = r;
    double rr = dot(r, r);
    const double rr0 = rr;
    for (std::size_t it = 0; it < iters && rr > 1e-28 * (rr0 + 1.0); ++it) {
        RealTensor2 ap = normal_op(p);
        const double alpha = rr / dot(p, ap);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.data[i] += alpha * p.data[i];
            r.data[i] -= alpha * ap.data[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    }
    return x;
}

RealTensor2 DenoiserRecon::reconstruct(const Measurement& meas) const {
    RealTensor2 x0 = adjoint(meas);
    RealTensor2 corr = net_.forward_plain(x0);
    for (std::size_t i = 0; i < x0.size(); ++i) x0.data[i] += corr.data[i];
    return x0;
}

NodeId DenoiserRecon::build_impl(Tape& tape, NodeId ksp, const SamplingMask& mask, bool train,
                                 std::vector<NodeId>* param_nodes) const {
    const NodeId masked = tape.mask_mul(ksp, mask.to_tensor());
    const NodeId x0 = tape.real_part_op(tape.ifft2_lin(masked));
    std::vector<NodeId> pn = net_.make_param_leaves(tape, train);
    if (param_nodes) *param_nodes = pn;
    return tape.add(x0, net_.build(tape, x0, pn));
}

NodeId DenoiserRecon::build(Tape& tape, NodeId ksp, const SamplingMask& mask) const {
    return build_impl(tape, ksp, mask, false, nullptr);
}

NodeId DenoiserRecon::build_train(Tape& tape, NodeId ksp, const SamplingMask& mask,
                                  std::vector<NodeId>* param_nodes) const {
    return build_impl(tape, ksp, mask, true, param_nodes);
}

UnrolledRecon::UnrolledRecon(std::vector<ConvNet> nets, UnrolledConfig cfg)
    : nets_(std::move(nets)), cfg_(cfg) {
    if (cfg_.n_iters < 1) throw ConfigError("UnrolledRecon: n_iters must be >= 1");
    const std::size_t expected = cfg_.shared_weights ? 1 : cfg_.n_iters;
    if (nets_.size() != expected)
        throw ConfigError("UnrolledRecon: expected " + std::to_string(expected) + " nets, got " +
                          std::to_string(nets_.size()));
}

RealTensor2 UnrolledRecon::reconstruct(const Measurement& meas) const {
    RealTensor2 x = adjoint(meas);
    for (std::size_t it = 0; it < cfg_.n_iters; ++it) {
        ComplexTensor2 r = apply_mask(meas.mask, fft2(x));
        for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= meas.ksp.data[i];
        RealTensor2 g = real_part(ifft2(r));
        for (std::size_t i = 0; i < x.size(); ++i) x.data[i] -= cfg_.step_size * g.data[i];
        RealTensor2 corr = net_for_iter(it).forward_plain(x);
        for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += corr.data[i];
    }
    return x;
}

NodeId UnrolledRecon::build_impl(Tape& tape, NodeId ksp, const SamplingMask& mask, bool train,
                                 std::vector<NodeId>* param_nodes) const {
    RealTensor2 mask01 = mask.to_tensor();
    const NodeId y = tape.mask_mul(ksp, mask01);
    NodeId x = tape.real_part_op(tape.ifft2_lin(y));

    std::vector<std::vector<NodeId>> pn(nets_.size());
    for (std::size_t i = 0; i < nets_.size(); ++i)
        pn[i] = nets_[i].make_param_leaves(tape, train);
    if (param_nodes) {
        param_nodes->clear();
        for (const auto& v : pn) param_nodes->insert(param_nodes->end(), v.begin(), v.end());
    }

    for (std::size_t it = 0; it < cfg_.n_iters; ++it) {
        const NodeId kx = tape.mask_mul(tape.fft2_lin(x), mask01);
        const NodeId r = tape.sub(kx, y);
        const NodeId g = tape.real_part_op(tape.ifft2_lin(r));
        x = tape.sub(x, tape.scalar_mul(g, cfg_.step_size));
        const std::size_t ni = cfg_.shared_weights ? 0 : it;
        x = tape.add(x, nets_[ni].build(tape, x, pn[ni]));
    }
    return x;
}

NodeId UnrolledRecon::build(Tape& tape, NodeId ksp, const SamplingMask& mask) const {
    return build_impl(tape, ksp, mask, false, nullptr);
}

NodeId UnrolledRecon::build_train(Tape& tape, NodeId ksp, const SamplingMask& mask,
                                  std::vector<NodeId>* param_nodes) const {
    return build_impl(tape, ksp, mask, true, param_nodes);
}

namespace {

using BuildTrainFn =
    std::function<NodeId(Tape&, NodeId, const SamplingMask&, std::vector<NodeId>*)>;

TrainReport train_loop(std::vector<RealTensor2*> params, const BuildTrainFn& build_train,
                       const std::vector<Phantom>& train, const TrainConfig& tcfg) {
    if (train.empty()) throw ConfigError("train_supervised: empty training set");
    if (tcfg.lr <= 0.0) throw ConfigError("train_supervised: lr must be > 0");
    if (tcfg.lambda_fid < 0.0) throw ConfigError("train_supervised: lambda_fid must be >= 0");

    std::vector<RealTensor2> param_values;
    for (auto* p : params) param_values.push_back(*p);
    AdamState state = make_adam_state(param_values);
    AdamConfig adam;
    adam.lr = tcfg.lr;

    RngStream rng(tcfg.seed);
    TrainReport report;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        // Fisher-Yates shuffle off the training rng.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_index(i)]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
            Tape tape;
            std::vector<NodeId> pnodes;
            NodeId batch_loss = 0;
            bool first = true;
            for (std::size_t bi = start; bi < end; ++bi) {
                const Phantom& item = train[order[bi]];
                const std::size_t n = item.image.rows;
                RngStream mask_rng = rng.fork(epoch * 1000003 + order[bi]);
                SamplingMask mask = make_cartesian_mask(n, item.image.cols, tcfg.acceleration,
                                                        tcfg.center_fraction, mask_rng);
                RngStream noise_rng = mask_rng.fork(1);
                Measurement meas = forward(item.image, mask, NoiseModel{0.0}, noise_rng);

                // Each item gets its own parameter leaves; gradients are
                // summed over leaf occurrences after backward.
                const NodeId ksp = tape.leaf(meas.ksp);
                std::vector<NodeId> scratch;
                NodeId out = build_train(tape, ksp, mask, first ? &pnodes : &scratch);
                first = false;
                const NodeId gt = tape.leaf(item.image);
                const NodeId img_loss = tape.mse(gt, out);
                const NodeId k_out = tape.mask_mul(tape.fft2_lin(out), mask.to_tensor());
                const NodeId k_loss = tape.mse(k_out, ksp);
                NodeId item_loss = tape.add(tape.scalar_mul(img_loss, tcfg.lambda_fid), k_loss);
                batch_loss = (bi == start) ? item_loss : tape.add(batch_loss, item_loss);
                if (!first) pnodes.insert(pnodes.end(), scratch.begin(), scratch.end());
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            batch_loss = tape.scalar_mul(batch_loss, inv);
            const double loss_value = tape.scalar_value(batch_loss);
            if (!std::isfinite(loss_value))
                throw DivergenceError("train_supervised: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(n_batches));
            tape.backward(batch_loss);

            // Sum gradients over per-item parameter-leaf occurrences.
            const std::size_t n_params = params.size();
            std::vector<RealTensor2> grads;
            grads.reserve(n_params);
            for (std::size_t j = 0; j < n_params; ++j)
                grads.emplace_back(params[j]->rows, params[j]->cols);
            for (std::size_t occ = 0; occ < pnodes.size(); ++occ) {
                const std::size_t j = occ % n_params;
                if (!tape.has_grad(pnodes[occ])) continue;
                const RealTensor2& g = tape.real_grad(pnodes[occ]);
                for (std::size_t i = 0; i < g.size(); ++i) grads[j].data[i] += g.data[i];
            }
            adam_update(param_values, grads, state, adam);
            for (std::size_t j = 0; j < n_params; ++j) *params[j] = param_values[j];

            epoch_loss += loss_value;
            ++n_batches;
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    report.final_loss = report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();
    return report;
}

}  // namespace

TrainReport train_supervised(DenoiserRecon& recon, const std::vector<Phantom>& train,
                             const TrainConfig& tcfg) {
    std::vector<RealTensor2*> params;
    for (auto& p : recon.net().params) params.push_back(&p);
    auto build = [&recon](Tape& tp, NodeId ksp, const SamplingMask& mask,
                          std::vector<NodeId>* pn) { return recon.build_train(tp, ksp, mask, pn); };
    return train_loop(std::move(params), build, train, tcfg);
}

TrainReport train_supervised(UnrolledRecon& recon, const std::vector<Phantom>& train,
                             const TrainConfig& tcfg) {
    std::vector<RealTensor2*> params;
    for (auto& net : recon.nets())
        for (auto& p : net.params) params.push_back(&p);
    auto build = [&recon](Tape& tp, NodeId ksp, const SamplingMask& mask,
                          std::vector<NodeId>* pn) { return recon.build_train(tp, ksp, mask, pn); };
    return train_loop(std::move(params), build, train, tcfg);
}

}  // namespace mrisim
