#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "mrisim/tensor.hpp"

namespace mrisim {

using Value = std::variant<RealTensor2, ComplexTensor2>;
using NodeId = std::size_t;

// Multichannel 2-D convolution, stride 1, same (zero) padding, odd kernel.
// Channels are packed vertically: x is (cin*n_rows) x n_cols, out is
// (cout*n_rows) x n_cols. w is cout x (cin*k*k), b is cout x 1.
void conv2d_forward(const RealTensor2& x, const RealTensor2& w, const RealTensor2& b,
                    std::size_t cin, std::size_t cout, std::size_t k, std::size_t n_rows,
                    std::size_t n_cols, RealTensor2& out);

// Reverse-mode tape. Nodes are recorded in creation order, which is the
// topological order used by backward(). Complex quantities are
// differentiated as (real, imag) pairs: the gradient of a complex node
// packs dL/d(re) + i * dL/d(im).
class Tape {
public:
    NodeId leaf(RealTensor2 v, bool requires_grad = false);
    NodeId leaf(ComplexTensor2 v, bool requires_grad = false);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId a, double s);
    NodeId elementwise_mul(NodeId a, NodeId b);
    NodeId conv2d(NodeId x, NodeId w, NodeId b, std::size_t cin, std::size_t cout,
                  std::size_t k = 3);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId fft2_lin(NodeId a);
    NodeId ifft2_lin(NodeId a);
    NodeId mask_mul(NodeId a, RealTensor2 mask01);
    NodeId real_part_op(NodeId a);
    NodeId complex_of(NodeId re);                 // real -> complex, zero imag
    NodeId make_complex_op(NodeId re, NodeId im);
    NodeId sum_all(NodeId a);                     // -> 1x1 real
    NodeId l2_squared(NodeId a);                  // -> 1x1 real
    NodeId mse(NodeId a, NodeId b);               // mean |a-b|^2 -> 1x1 real

    const Value& value(NodeId id) const { return nodes_[id].value; }
    const RealTensor2& real_value(NodeId id) const;
    const ComplexTensor2& complex_value(NodeId id) const;
    double scalar_value(NodeId id) const;

    bool has_grad(NodeId id) const { return nodes_[id].grad.has_value(); }
    const RealTensor2& real_grad(NodeId id) const;
    const ComplexTensor2& complex_grad(NodeId id) const;

    // Populates gradients of every requires-grad leaf. The loss must be a
    // 1x1 real node. A second call on the same tape is an error.
    void backward(NodeId loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Value value;
        std::optional<Value> grad;
        bool requires_grad = false;
        bool needs_grad = false;
        std::function<void(Tape&, NodeId)> backward;
    };

    NodeId record(Value v, bool needs_grad, std::function<void(Tape&, NodeId)> fn);
    void accumulate(NodeId id, const RealTensor2& g);
    void accumulate(NodeId id, const ComplexTensor2& g);
    bool needs(NodeId id) const { return nodes_[id].needs_grad; }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
};

struct AdamState {
    std::vector<RealTensor2> m;
    std::vector<RealTensor2> v;
    long step = 0;
};

AdamState make_adam_state(const std::vector<RealTensor2>& params);

// Standard Adam with bias correction; increments state.step.
void adam_update(std::vector<RealTensor2>& params, const std::vector<RealTensor2>& grads,
                 AdamState& state, const AdamConfig& cfg);

}  // namespace mrisim
