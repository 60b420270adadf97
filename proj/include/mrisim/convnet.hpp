#pragma once

#include <string>
#include <vector>

#include "mrisim/autodiff.hpp"

namespace mrisim {

// Small plain CNN: depth conv layers (3x3, same padding) with leaky-relu
// between them. Channels are packed vertically as in conv2d_forward.
// Parameter layout: [W0, b0, W1, b1, ...].
struct ConvNet {
    std::size_t cin = 1;
    std::size_t cout = 1;
    std::size_t hidden = 16;
    std::size_t depth = 4;
    std::size_t k = 3;
    double slope = 0.1;
    std::vector<RealTensor2> params;

    std::size_t layer_cin(std::size_t layer) const { return layer == 0 ? cin : hidden; }
    std::size_t layer_cout(std::size_t layer) const { return layer + 1 == depth ? cout : hidden; }
    std::size_t param_count() const;

    // He-style init; the final layer is zeroed so a fresh net outputs 0.
    void init(std::uint64_t seed);

    RealTensor2 forward_plain(const RealTensor2& x_packed) const;

    // One leaf per parameter, in params order. Reusing the same leaves
    // across repeated build() calls accumulates gradients on them.
    std::vector<NodeId> make_param_leaves(Tape& tape, bool requires_grad) const;

    NodeId build(Tape& tape, NodeId x, const std::vector<NodeId>& param_nodes) const;
    NodeId build(Tape& tape, NodeId x) const;
};

// Checkpoint directory: model.json header + one TNSR file per parameter.
void save_convnet(const std::string& dir, const ConvNet& net);
ConvNet load_convnet(const std::string& dir);

}  // namespace mrisim
