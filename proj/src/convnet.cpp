#include "mrisim/convnet.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mrisim/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mrisim {

std::size_t ConvNet::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

void ConvNet::init(std::uint64_t seed) {
    RngStream rng(seed);
    params.clear();
    for (std::size_t layer = 0; layer < depth; ++layer) {
        const std::size_t ci = layer_cin(layer);
        const std::size_t co = layer_cout(layer);
        RealTensor2 w(co, ci * k * k);
        RealTensor2 b(co, 1);
        if (layer + 1 < depth) {
            const double scale = std::sqrt(2.0 / static_cast<double>(ci * k * k));
            for (double& v : w.data) v = scale * rng.normal();
        }
        // Final layer stays zero: the residual/score head starts at identity.
        params.push_back(std::move(w));
        params.push_back(std::move(b));
    }
}

RealTensor2 ConvNet::forward_plain(const RealTensor2& x_packed) const {
    const std::size_t n_rows = x_packed.rows / cin;
    const std::size_t n_cols = x_packed.cols;
    RealTensor2 cur = x_packed;
    for (std::size_t layer = 0; layer < depth; ++layer) {
        RealTensor2 out;
        conv2d_forward(cur, params[2 * layer], params[2 * layer + 1], layer_cin(layer),
                       layer_cout(layer), k, n_rows, n_cols, out);
        if (layer + 1 < depth) {
            for (double& v : out.data) v = v >= 0.0 ? v : slope * v;
        }
        cur = std::move(out);
    }
    return cur;
}

std::vector<NodeId> ConvNet::make_param_leaves(Tape& tape, bool requires_grad) const {
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (const auto& p : params) ids.push_back(tape.leaf(p, requires_grad));
    return ids;
}

NodeId ConvNet::build(Tape& tape, NodeId x, const std::vector<NodeId>& param_nodes) const {
    if (param_nodes.size() != params.size())
        throw ShapeError("ConvNet::build: wrong number of parameter nodes");
    NodeId cur = x;
    for (std::size_t layer = 0; layer < depth; ++layer) {
        cur = tape.conv2d(cur, param_nodes[2 * layer], param_nodes[2 * layer + 1],
                          layer_cin(layer), layer_cout(layer), k);
        if (layer + 1 < depth) cur = tape.leaky_relu(cur, slope);
    }
    return cur;
}

NodeId ConvNet::build(Tape& tape, NodeId x) const {
    return build(tape, x, make_param_leaves(tape, false));
}

void save_convnet(const std::string& dir, const ConvNet& net) {
    fs::create_directories(dir);
    json header;
    header["cin"] = net.cin;
    header["cout"] = net.cout;
    header["hidden"] = net.hidden;
    header["depth"] = net.depth;
    header["kernel"] = net.k;
    header["slope"] = net.slope;
    header["n_params"] = net.params.size();
    std::ofstream out(fs::path(dir) / "model.json");
    out << header.dump(2) << "\n";
    if (!out) throw TensorIoError(dir + ": failed writing model.json");
    for (std::size_t i = 0; i < net.params.size(); ++i)
        save_tensor((fs::path(dir) / ("param_" + std::to_string(i) + ".tnsr")).string(),
                    net.params[i]);
}

ConvNet load_convnet(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "model.json");
    if (!in) throw DependencyError(dir + ": missing model.json (train the model first)");
    json header;
    try {
        in >> header;
    } catch (const json::exception& e) {
        throw TensorIoError(dir + ": bad model.json: " + e.what());
    }
    ConvNet net;
    net.cin = header.at("cin");
    net.cout = header.at("cout");
    net.hidden = header.at("hidden");
    net.depth = header.at("depth");
    net.k = header.at("kernel");
    net.slope = header.at("slope");
    const std::size_t n = header.at("n_params");
    for (std::size_t i = 0; i < n; ++i)
        net.params.push_back(
            load_real_tensor((fs::path(dir) / ("param_" + std::to_string(i) + ".tnsr")).string()));
    return net;
}

}  // namespace mrisim
