#include "mrisim/autodiff.hpp"

#include <cmath>
#include <memory>

#include "mrisim/fft.hpp"

namespace mrisim {

namespace {

bool same_shape(const Value& a, const Value& b) {
    if (a.index() != b.index()) return false;
    if (std::holds_alternative<RealTensor2>(a))
        return std::get<RealTensor2>(a).same_shape(std::get<RealTensor2>(b));
    return std::get<ComplexTensor2>(a).same_shape(std::get<ComplexTensor2>(b));
}

std::pair<std::size_t, std::size_t> shape_of(const Value& v) {
    if (std::holds_alternative<RealTensor2>(v)) {
        const auto& t = std::get<RealTensor2>(v);
        return {t.rows, t.cols};
    }
    const auto& t = std::get<ComplexTensor2>(v);
    return {t.rows, t.cols};
}

}  // namespace

void conv2d_forward(const RealTensor2& x, const RealTensor2& w, const RealTensor2& b,
                    std::size_t cin, std::size_t cout, std::size_t k, std::size_t n_rows,
                    std::size_t n_cols, RealTensor2& out) {
    const std::size_t h = k / 2;
    out = RealTensor2(cout * n_rows, n_cols);
    for (std::size_t oc = 0; oc < cout; ++oc) {
        const double bias = b.at(oc, 0);
        double* ochan = out.data.data() + oc * n_rows * n_cols;
        for (std::size_t i = 0; i < n_rows * n_cols; ++i) ochan[i] = bias;
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const double* xchan = x.data.data() + ic * n_rows * n_cols;
            for (std::size_t u = 0; u < k; ++u) {
                // Source row r + u - h must lie in [0, n_rows).
                const std::size_t r_lo = (u < h) ? (h - u) : 0;
                const std::size_t r_hi = (u > h) ? (n_rows - (u - h)) : n_rows;
                for (std::size_t v = 0; v < k; ++v) {
                    const double wv = w.at(oc, (ic * k + u) * k + v);
                    if (wv == 0.0) continue;
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(h);
                    const std::size_t c_lo = (shift < 0) ? static_cast<std::size_t>(-shift) : 0;
                    const std::size_t c_hi = (shift > 0) ? (n_cols - static_cast<std::size_t>(shift)) : n_cols;
                    for (std::size_t r = r_lo; r < r_hi; ++r) {
                        const double* xrow = xchan + (r + u - h) * n_cols + shift;
                        double* orow = ochan + r * n_cols;
                        for (std::size_t c = c_lo; c < c_hi; ++c) orow[c] += wv * xrow[c];
                    }
                }
            }
        }
    }
}

namespace {

// dL/dw and dL/db for conv2d_forward.
void conv2d_backward_params(const RealTensor2& x, const RealTensor2& g, std::size_t cin,
                            std::size_t cout, std::size_t k, std::size_t n_rows,
                            std::size_t n_cols, RealTensor2& dw, RealTensor2& db) {
    const std::size_t h = k / 2;
    dw = RealTensor2(cout, cin * k * k);
    db = RealTensor2(cout, 1);
    for (std::size_t oc = 0; oc < cout; ++oc) {
        const double* gchan = g.data.data() + oc * n_rows * n_cols;
        double bsum = 0.0;
        for (std::size_t i = 0; i < n_rows * n_cols; ++i) bsum += gchan[i];
        db.at(oc, 0) = bsum;
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const double* xchan = x.data.data() + ic * n_rows * n_cols;
            for (std::size_t u = 0; u < k; ++u) {
                const std::size_t r_lo = (u < h) ? (h - u) : 0;
                const std::size_t r_hi = (u > h) ? (n_rows - (u - h)) : n_rows;
                for (std::size_t v = 0; v < k; ++v) {
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(h);
                    const std::size_t c_lo = (shift < 0) ? static_cast<std::size_t>(-shift) : 0;
                    const std::size_t c_hi = (shift > 0) ? (n_cols - static_cast<std::size_t>(shift)) : n_cols;
                    double acc = 0.0;
                    for (std::size_t r = r_lo; r < r_hi; ++r) {
                        const double* xrow = xchan + (r + u - h) * n_cols + shift;
                        const double* grow = gchan + r * n_cols;
                        for (std::size_t c = c_lo; c < c_hi; ++c) acc += grow[c] * xrow[c];
                    }
                    dw.at(oc, (ic * k + u) * k + v) = acc;
                }
            }
        }
    }
}

// dL/dx via a conv of g with channel-swapped, spatially flipped kernels.
void conv2d_backward_input(const RealTensor2& g, const RealTensor2& w, std::size_t cin,
                           std::size_t cout, std::size_t k, std::size_t n_rows,
                           std::size_t n_cols, RealTensor2& dx) {
    RealTensor2 wt(cin, cout * k * k);
    for (std::size_t oc = 0; oc < cout; ++oc)
        for (std::size_t ic = 0; ic < cin; ++ic)
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t v = 0; v < k; ++v)
                    wt.at(ic, (oc * k + (k - 1 - u)) * k + (k - 1 - v)) =
                        w.at(oc, (ic * k + u) * k + v);
    RealTensor2 zero_bias(cin, 1);
    conv2d_forward(g, wt, zero_bias, cout, cin, k, n_rows, n_cols, dx);
}

}  // namespace

NodeId Tape::record(Value v, bool needs_grad, std::function<void(Tape&, NodeId)> fn) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.backward = needs_grad ? std::move(fn) : nullptr;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Tape::leaf(RealTensor2 v, bool requires_grad) {
    const NodeId id = record(std::move(v), requires_grad, nullptr);
    nodes_[id].requires_grad = requires_grad;
    return id;
}

NodeId Tape::leaf(ComplexTensor2 v, bool requires_grad) {
    const NodeId id = record(std::move(v), requires_grad, nullptr);
    nodes_[id].requires_grad = requires_grad;
    return id;
}

const RealTensor2& Tape::real_value(NodeId id) const { return std::get<RealTensor2>(nodes_[id].value); }
const ComplexTensor2& Tape::complex_value(NodeId id) const { return std::get<ComplexTensor2>(nodes_[id].value); }

double Tape::scalar_value(NodeId id) const {
    const auto& t = real_value(id);
    if (t.size() != 1) throw ShapeError("scalar_value: node is not 1x1");
    return t.data[0];
}

const RealTensor2& Tape::real_grad(NodeId id) const {
    if (!nodes_[id].grad) throw ShapeError("real_grad: no gradient on node");
    return std::get<RealTensor2>(*nodes_[id].grad);
}

const ComplexTensor2& Tape::complex_grad(NodeId id) const {
    if (!nodes_[id].grad) throw ShapeError("complex_grad: no gradient on node");
    return std::get<ComplexTensor2>(*nodes_[id].grad);
}

void Tape::accumulate(NodeId id, const RealTensor2& g) {
    Node& n = nodes_[id];
    if (!n.grad) n.grad = RealTensor2(g.rows, g.cols);
    RealTensor2& acc = std::get<RealTensor2>(*n.grad);
    for (std::size_t i = 0; i < g.size(); ++i) acc.data[i] += g.data[i];
}

void Tape::accumulate(NodeId id, const ComplexTensor2& g) {
    Node& n = nodes_[id];
    if (!n.grad) n.grad = ComplexTensor2(g.rows, g.cols);
    ComplexTensor2& acc = std::get<ComplexTensor2>(*n.grad);
    for (std::size_t i = 0; i < g.size(); ++i) acc.data[i] += g.data[i];
}

NodeId Tape::add(NodeId a, NodeId b) {
    if (!same_shape(nodes_[a].value, nodes_[b].value)) throw ShapeError("add: shape mismatch");
    Value out = std::visit(
        [&](const auto& ta) -> Value {
            auto t = ta;
            const auto& tb = std::get<std::decay_t<decltype(ta)>>(nodes_[b].value);
            for (std::size_t i = 0; i < t.size(); ++i) t.data[i] += tb.data[i];
            return t;
        },
        nodes_[a].value);
    const bool ng = needs(a) || needs(b);
    return record(std::move(out), ng, [a, b](Tape& tp, NodeId self) {
        std::visit(
            [&](const auto& g) {
                if (tp.needs(a)) tp.accumulate(a, g);
                if (tp.needs(b)) tp.accumulate(b, g);
            },
            *tp.nodes_[self].grad);
    });
}

NodeId Tape::sub(NodeId a, NodeId b) {
    if (!same_shape(nodes_[a].value, nodes_[b].value)) throw ShapeError("sub: shape mismatch");
    Value out = std::visit(
        [&](const auto& ta) -> Value {
            auto t = ta;
            const auto& tb = std::get<std::decay_t<decltype(ta)>>(nodes_[b].value);
            for (std::size_t i = 0; i < t.size(); ++i) t.data[i] -= tb.data[i];
            return t;
        },
        nodes_[a].value);
    const bool ng = needs(a) || needs(b);
    return record(std::move(out), ng, [a, b](Tape& tp, NodeId self) {
        std::visit(
            [&](const auto& g) {
                if (tp.needs(a)) tp.accumulate(a, g);
                if (tp.needs(b)) {
                    auto neg = g;
                    for (std::size_t i = 0; i < neg.size(); ++i) neg.data[i] = -neg.data[i];
                    tp.accumulate(b, neg);
                }
            },
            *tp.nodes_[self].grad);
    });
}

NodeId Tape::scalar_mul(NodeId a, double s) {
    Value out = std::visit(
        [&](const auto& ta) -> Value {
            auto t = ta;
            for (std::size_t i = 0; i < t.size(); ++i) t.data[i] *= s;
            return t;
        },
        nodes_[a].value);
    return record(std::move(out), needs(a), [a, s](Tape& tp, NodeId self) {
        std::visit(
            [&](const auto& g) {
                auto scaled = g;
                for (std::size_t i = 0; i < scaled.size(); ++i) scaled.data[i] *= s;
                tp.accumulate(a, scaled);
            },
            *tp.nodes_[self].grad);
    });
}

NodeId Tape::elementwise_mul(NodeId a, NodeId b) {
    if (!same_shape(nodes_[a].value, nodes_[b].value))
        throw ShapeError("elementwise_mul: shape mismatch");
    if (std::holds_alternative<RealTensor2>(nodes_[a].value)) {
        const auto& ta = real_value(a);
        const auto& tb = real_value(b);
        RealTensor2 out(ta.rows, ta.cols);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
        const bool ng = needs(a) || needs(b);
        return record(std::move(out), ng, [a, b](Tape& tp, NodeId self) {
            const auto& g = std::get<RealTensor2>(*tp.nodes_[self].grad);
            const auto& va = tp.real_value(a);
            const auto& vb = tp.real_value(b);
            if (tp.needs(a)) {
                RealTensor2 da(g.rows, g.cols);
                for (std::size_t i = 0; i < g.size(); ++i) da.data[i] = g.data[i] * vb.data[i];
                tp.accumulate(a, da);
            }
            if (tp.needs(b)) {
                RealTensor2 db(g.rows, g.cols);
                for (std::size_t i = 0; i < g.size(); ++i) db.data[i] = g.data[i] * va.data[i];
                tp.accumulate(b, db);
            }
        });
    }
    const auto& ta = complex_value(a);
    const auto& tb = complex_value(b);
    ComplexTensor2 out(ta.rows, ta.cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
    const bool ng = needs(a) || needs(b);
    // Under (re, im) pair semantics, the adjoint of "multiply by z" is
    // "multiply by conj(z)".
    return record(std::move(out), ng, [a, b](Tape& tp, NodeId self) {
        const auto& g = std::get<ComplexTensor2>(*tp.nodes_[self].grad);
        const auto& va = tp.complex_value(a);
        const auto& vb = tp.complex_value(b);
        if (tp.needs(a)) {
            ComplexTensor2 da(g.rows, g.cols);
            for (std::size_t i = 0; i < g.size(); ++i) da.data[i] = g.data[i] * std::conj(vb.data[i]);
            tp.accumulate(a, da);
        }
        if (tp.needs(b)) {
            ComplexTensor2 db(g.rows, g.cols);
            for (std::size_t i = 0; i < g.size(); ++i) db.data[i] = g.data[i] * std::conj(va.data[i]);
            tp.accumulate(b, db);
        }
    });
}

NodeId Tape::conv2d(NodeId x, NodeId w, NodeId b, std::size_t cin, std::size_t cout,
                    std::size_t k) {
    const auto& xv = real_value(x);
    const auto& wv = real_value(w);
    const auto& bv = real_value(b);
    if (xv.rows % cin != 0) throw ShapeError("conv2d: input rows not divisible by cin");
    const std::size_t n_rows = xv.rows / cin;
    const std::size_t n_cols = xv.cols;
    if (wv.rows != cout || wv.cols != cin * k * k) throw ShapeError("conv2d: weight shape mismatch");
    if (bv.rows != cout || bv.cols != 1) throw ShapeError("conv2d: bias shape mismatch");
    RealTensor2 out;
    conv2d_forward(xv, wv, bv, cin, cout, k, n_rows, n_cols, out);
    const bool ng = needs(x) || needs(w) || needs(b);
    return record(std::move(out), ng, [x, w, b, cin, cout, k, n_rows, n_cols](Tape& tp, NodeId self) {
        const auto& g = std::get<RealTensor2>(*tp.nodes_[self].grad);
        if (tp.needs(w) || tp.needs(b)) {
            RealTensor2 dw, db;
            conv2d_backward_params(tp.real_value(x), g, cin, cout, k, n_rows, n_cols, dw, db);
            if (tp.needs(w)) tp.accumulate(w, dw);
            if (tp.needs(b)) tp.accumulate(b, db);
        }
        if (tp.needs(x)) {
            RealTensor2 dx;
            conv2d_backward_input(g, tp.real_value(w), cin, cout, k, n_rows, n_cols, dx);
            tp.accumulate(x, dx);
        }
    });
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
    const auto& ta = real_value(a);
    RealTensor2 out(ta.rows, ta.cols);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = ta.data[i] >= 0.0 ? ta.data[i] : slope * ta.data[i];
    return record(std::move(out), needs(a), [a, slope](Tape& tp, NodeId self) {
        const auto& g = std::get<RealTensor2>(*tp.nodes_[self].grad);
        const auto& v = tp.real_value(a);
        RealTensor2 da(g.rows, g.cols);
        for (std::size_t i = 0; i < g.size(); ++i)
            da.data[i] = v.data[i] >= 0.0 ? g.data[i] : slope * g.data[i];
        tp.accumulate(a, da);
    });
}

NodeId Tape::fft2_lin(NodeId a) {
    const bool is_real = std::holds_alternative<RealTensor2>(nodes_[a].value);
    ComplexTensor2 out = is_real ? fft2(real_value(a)) : fft2(complex_value(a));
    // Adjoint of the unitary forward transform is the inverse transform.
    return record(std::move(out), needs(a), [a, is_real](Tape& tp, NodeId self) {
        const auto& g = std::get<ComplexTensor2>(*tp.nodes_[self].grad);
        ComplexTensor2 back = ifft2(g);
        if (is_real)
            tp.accumulate(a, real_part(back));
        else
            tp.accumulate(a, back);
    });
}

NodeId Tape::ifft2_lin(NodeId a) {
    ComplexTensor2 out = ifft2(complex_value(a));
    return record(std::move(out), needs(a), [a](Tape& tp, NodeId self) {
        const auto& g = std::get<ComplexTensor2>(*tp.nodes_[self].grad);
        tp.accumulate(a, fft2(g));
    });
}

NodeId Tape::mask_mul(NodeId a, RealTensor2 mask01) {
    auto mask = std::make_shared<RealTensor2>(std::move(mask01));
    Value out = std::visit(
        [&](const auto& ta) -> Value {
            if (ta.rows != mask->rows || ta.cols != mask->cols)
                throw ShapeError("mask_mul: mask shape mismatch");
            auto t = ta;
            for (std::size_t i = 0; i < t.size(); ++i) t.data[i] *= mask->data[i];
            return t;
        },
        nodes_[a].value);
    return record(std::move(out), needs(a), [a, mask](Tape& tp, NodeId self) {
        std::visit(
            [&](const auto& g) {
                auto masked = g;
                for (std::size_t i = 0; i < masked.size(); ++i) masked.data[i] *= mask->data[i];
                tp.accumulate(a, masked);
            },
            *tp.nodes_[self].grad);
    });
}

NodeId Tape::real_part_op(NodeId a) {
    RealTensor2 out = real_part(complex_value(a));
    return record(std::move(out), needs(a), [a](Tape& tp, NodeId self) {
        const auto& g = std::get<RealTensor2>(*tp.nodes_[self].grad);
        ComplexTensor2 back(g.rows, g.cols);
        for (std::size_t i = 0; i < g.size(); ++i) back.data[i] = {g.data[i], 0.0};
        tp.accumulate(a, back);
    });
}

NodeId Tape::complex_of(NodeId re) {
    ComplexTensor2 out = to_complex(real_value(re));
    return record(std::move(out), needs(re), [re](Tape& tp, NodeId self) {
        const auto& g = std::get<ComplexTensor2>(*tp.nodes_[self].grad);
        tp.accumulate(re, real_part(g));
    });
}

NodeId Tape::make_complex_op(NodeId re, NodeId im) {
    ComplexTensor2 out = make_complex(real_value(re), real_value(im));
    const bool ng = needs(re) || needs(im);
    return record(std::move(out), ng, [re, im](Tape& tp, NodeId self) {
        const auto& g = std::get<ComplexTensor2>(*tp.nodes_[self].grad);
        if (tp.needs(re)) tp.accumulate(re, real_part(g));
        if (tp.needs(im)) tp.accumulate(im, imag_part(g));
    });
}

NodeId Tape::sum_all(NodeId a) {
    const auto& ta = real_value(a);
    RealTensor2 out(1, 1);
    for (double v : ta.data) out.data[0] += v;
    return record(std::move(out), needs(a), [a](Tape& tp, NodeId self) {
        const double gs = std::get<RealTensor2>(*tp.nodes_[self].grad).data[0];
        const auto& v = tp.real_value(a);
        RealTensor2 da(v.rows, v.cols, gs);
        tp.accumulate(a, da);
    });
}

NodeId Tape::l2_squared(NodeId a) {
    RealTensor2 out(1, 1);
    const bool is_real = std::holds_alternative<RealTensor2>(nodes_[a].value);
    if (is_real) {
        for (double v : real_value(a).data) out.data[0] += v * v;
    } else {
        for (const cplx& v : complex_value(a).data) out.data[0] += std::norm(v);
    }
    return record(std::move(out), needs(a), [a, is_real](Tape& tp, NodeId self) {
        const double gs = std::get<RealTensor2>(*tp.nodes_[self].grad).data[0];
        if (is_real) {
            const auto& v = tp.real_value(a);
            RealTensor2 da(v.rows, v.cols);
            for (std::size_t i = 0; i < v.size(); ++i) da.data[i] = 2.0 * gs * v.data[i];
            tp.accumulate(a, da);
        } else {
            const auto& v = tp.complex_value(a);
            ComplexTensor2 da(v.rows, v.cols);
            for (std::size_t i = 0; i < v.size(); ++i) da.data[i] = 2.0 * gs * v.data[i];
            tp.accumulate(a, da);
        }
    });
}

NodeId Tape::mse(NodeId a, NodeId b) {
    if (!same_shape(nodes_[a].value, nodes_[b].value)) throw ShapeError("mse: shape mismatch");
    const auto [rows, cols] = shape_of(nodes_[a].value);
    const double inv_n = 1.0 / static_cast<double>(rows * cols);
    NodeId diff = sub(a, b);
    NodeId ss = l2_squared(diff);
    return scalar_mul(ss, inv_n);
}

void Tape::backward(NodeId loss) {
    if (backward_done_)
        throw ShapeError("backward: tape already differentiated; build a fresh tape");
    const auto& lv = nodes_[loss].value;
    if (!std::holds_alternative<RealTensor2>(lv) || std::get<RealTensor2>(lv).size() != 1)
        throw ShapeError("backward: loss must be a 1x1 real node");
    backward_done_ = true;
    nodes_[loss].grad = RealTensor2(1, 1, 1.0);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && n.grad) n.backward(*this, i);
    }
}

AdamState make_adam_state(const std::vector<RealTensor2>& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.rows, p.cols);
        s.v.emplace_back(p.rows, p.cols);
    }
    s.step = 0;
    return s;
}

void adam_update(std::vector<RealTensor2>& params, const std::vector<RealTensor2>& grads,
                 AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_update: parameter/gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        RealTensor2& w = params[p];
        const RealTensor2& g = grads[p];
        RealTensor2& m = state.m[p];
        RealTensor2& v = state.v[p];
        if (!w.same_shape(g)) throw ShapeError("adam_update: grad shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            w.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_hat);
        }
    }
}

}  // namespace mrisim
