#include <doctest.h>

#include <cmath>
#include <functional>

#include "mrisim/autodiff.hpp"
#include "mrisim/fft.hpp"

using namespace mrisim;

namespace {

RealTensor2 rand_real(std::uint64_t seed, std::size_t r, std::size_t c) {
    RngStream rng(seed);
    return gaussian_real(rng, r, c);
}

ComplexTensor2 rand_cplx(std::uint64_t seed, std::size_t r, std::size_t c) {
    RngStream rng(seed);
    return gaussian_complex(rng, r, c);
}

// Central-difference check of d loss / d x against the tape gradient.
// `build` maps (tape, leaf id of x) to a 1x1 real loss node.
void fd_check_real(const RealTensor2& x,
                   const std::function<NodeId(Tape&, NodeId)>& build, double tol) {
    Tape tape;
    NodeId leaf = tape.leaf(x, true);
    tape.backward(build(tape, leaf));
    const RealTensor2& g = tape.real_grad(leaf);

    auto eval = [&](const RealTensor2& xp) {
        Tape t;
        return t.scalar_value(build(t, t.leaf(xp)));
    };
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); ++i) {
        RealTensor2 xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
        CHECK(std::abs(g.data[i] - fd) < tol * (1.0 + std::abs(fd)));
    }
}

void fd_check_complex(const ComplexTensor2& x,
                      const std::function<NodeId(Tape&, NodeId)>& build, double tol) {
    Tape tape;
    NodeId leaf = tape.leaf(x, true);
    tape.backward(build(tape, leaf));
    const ComplexTensor2& g = tape.complex_grad(leaf);

    auto eval = [&](const ComplexTensor2& xp) {
        Tape t;
        return t.scalar_value(build(t, t.leaf(xp)));
    };
    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int part = 0; part < 2; ++part) {
            ComplexTensor2 xp = x, xm = x;
            const cplx dh = part == 0 ? cplx{h, 0.0} : cplx{0.0, h};
            xp.data[i] += dh;
            xm.data[i] -= dh;
            const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
            const double gi = part == 0 ? g.data[i].real() : g.data[i].imag();
            CHECK(std::abs(gi - fd) < tol * (1.0 + std::abs(fd)));
        }
    }
}

}  // namespace

TEST_CASE("gradient of squared norm is 2x") {
    RealTensor2 x = rand_real(1, 4, 4);
    Tape tape;
    NodeId leaf = tape.leaf(x, true);
    tape.backward(tape.l2_squared(leaf));
    const RealTensor2& g = tape.real_grad(leaf);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(g.data[i] == doctest::Approx(2.0 * x.data[i]).epsilon(1e-12));
}

TEST_CASE("finite differences: elementwise real ops") {
    RealTensor2 x = rand_real(2, 4, 4);
    RealTensor2 other = rand_real(3, 4, 4);
    fd_check_real(x, [&](Tape& t, NodeId id) {
        NodeId o = t.leaf(other);
        NodeId s = t.add(t.scalar_mul(id, 1.7), t.elementwise_mul(id, o));
        return t.l2_squared(t.sub(s, o));
    }, 1e-6);
}

TEST_CASE("finite differences: leaky_relu away from the kink") {
    RealTensor2 x = rand_real(4, 4, 4);
    for (double& v : x.data)
        if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the nondifferentiable point
    fd_check_real(x, [](Tape& t, NodeId id) { return t.l2_squared(t.leaky_relu(id, 0.1)); },
                  1e-6);
}

TEST_CASE("finite differences: sum_all and mse") {
    RealTensor2 x = rand_real(5, 4, 4);
    RealTensor2 target = rand_real(6, 4, 4);
    fd_check_real(x, [&](Tape& t, NodeId id) { return t.mse(id, t.leaf(target)); }, 1e-6);
    fd_check_real(x, [](Tape& t, NodeId id) {
        return t.l2_squared(t.sum_all(id));
    }, 1e-6);
}

TEST_CASE("finite differences: conv2d wrt input, weights, and bias") {
    const std::size_t cin = 2, cout = 3, n = 8, k = 3;
    RealTensor2 x = rand_real(7, cin * n, n);
    RealTensor2 w = rand_real(8, cout, cin * k * k);
    RealTensor2 b = rand_real(9, cout, 1);

    fd_check_real(x, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.conv2d(id, t.leaf(w), t.leaf(b), cin, cout, k));
    }, 1e-4);
    fd_check_real(w, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.conv2d(t.leaf(x), id, t.leaf(b), cin, cout, k));
    }, 1e-4);
    fd_check_real(b, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.conv2d(t.leaf(x), t.leaf(w), id, cin, cout, k));
    }, 1e-4);
}

TEST_CASE("finite differences: complex elementwise product") {
    ComplexTensor2 x = rand_cplx(10, 4, 4);
    ComplexTensor2 other = rand_cplx(11, 4, 4);
    fd_check_complex(x, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.elementwise_mul(id, t.leaf(other)));
    }, 1e-6);
}

TEST_CASE("finite differences: transform chain with mask and real part") {
    RealTensor2 x = rand_real(12, 8, 8);
    RealTensor2 mask(8, 8);
    for (std::size_t r = 0; r < 8; r += 2)
        for (std::size_t c = 0; c < 8; ++c) mask.at(r, c) = 1.0;
    fd_check_real(x, [&](Tape& t, NodeId id) {
        NodeId k = t.mask_mul(t.fft2_lin(t.complex_of(id)), mask);
        return t.l2_squared(t.real_part_op(t.ifft2_lin(k)));
    }, 1e-6);
}

TEST_CASE("finite differences: make_complex packs two real planes") {
    RealTensor2 re = rand_real(13, 4, 4);
    RealTensor2 im = rand_real(14, 4, 4);
    fd_check_real(re, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.fft2_lin(t.make_complex_op(id, t.leaf(im))));
    }, 1e-6);
    fd_check_real(im, [&](Tape& t, NodeId id) {
        return t.l2_squared(t.fft2_lin(t.make_complex_op(t.leaf(re), id)));
    }, 1e-6);
}

TEST_CASE("unitary transform gradient: d||F x||^2 / dx = 2x") {
    RealTensor2 x = rand_real(15, 16, 16);
    Tape tape;
    NodeId leaf = tape.leaf(x, true);
    tape.backward(tape.l2_squared(tape.fft2_lin(tape.complex_of(leaf))));
    const RealTensor2& g = tape.real_grad(leaf);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(g.data[i] == doctest::Approx(2.0 * x.data[i]).epsilon(1e-9));
}

TEST_CASE("repeated leaf use accumulates gradients") {
    RealTensor2 x = rand_real(16, 4, 4);
    Tape tape;
    NodeId leaf = tape.leaf(x, true);
    // loss = ||x + x||^2 => grad = 8x.
    tape.backward(tape.l2_squared(tape.add(leaf, leaf)));
    const RealTensor2& g = tape.real_grad(leaf);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(g.data[i] == doctest::Approx(8.0 * x.data[i]).epsilon(1e-12));
}

TEST_CASE("second backward call on the same tape is an error") {
    Tape tape;
    NodeId leaf = tape.leaf(rand_real(17, 2, 2), true);
    NodeId loss = tape.l2_squared(leaf);
    tape.backward(loss);
    CHECK_THROWS(tape.backward(loss));
}

TEST_CASE("backward requires a 1x1 real loss") {
    Tape tape;
    NodeId leaf = tape.leaf(rand_real(18, 2, 2), true);
    CHECK_THROWS(tape.backward(leaf));
}

TEST_CASE("gradients are bitwise deterministic across identical builds") {
    RealTensor2 x = rand_real(19, 8, 8);
    RealTensor2 mask(8, 8, 1.0);
    auto run = [&]() {
        Tape t;
        NodeId leaf = t.leaf(x, true);
        NodeId k = t.mask_mul(t.fft2_lin(t.complex_of(t.leaky_relu(leaf, 0.1))), mask);
        t.backward(t.l2_squared(k));
        return t.real_grad(leaf);
    };
    RealTensor2 g1 = run(), g2 = run();
    CHECK(g1.data == g2.data);
}

TEST_CASE("Adam first step moves by ~lr in the gradient sign direction") {
    std::vector<RealTensor2> params{RealTensor2(1, 2)};
    params[0].data = {1.0, -2.0};
    std::vector<RealTensor2> grads{RealTensor2(1, 2)};
    grads[0].data = {0.5, -0.25};
    AdamState state = make_adam_state(params);
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_update(params, grads, state, cfg);
    // With zero state, m_hat = g and v_hat = g^2, so the step is
    // lr * g / (|g| + eps) ~ lr * sign(g).
    CHECK(params[0].data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(params[0].data[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(state.step == 1);
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
    std::vector<RealTensor2> params{RealTensor2(2, 2, 3.5)};
    std::vector<RealTensor2> grads{RealTensor2(2, 2, 0.0)};
    AdamState state = make_adam_state(params);
    adam_update(params, grads, state, AdamConfig{});
    for (double v : params[0].data) CHECK(v == 3.5);
}

TEST_CASE("Adam minimizes a quadratic to high accuracy") {
    std::vector<RealTensor2> params{RealTensor2(1, 1, 0.0)};
    AdamState state = make_adam_state(params);
    AdamConfig cfg;
    cfg.lr = 0.1;
    for (int i = 0; i < 2000; ++i) {
        std::vector<RealTensor2> grads{RealTensor2(1, 1, 2.0 * (params[0].data[0] - 3.0))};
        adam_update(params, grads, state, cfg);
    }
    CHECK(std::abs(params[0].data[0] - 3.0) < 1e-3);
}
