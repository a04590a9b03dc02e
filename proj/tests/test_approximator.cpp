#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "sgf/approximator.hpp"

using namespace sgf;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

// Random architecture with 1-2 hidden layers of small width.
Mlp random_net(Rng& rng, OutputHead head, bool bias = true) {
    std::vector<std::size_t> dims{1 + uniform_index(rng, 4)};
    const std::size_t hidden = 1 + uniform_index(rng, 2);
    for (std::size_t i = 0; i < hidden; ++i) dims.push_back(2 + uniform_index(rng, 5));
    dims.push_back(2 + uniform_index(rng, 4));
    Mlp net = Mlp::xavier(dims, head, rng(), bias);
    // Non-zero biases so their gradients are exercised too.
    if (bias) {
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            for (std::size_t r = 0; r < dims[l + 1]; ++r) net.params()[net.bias_offset(l) + r] = uniform01(rng) - 0.5;
        }
    }
    return net;
}

}  // namespace

TEST_CASE("identity layer passes input through") {
    Mlp net({2, 2}, OutputHead::Linear);
    net.params()[net.weight_offset(0) + 0] = 1.0;
    net.params()[net.weight_offset(0) + 3] = 1.0;
    const std::vector<double> x{1.0, 2.0};
    CHECK(net.forward(x) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("softmax head yields a pmf") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Mlp net = Mlp::xavier({3, 8, 4}, OutputHead::Softmax, rng());
        for (double& p : net.params()) p *= 5.0;
        const auto y = net.forward(random_vector(rng, 3, -10, 10));
        REQUIRE(y.size() == 4);
        double s = 0.0;
        for (double v : y) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("forward matches an independent implementation") {
    const Mlp net = Mlp::xavier({1, 5, 3}, OutputHead::Linear, 0);
    const std::vector<double> x{0.5};
    const auto got = net.forward(x);
    const auto want = oracle::forward(net, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));

    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const OutputHead head = trial % 2 ? OutputHead::Softmax : OutputHead::Linear;
        const Mlp n2 = random_net(rng, head, trial % 3 != 0);
        const auto in = random_vector(rng, n2.input_dim());
        const auto a = n2.forward(in);
        const auto b = oracle::forward(n2, in);
        CHECK(oracle::max_relative_error(a, b, 1e-12) < 1e-12);
    }
}

TEST_CASE("layer shapes chain") {
    const Mlp net = Mlp::xavier({3, 7, 5, 2}, OutputHead::Linear, 1);
    CHECK(net.param_count() == 3 * 7 + 7 + 7 * 5 + 5 + 5 * 2 + 2);
    CHECK(net.weight_offset(1) == 3 * 7 + 7);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ShapeError);
    const Mlp nb = Mlp::xavier({3, 7, 2}, OutputHead::Linear, 1, false);
    CHECK(nb.param_count() == 3 * 7 + 7 * 2);
}

TEST_CASE("xavier bound") {
    const Mlp net = Mlp::xavier({10, 30}, OutputHead::Linear, 5);
    const double a = std::sqrt(6.0 / 40.0);
    for (std::size_t i = 0; i < 300; ++i) CHECK(std::abs(net.params()[i]) <= a);
    for (std::size_t i = 300; i < 330; ++i) CHECK(net.params()[i] == 0.0);
}

TEST_CASE("finite differences agree for every loss kind") {
    Rng rng(2024);
    for (int kind = 0; kind < 4; ++kind) {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const bool softmax = kind == 0 || kind == 3;
            const Mlp net = random_net(rng, softmax ? OutputHead::Softmax : OutputHead::Linear, kind != 2);
            const auto x = random_vector(rng, net.input_dim());
            Loss loss;
            switch (kind) {
                case 0: loss = CrossEntropyLoss{uniform_index(rng, net.output_dim()), 0.5 + uniform01(rng)}; break;
                case 1: loss = MseLoss{random_vector(rng, net.output_dim())}; break;
                case 2: loss = SvddLoss{random_vector(rng, net.output_dim())}; break;
                default:
                    loss = PolicyGradientLoss{uniform_index(rng, net.output_dim()), 2.0 * uniform01(rng) - 1.0,
                                              0.1 * uniform01(rng)};
            }
            const Gradients g = backward(net, x, loss);
            worst = std::max(worst, oracle::max_relative_error(g.values, oracle::fd_gradient(net, x, loss)));
        }
        INFO("loss kind " << kind);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("cross-entropy at its minimum has a vanishing gradient") {
    Mlp net({2, 3}, OutputHead::Softmax);
    net.params()[net.bias_offset(0) + 1] = 60.0;
    const std::vector<double> x{0.3, -0.2};
    CHECK(net.forward(x)[1] > 1.0 - 1e-15);
    CHECK(backward(net, x, CrossEntropyLoss{1, 1.0}).norm() < 1e-9);
}

TEST_CASE("svdd gradient vanishes at the center") {
    const Mlp net = Mlp::xavier({2, 6, 4}, OutputHead::Linear, 9, false);
    const std::vector<double> x{0.4, 0.1};
    const SvddLoss at_center{net.forward(x)};
    CHECK(loss_value(net, x, at_center) == 0.0);
    CHECK(backward(net, x, at_center).norm() == 0.0);
}

TEST_CASE("zero gradient step leaves parameters unchanged") {
    const Mlp net = Mlp::xavier({3, 4, 2}, OutputHead::Linear, 4);
    GradientStep step;
    Gradients zero(net);
    Mlp after = net;
    for (int i = 0; i < 5; ++i) after = apply_step(after, zero, step);
    CHECK(after == net);
}

TEST_CASE("non-finite gradient names the parameter") {
    const Mlp net = Mlp::xavier({3, 4, 2}, OutputHead::Linear, 4);
    Gradients g(net);
    g.values[net.bias_offset(1) + 1] = std::numeric_limits<double>::quiet_NaN();
    GradientStep step;
    try {
        (void)apply_step(net, g, step);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find(net.param_path(net.bias_offset(1) + 1)) != std::string::npos);
    }
}

TEST_CASE("small steps reduce loss on a convex slice") {
    // Only the output layer of a linear net: least squares is convex.
    Rng rng(8);
    Mlp net = Mlp::xavier({3, 2}, OutputHead::Linear, 8);
    std::vector<std::vector<double>> xs;
    std::vector<Loss> ls;
    for (int i = 0; i < 32; ++i) {
        xs.push_back(random_vector(rng, 3));
        ls.push_back(MseLoss{random_vector(rng, 2)});
    }
    auto total = [&](const Mlp& n) {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) s += loss_value(n, xs[i], ls[i]);
        return s;
    };
    GradientStep step;
    step.learning_rate = 1e-3;
    int decreases = 0;
    double prev = total(net);
    for (int it = 0; it < 50; ++it) {
        Gradients g(net);
        for (std::size_t i = 0; i < xs.size(); ++i) accumulate_gradient(net, xs[i], ls[i], g, 1.0 / xs.size());
        net = apply_step(net, g, step);
        const double now = total(net);
        decreases += now <= prev;
        prev = now;
    }
    CHECK(decreases >= 48);
}

TEST_CASE("training is deterministic and keeps a valid pmf") {
    auto run = [] {
        Rng rng(77);
        Mlp net = Mlp::xavier({2, 16, 3}, OutputHead::Softmax, 77);
        std::vector<std::vector<double>> xs;
        std::vector<Loss> ls;
        for (int i = 0; i < 100; ++i) {
            xs.push_back(random_vector(rng, 2));
            ls.push_back(CrossEntropyLoss{static_cast<std::size_t>(i % 3), 1.0});
        }
        GradientStep step;
        step.learning_rate = 0.05;
        fit_minibatch(net, xs, ls, 20, 16, step, rng);
        return net;
    };
    const Mlp a = run();
    const Mlp b = run();
    CHECK(a == b);
    const auto p = a.forward(std::vector<double>{0.9, -0.9});
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
}

TEST_CASE("clip bounds the gradient norm") {
    const Mlp net = Mlp::xavier({2, 3}, OutputHead::Linear, 1);
    Gradients g(net);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<double>(i) - 3.0;
    const double before = g.norm();
    CHECK(clip_gradient_norm(g, 1.0) == doctest::Approx(before));
    CHECK(g.norm() == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round trip") {
    const Mlp net = Mlp::xavier({4, 9, 3}, OutputHead::Softmax, 31);
    std::stringstream ss;
    save_mlp(net, ss);
    const Mlp back = load_mlp(ss);
    CHECK(back.layer_dims() == net.layer_dims());
    CHECK(back.head() == net.head());
    for (std::size_t i = 0; i < net.param_count(); ++i) CHECK(std::abs(back.params()[i] - net.params()[i]) <= 1e-15);
    CHECK(back == net);
}

TEST_CASE("corrupt checkpoint reports its line") {
    std::stringstream ss("MLPCKPT v1\nlayer_dims 2 2\nhead linear\nbias 1\n1 2\n");
    try {
        (void)load_mlp(ss);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() >= 5);
    }
}
