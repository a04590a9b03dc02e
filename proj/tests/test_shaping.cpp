#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sgf/shaping.hpp"

using namespace sgf;

namespace {

// Softmax predictor with constant output p (zero weights, log-p biases).
SubgoalPredictor constant_predictor(std::size_t dim, const std::vector<double>& p) {
    Mlp net({dim, p.size()}, OutputHead::Softmax);
    for (std::size_t j = 0; j < p.size(); ++j) net.params()[net.bias_offset(0) + j] = std::log(p[j]);
    return SubgoalPredictor(net);
}

// One input x; argmax over j of (j x - j^2 / 2) is round(x), clamped to 0..g-1.
SubgoalPredictor rounding_predictor(std::size_t g) {
    Mlp net({1, g}, OutputHead::Softmax);
    for (std::size_t j = 0; j < g; ++j) {
        net.params()[net.weight_offset(0) + j] = static_cast<double>(j);
        net.params()[net.bias_offset(0) + j] = -0.5 * static_cast<double>(j * j);
    }
    return SubgoalPredictor(net);
}

double at(const ShapingPotential& p, double x) { return p.potential(std::vector<double>{x}); }

}  // namespace

TEST_CASE("argmax potential and ties") {
    const auto p = ShapingPotential::subgoal(constant_predictor(2, {0.1, 0.7, 0.2}), 0.99);
    CHECK(p.potential(std::vector<double>{0.0, 0.0}) == 1.0);
    const auto tie = ShapingPotential::subgoal(constant_predictor(2, {0.5, 0.5}), 0.99);
    CHECK(tie.potential(std::vector<double>{0.3, 0.3}) == 0.0);
    const auto r = ShapingPotential::subgoal(rounding_predictor(4), 0.99);
    CHECK(at(r, 0.0) == 0.0);
    CHECK(at(r, 1.1) == 1.0);
    CHECK(at(r, 2.0) == 2.0);
    CHECK(at(r, 3.0) == 3.0);
    CHECK(at(r, 9.0) == 3.0);
}

TEST_CASE("gating zeroes out-of-set potentials") {
    const Mlp emb = Mlp::xavier({2, 4, 3}, OutputHead::Linear, 1, false);
    const UtilityModel far(emb, {50.0, 50.0, 50.0}, 1.0, 0.0);
    const auto gated = ShapingPotential::gated_subgoal(constant_predictor(2, {0.1, 0.1, 0.8}), far, 0.99);
    const std::vector<double> s{0.2, 0.4};
    REQUIRE(far.utility(s) > far.delta());
    CHECK(gated.potential(s) == 0.0);

    UtilityModel open = far;
    open.set_delta(std::numeric_limits<double>::infinity());
    const auto ungated = ShapingPotential::gated_subgoal(constant_predictor(2, {0.1, 0.1, 0.8}), open, 0.99);
    CHECK(ungated.potential(s) == 2.0);
}

TEST_CASE("shaped reward arithmetic") {
    const auto p = ShapingPotential::subgoal(rounding_predictor(4), 0.99);
    const std::vector<double> s{2.0}, s2{3.0};
    CHECK(p.shaped_reward({s, Action::Right, s2, 0.0, false}) == doctest::Approx(0.97).epsilon(1e-14));
    // Same state (bumping a wall): r + (gamma - 1) phi(s).
    CHECK(p.shaped_reward({s, Action::Up, s, 0.0, false}) == doctest::Approx((0.99 - 1.0) * 2.0).epsilon(1e-14));
    CHECK(p.shaped_reward({s, Action::Up, s, 1.0, false}) == doctest::Approx(1.0 + (0.99 - 1.0) * 2.0));
    // Terminal successor has potential zero.
    CHECK(p.shaped_reward({s2, Action::Right, s2, 1.0, true}) == doctest::Approx(1.0 - 3.0));

    const auto none = ShapingPotential::none(0.99);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> a{uniform01(rng)}, b{uniform01(rng)};
        const double r = uniform01(rng) < 0.5 ? 0.0 : 1.0;
        CHECK(none.shaped_reward({a, Action::Left, b, r, false}) == r);
    }
}

TEST_CASE("sub-goal potentials stay in range") {
    const GridEnv env = GridEnv::make(EnvName::RingMaze);
    const auto p = ShapingPotential::subgoal(SubgoalPredictor(2, 4, 5), env.gamma());
    const auto table = p.potential_table(env);
    REQUIRE(table.size() == env.num_states());
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(table[i] >= 0.0);
        CHECK(table[i] <= 3.0);
        CHECK(table[i] == std::floor(table[i]));
        CHECK(table[i] == p.potential(env.encode(env.cell_at(i))));
    }
}

TEST_CASE("monte carlo targets") {
    CHECK(monte_carlo_target(5, 4, 0.99) == doctest::Approx(0.99));
    CHECK(monte_carlo_target(30, 20, 0.99) == doctest::Approx(std::pow(0.99, 10)));
    CHECK(monte_carlo_target(30, 20, 0.99) == doctest::Approx(0.904).epsilon(1e-3));
    CHECK_THROWS_AS(monte_carlo_target(3, 3, 0.99), ContractError);
}

TEST_CASE("value baseline learns gamma next to the terminal") {
    const GridEnv env = GridEnv::from_ascii("corridor", {"S....G"}, 50);
    const TrajectorySet set = generate_expert(env, {}, 20, 1);
    ValueBaselineConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 20;
    const ValueBaselineFit fit = fit_value_baseline(set, env.gamma(), cfg);
    CHECK(std::abs(fit.net.forward(env.encode({0, 4}))[0] - env.gamma()) <= 0.05);
}

TEST_CASE("value loss decreases monotonically on one state") {
    TrajectorySet set(2);
    set.add(Trajectory{0, {{{0.4, 0.6}, Action::Up}}, true});
    ValueBaselineConfig cfg;
    cfg.seed = 3;
    // Adam with momentum overshoots a single target unless steps are small.
    cfg.learning_rate = 1e-5;
    const ValueBaselineFit fit = fit_value_baseline(set, 0.99, cfg);
    REQUIRE(fit.loss_history.size() == cfg.epochs);
    for (std::size_t e = 1; e < fit.loss_history.size(); ++e) CHECK(fit.loss_history[e] < fit.loss_history[e - 1]);
}

TEST_CASE("shaped returns telescope") {
    const GridEnv base = GridEnv::make(EnvName::UMaze);
    const double g = base.gamma();
    const ShapingPotential potentials[] = {
        ShapingPotential::subgoal(SubgoalPredictor(2, 4, 11), g),
        ShapingPotential::value(Mlp::xavier({2, 8, 1}, OutputHead::Linear, 12), g),
    };
    Rng rng(13);
    for (const ShapingPotential& p : potentials) {
        for (int ep = 0; ep < 50; ++ep) {
            GridEnv env = base;
            auto s = env.reset(rng);
            const auto s0 = s;
            double plain = 0.0, shaped = 0.0, disc = 1.0;
            bool terminal = false;
            while (!env.done()) {
                const StepResult r = env.step(action_from_index(uniform_index(rng, kNumActions)));
                plain += disc * r.reward;
                shaped += disc * p.shaped_reward({s, Action::Noop, r.state, r.reward, r.reached_goal});
                disc *= g;
                terminal = r.reached_goal;
                s = r.state;
            }
            const double tail = terminal ? 0.0 : disc * p.potential(s);
            CHECK(shaped == doctest::Approx(plain + tail - p.potential(s0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("random potentials keep the greedy action sets") {
    const GridEnv env = GridEnv::make(EnvName::UMaze);
    const TabularSolution plain = value_iteration(env);
    const auto want = greedy_action_sets(env, plain);
    Rng rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> phi(env.num_states());
        for (double& v : phi) v = 4.0 * uniform01(rng) - 2.0;
        CHECK(greedy_action_sets(env, value_iteration(env, phi)) == want);
    }
}

TEST_CASE("demo start states map to the first sub-goal") {
    const GridEnv env = GridEnv::make(EnvName::UMaze);
    const TrajectorySet set = generate_expert(env, {.p_random = 0.3}, 50, 1);
    const DiscoverResult d = discover(set, {.num_subgoals = 4, .seed = 2});
    const auto p = ShapingPotential::subgoal(d.predictor, env.gamma());
    std::size_t zero = 0;
    for (const Trajectory& t : set.trajectories()) zero += p.potential(t.steps.front().state) == 0.0;
    CHECK(static_cast<double>(zero) / set.size() >= 0.95);
}

TEST_CASE("parse shaping kinds") {
    CHECK(parse_shaping_kind("gated_subgoal") == ShapingKind::GatedSubgoal);
    CHECK(to_string(ShapingKind::Value) == "value");
    CHECK_THROWS_AS(parse_shaping_kind("gated"), ConfigError);
}
