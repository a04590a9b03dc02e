#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgf/approximator.hpp"
#include "sgf/envs.hpp"
#include "sgf/outofset.hpp"
#include "sgf/subgoal.hpp"
#include "sgf/trajectory.hpp"

namespace sgf {

enum class ShapingKind { None, Subgoal, GatedSubgoal, Value };

std::string to_string(ShapingKind kind);
ShapingKind parse_shaping_kind(std::string_view text);

struct Transition {
    std::span<const double> state;
    Action action = Action::Noop;
    std::span<const double> next_state;
    double reward = 0.0;
    /// next_state is the absorbing terminal; its potential is 0.
    bool terminal = false;
};

/// Potential function Phi and the potential-based reward r + gamma Phi(s') - Phi(s).
///
/// Sub-goal variants use 0-based sub-goal indices, so the first sub-goal has
/// potential 0. The gated variant zeroes the potential wherever the utility
/// model says the state is out of set.
class ShapingPotential {
public:
    static ShapingPotential none(double gamma);
    static ShapingPotential subgoal(SubgoalPredictor predictor, double gamma);
    static ShapingPotential gated_subgoal(SubgoalPredictor predictor, UtilityModel utility, double gamma);
    static ShapingPotential value(Mlp value_net, double gamma);

    ShapingKind kind() const noexcept { return kind_; }
    double gamma() const noexcept { return gamma_; }
    const std::optional<SubgoalPredictor>& predictor() const noexcept { return predictor_; }
    const std::optional<UtilityModel>& utility() const noexcept { return utility_; }

    double potential(std::span<const double> state) const;
    double shaped_reward(const Transition& tr) const;

    /// Potential of every reachable cell, indexed by tabular index. Goal cells
    /// keep their raw value; callers treat them as terminal.
    std::vector<double> potential_table(const GridEnv& env) const;

private:
    ShapingPotential(ShapingKind kind, double gamma) : kind_(kind), gamma_(gamma) {}

    ShapingKind kind_;
    double gamma_;
    std::optional<SubgoalPredictor> predictor_;
    std::optional<UtilityModel> utility_;
    std::optional<Mlp> value_net_;
};

struct ValueBaselineConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden{64, 64};
    std::uint64_t seed = 0;
};

struct ValueBaselineFit {
    Mlp net;
    std::vector<double> loss_history;
};

/// Monte-Carlo regression target for 0-based step t of an n_i-step
/// demonstration: gamma^(n_i - t), the discounted terminal reward.
double monte_carlo_target(std::size_t n_i, std::size_t t, double gamma);

/// Fits V(s) to the Monte-Carlo targets of every demonstrated state by mean squared error.
ValueBaselineFit fit_value_baseline(const TrajectorySet& set, double gamma, const ValueBaselineConfig& config);

/// Exact action values of the env's deterministic MDP, optionally with the
/// potential-based reward built from `potential` (tabular-indexed, empty for
/// none). Goal cells are absorbing terminals with value and potential 0.
struct TabularSolution {
    std::vector<std::array<double, kNumActions>> q;
    std::vector<double> v;
    std::size_t sweeps = 0;
};

TabularSolution value_iteration(const GridEnv& env, std::span<const double> potential = {},
                                double tolerance = 1e-13, std::size_t max_sweeps = 200000);

/// Actions within `tie_tolerance` of the best action value, per state (empty for goal cells).
std::vector<std::vector<Action>> greedy_action_sets(const GridEnv& env, const TabularSolution& solution,
                                                    double tie_tolerance = 1e-9);

}  // namespace sgf
