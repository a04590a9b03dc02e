#include "sgf/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sgf {

std::string to_string(ShapingKind kind) {
    switch (kind) {
        case ShapingKind::None: return "none";
        case ShapingKind::Subgoal: return "subgoal";
        case ShapingKind::GatedSubgoal: return "gated_subgoal";
        case ShapingKind::Value: return "value";
    }
    return "?";
}

ShapingKind parse_shaping_kind(std::string_view text) {
    if (text == "none") return ShapingKind::None;
    if (text == "subgoal") return ShapingKind::Subgoal;
    if (text == "gated_subgoal") return ShapingKind::GatedSubgoal;
    if (text == "value") return ShapingKind::Value;
    throw ConfigError("unknown shaping '" + std::string(text) + "' (expected none, subgoal, gated_subgoal or value)");
}

ShapingPotential ShapingPotential::none(double gamma) { return {ShapingKind::None, gamma}; }

ShapingPotential ShapingPotential::subgoal(SubgoalPredictor predictor, double gamma) {
    ShapingPotential p(ShapingKind::Subgoal, gamma);
    p.predictor_ = std::move(predictor);
    return p;
}

ShapingPotential ShapingPotential::gated_subgoal(SubgoalPredictor predictor, UtilityModel utility, double gamma) {
    if (predictor.net().input_dim() != utility.net().input_dim()) {
        throw ShapeError("predictor and utility model expect different state dimensions");
    }
    ShapingPotential p(ShapingKind::GatedSubgoal, gamma);
    p.predictor_ = std::move(predictor);
    p.utility_ = std::move(utility);
    return p;
}

ShapingPotential ShapingPotential::value(Mlp value_net, double gamma) {
    if (value_net.output_dim() != 1 || value_net.head() != OutputHead::Linear) {
        throw ContractError("value baseline needs a scalar linear head");
    }
    ShapingPotential p(ShapingKind::Value, gamma);
    p.value_net_ = std::move(value_net);
    return p;
}

double ShapingPotential::potential(std::span<const double> state) const {
    switch (kind_) {
        case ShapingKind::None: return 0.0;
        case ShapingKind::Subgoal: return static_cast<double>(predictor_->argmax(state));
        case ShapingKind::GatedSubgoal:
            if (!utility_->in_set(state)) return 0.0;
            return static_cast<double>(predictor_->argmax(state));
        case ShapingKind::Value: return value_net_->forward(state)[0];
    }
    return 0.0;
}

double ShapingPotential::shaped_reward(const Transition& tr) const {
    const double next = tr.terminal ? 0.0 : potential(tr.next_state);
    return tr.reward + gamma_ * next - potential(tr.state);
}

std::vector<double> ShapingPotential::potential_table(const GridEnv& env) const {
    std::vector<double> table(env.num_states());
    for (std::size_t i = 0; i < table.size(); ++i) table[i] = potential(env.encode(env.cell_at(i)));
    return table;
}

double monte_carlo_target(std::size_t n_i, std::size_t t, double gamma) {
    if (t >= n_i) throw ContractError("step index beyond trajectory length");
    return std::pow(gamma, static_cast<double>(n_i - t));
}

ValueBaselineFit fit_value_baseline(const TrajectorySet& set, double gamma, const ValueBaselineConfig& config) {
    if (set.empty()) throw ContractError("cannot fit a value baseline to an empty set");
    std::vector<std::vector<double>> inputs;
    std::vector<Loss> losses;
    for (const Trajectory& traj : set.trajectories()) {
        if (!traj.terminal_reached) throw ContractError("value baseline needs terminal-reaching trajectories");
        for (std::size_t t = 0; t < traj.size(); ++t) {
            inputs.push_back(traj.steps[t].state);
            losses.emplace_back(MseLoss{{monte_carlo_target(traj.size(), t, gamma)}});
        }
    }
    std::vector<std::size_t> dims{set.state_dim()};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(1);
    ValueBaselineFit fit{Mlp::xavier(dims, OutputHead::Linear, derive_seed(config.seed, 0)), {}};
    GradientStep step;
    step.learning_rate = config.learning_rate;
    Rng rng(derive_seed(config.seed, 1));
    fit.loss_history = fit_minibatch(fit.net, inputs, losses, config.epochs, config.batch_size, step, rng);
    return fit;
}

TabularSolution value_iteration(const GridEnv& env, std::span<const double> potential, double tolerance,
                                std::size_t max_sweeps) {
    const std::size_t n = env.num_states();
    if (!potential.empty() && potential.size() != n) throw ShapeError("potential table does not cover every state");
    const double gamma = env.gamma();
    // successor[s][a] and whether it is terminal.
    std::vector<std::array<std::size_t, kNumActions>> next(n);
    std::vector<char> goal(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        const Cell c = env.cell_at(s);
        goal[s] = env.is_goal(c);
        // Goal cells are absorbing; their neighbours need not be reachable.
        if (goal[s]) continue;
        for (std::size_t a = 0; a < kNumActions; ++a) next[s][a] = env.tabular_index(env.transition(c, kAllActions[a]));
    }
    auto phi = [&](std::size_t s) { return potential.empty() || goal[s] ? 0.0 : potential[s]; };
    // Reward of each (s, a): sparse env reward plus the shaping term.
    std::vector<std::array<double, kNumActions>> reward(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (goal[s]) continue;
        for (std::size_t a = 0; a < kNumActions; ++a) {
            const std::size_t s2 = next[s][a];
            reward[s][a] = (goal[s2] ? 1.0 : 0.0) + gamma * phi(s2) - phi(s);
        }
    }

    TabularSolution sol;
    sol.q.assign(n, {});
    sol.v.assign(n, 0.0);
    std::vector<double> v_next(n, 0.0);
    for (sol.sweeps = 0; sol.sweeps < max_sweeps; ++sol.sweeps) {
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (goal[s]) continue;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < kNumActions; ++a) {
                const std::size_t s2 = next[s][a];
                const double q = reward[s][a] + (goal[s2] ? 0.0 : gamma * sol.v[s2]);
                sol.q[s][a] = q;
                best = std::max(best, q);
            }
            v_next[s] = best;
            delta = std::max(delta, std::abs(best - sol.v[s]));
        }
        sol.v.swap(v_next);
        if (delta < tolerance) {
            ++sol.sweeps;
            break;
        }
    }
    return sol;
}

std::vector<std::vector<Action>> greedy_action_sets(const GridEnv& env, const TabularSolution& solution,
                                                    double tie_tolerance) {
    std::vector<std::vector<Action>> sets(solution.q.size());
    for (std::size_t s = 0; s < solution.q.size(); ++s) {
        if (env.is_goal(env.cell_at(s))) continue;
        const double best = *std::max_element(solution.q[s].begin(), solution.q[s].end());
        for (std::size_t a = 0; a < kNumActions; ++a) {
            if (solution.q[s][a] >= best - tie_tolerance) sets[s].push_back(kAllActions[a]);
        }
    }
    return sets;
}

}  // namespace sgf
