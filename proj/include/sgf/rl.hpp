#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sgf/approximator.hpp"
#include "sgf/envs.hpp"
#include "sgf/shaping.hpp"
#include "sgf/trajectory.hpp"

namespace sgf {

/// Softmax actor over the five grid actions plus a scalar critic.
struct Policy {
    Mlp actor;
    Mlp critic;

    static Policy create(std::size_t state_dim, std::uint64_t seed, const std::vector<std::size_t>& hidden = {64, 64});

    std::vector<double> action_probs(std::span<const double> state) const { return actor.forward(state); }
    /// Argmax action, lowest index on ties.
    Action greedy(std::span<const double> state) const;
    Action sample(std::span<const double> state, Rng& rng) const;
    double value(std::span<const double> state) const { return critic.forward(state)[0]; }

    friend bool operator==(const Policy&, const Policy&) = default;
};

void save_policy(const Policy& policy, const std::string& path);
Policy load_policy(const std::string& path);

struct PretrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct PretrainReport {
    Policy policy;
    /// Fraction of demonstrated states where the greedy action equals the expert's.
    double accuracy = 0.0;
    std::vector<double> loss_history;
};

/// Behaviour cloning: cross-entropy between the actor and the expert actions.
/// Touches no environment.
PretrainReport pretrain(const Policy& policy, const TrajectorySet& set, const PretrainConfig& config);

struct CriticWarmStartConfig {
    /// 0 leaves the critic untouched.
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

/// Regresses the critic onto the shaped Monte-Carlo return of every
/// demonstrated state, gamma^(n_i - t) - phi(s_t). The actor is unchanged and
/// no environment is touched. Returns the per-epoch losses.
std::vector<double> warm_start_critic(Policy& policy, const TrajectorySet& set, const ShapingPotential& shaping,
                                      double gamma, const CriticWarmStartConfig& config);

struct TrainConfig {
    std::size_t total_env_steps = 500000;
    std::size_t rollout_length = 8;
    std::size_t num_envs = 16;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double learning_rate = 3e-4;
    double gamma = 0.99;
    double max_grad_norm = 0.5;
    std::size_t eval_interval = 25000;
    std::size_t eval_episodes = 20;
    std::uint64_t seed = 0;
    /// Threads used for rollout collection. Results do not depend on it.
    std::size_t workers = 1;

    void validate() const;
};

struct CurvePoint {
    std::size_t env_steps = 0;
    double mean_return = 0.0;
    double success_rate = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct TrainResult {
    Policy policy;
    std::vector<CurvePoint> curve;
    bool aborted = false;
    std::string abort_reason;
};

/// Synchronous n-step advantage actor-critic on the shaped reward. The
/// learning curve is always measured on the env's original sparse reward.
/// A non-finite loss stops training and returns the last good parameters.
TrainResult train_a2c(const Policy& policy, const GridEnv& env, const ShapingPotential& shaping,
                      const TrainConfig& config);

struct EvalResult {
    /// Mean discounted sparse return, gamma^(T-1) for an episode solved in T steps.
    double mean_return = 0.0;
    double return_std = 0.0;
    double success_rate = 0.0;
    double mean_length = 0.0;
    std::size_t episodes = 0;
};

/// Runs `episodes` episodes with the argmax action (or sampled actions when
/// greedy is false) and reports sparse-reward statistics.
EvalResult evaluate(const Policy& policy, const GridEnv& env, std::size_t episodes, std::uint64_t seed,
                    bool greedy = true);

struct TabularQConfig {
    std::size_t episodes = 2000;
    double alpha = 0.5;
    double epsilon = 0.1;
    std::uint64_t seed = 0;
};

using QTable = std::vector<std::array<double, kNumActions>>;

/// Epsilon-greedy Q-learning over tabular indices with the potential-based
/// reward built from `potential` (tabular-indexed, empty for none).
QTable train_tabular_q(const GridEnv& env, std::span<const double> potential, const TabularQConfig& config);
QTable train_tabular_q(const GridEnv& env, const ShapingPotential& shaping, const TabularQConfig& config);

/// Argmax action of every row, lowest index on ties.
std::vector<Action> greedy_actions(const QTable& q);

}  // namespace sgf
