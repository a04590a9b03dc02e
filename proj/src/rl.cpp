#include "sgf/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

namespace sgf {

Policy Policy::create(std::size_t state_dim, std::uint64_t seed, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> dims{state_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    std::vector<std::size_t> actor_dims = dims;
    actor_dims.push_back(kNumActions);
    dims.push_back(1);
    return {Mlp::xavier(actor_dims, OutputHead::Softmax, derive_seed(seed, 0)),
            Mlp::xavier(dims, OutputHead::Linear, derive_seed(seed, 1))};
}

Action Policy::greedy(std::span<const double> state) const {
    const std::vector<double> p = action_probs(state);
    return action_from_index(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
}

Action Policy::sample(std::span<const double> state, Rng& rng) const {
    const std::vector<double> p = action_probs(state);
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc) return action_from_index(k);
    }
    return action_from_index(p.size() - 1);
}

void save_policy(const Policy& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "POLICYCKPT v1\n";
    save_mlp(policy.actor, out);
    save_mlp(policy.critic, out);
}

Policy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string header;
    std::getline(in, header);
    if (header != "POLICYCKPT v1") throw ParseError("missing 'POLICYCKPT v1' header", 1);
    Policy p;
    p.actor = load_mlp(in);
    p.critic = load_mlp(in);
    if (p.actor.output_dim() != kNumActions || p.actor.head() != OutputHead::Softmax) {
        throw ContractError("policy checkpoint actor must be a softmax over 5 actions");
    }
    return p;
}

PretrainReport pretrain(const Policy& policy, const TrajectorySet& set, const PretrainConfig& config) {
    if (set.empty()) throw ContractError("cannot pretrain on an empty trajectory set");
    if (set.state_dim() != policy.actor.input_dim()) throw ShapeError("policy input does not match the demonstrations");
    std::vector<std::vector<double>> inputs;
    std::vector<Loss> losses;
    inputs.reserve(set.total_states());
    for (const Trajectory& t : set.trajectories()) {
        for (const TrajectoryStep& s : t.steps) {
            inputs.push_back(s.state);
            losses.emplace_back(CrossEntropyLoss{action_index(s.action)});
        }
    }
    PretrainReport report;
    report.policy = policy;
    GradientStep step;
    step.learning_rate = config.learning_rate;
    Rng rng(derive_seed(config.seed, 0));
    report.loss_history = fit_minibatch(report.policy.actor, inputs, losses, config.epochs, config.batch_size, step, rng);
    std::size_t correct = 0;
    for (const Trajectory& t : set.trajectories()) {
        for (const TrajectoryStep& s : t.steps) correct += report.policy.greedy(s.state) == s.action;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(set.total_states());
    return report;
}

std::vector<double> warm_start_critic(Policy& policy, const TrajectorySet& set, const ShapingPotential& shaping,
                                      double gamma, const CriticWarmStartConfig& config) {
    if (config.epochs == 0) return {};
    if (set.empty()) throw ContractError("cannot warm-start the critic on an empty trajectory set");
    if (set.state_dim() != policy.critic.input_dim()) throw ShapeError("critic input does not match the demonstrations");
    std::vector<std::vector<double>> inputs;
    std::vector<Loss> losses;
    inputs.reserve(set.total_states());
    for (const Trajectory& t : set.trajectories()) {
        const std::size_t n = t.steps.size();
        for (std::size_t i = 0; i < n; ++i) {
            inputs.push_back(t.steps[i].state);
            losses.emplace_back(
                MseLoss{{monte_carlo_target(n, i, gamma) - shaping.potential(t.steps[i].state)}});
        }
    }
    GradientStep step;
    step.learning_rate = config.learning_rate;
    Rng rng(derive_seed(config.seed, 0));
    return fit_minibatch(policy.critic, inputs, losses, config.epochs, config.batch_size, step, rng);
}

void TrainConfig::validate() const {
    auto check = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    check(total_env_steps > 0, "total_env_steps must be positive");
    check(rollout_length > 0, "rollout_length must be positive");
    check(num_envs > 0, "num_envs must be positive");
    check(std::isfinite(entropy_coef) && entropy_coef >= 0.0, "entropy_coef must be finite and non-negative");
    check(std::isfinite(value_coef) && value_coef >= 0.0, "value_coef must be finite and non-negative");
    check(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be finite and positive");
    check(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    check(std::isfinite(max_grad_norm) && max_grad_norm >= 0.0, "max_grad_norm must be finite and non-negative");
    check(eval_interval > 0, "eval_interval must be positive");
    check(eval_episodes > 0, "eval_episodes must be positive");
    check(workers > 0, "workers must be positive");
}

EvalResult evaluate(const Policy& policy, const GridEnv& env_in, std::size_t episodes, std::uint64_t seed,
                    bool greedy) {
    if (episodes == 0) throw ContractError("evaluation needs at least one episode");
    GridEnv env = env_in;
    Rng rng(seed);
    std::vector<double> returns;
    returns.reserve(episodes);
    EvalResult res;
    res.episodes = episodes;
    double successes = 0.0;
    double length = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        std::vector<double> state = env.reset(rng);
        double ret = 0.0;
        double discount = 1.0;
        while (!env.done()) {
            const Action a = greedy ? policy.greedy(state) : policy.sample(state, rng);
            StepResult step = env.step(a);
            ret += discount * step.reward;
            discount *= env.gamma();
            state = std::move(step.state);
            if (step.reached_goal) successes += 1.0;
        }
        length += static_cast<double>(env.elapsed());
        returns.push_back(ret);
    }
    double sum = 0.0;
    for (double r : returns) sum += r;
    res.mean_return = sum / static_cast<double>(episodes);
    double var = 0.0;
    for (double r : returns) var += (r - res.mean_return) * (r - res.mean_return);
    res.return_std = std::sqrt(var / static_cast<double>(episodes));
    res.success_rate = successes / static_cast<double>(episodes);
    res.mean_length = length / static_cast<double>(episodes);
    return res;
}

namespace {

// One rollout slot: a private env instance with its own RNG.
struct Worker {
    GridEnv env;
    Rng rng;
    std::size_t state_index = 0;
};

struct RolloutStep {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;  // shaped
    std::size_t next_state = 0;
    bool terminal = false;
    bool truncated = false;
};

}  // namespace

TrainResult train_a2c(const Policy& policy, const GridEnv& env, const ShapingPotential& shaping,
                      const TrainConfig& config) {
    config.validate();
    if (policy.actor.input_dim() != env.state_dim()) throw ShapeError("policy input does not match the env encoding");

    const std::size_t n_states = env.num_states();
    std::vector<std::vector<double>> encoded(n_states);
    for (std::size_t i = 0; i < n_states; ++i) encoded[i] = env.encode(env.cell_at(i));
    const std::vector<double> phi = shaping.potential_table(env);
    const double gamma = config.gamma;

    std::vector<Worker> workers;
    workers.reserve(config.num_envs);
    for (std::size_t k = 0; k < config.num_envs; ++k) {
        Worker w{env, Rng(derive_seed(config.seed, 100 + k)), 0};
        w.env.reset(w.rng);
        w.state_index = env.tabular_index(w.env.position());
        workers.push_back(std::move(w));
    }

    TrainResult result;
    result.policy = policy;
    Policy& current = result.policy;
    GradientStep actor_step;
    actor_step.learning_rate = config.learning_rate;
    GradientStep critic_step;
    critic_step.learning_rate = config.learning_rate;
    const std::uint64_t eval_seed = derive_seed(config.seed, 7);

    auto record = [&](std::size_t steps) {
        const EvalResult ev = evaluate(current, env, config.eval_episodes, eval_seed, true);
        result.curve.push_back({steps, ev.mean_return, ev.success_rate});
    };
    record(0);

    const std::size_t T = config.rollout_length;
    const std::size_t K = config.num_envs;
    std::vector<std::vector<RolloutStep>> rollouts(K, std::vector<RolloutStep>(T));

    auto collect = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            Worker& w = workers[k];
            for (std::size_t t = 0; t < T; ++t) {
                RolloutStep& rs = rollouts[k][t];
                rs.state = w.state_index;
                rs.action = action_index(current.sample(encoded[rs.state], w.rng));
                const StepResult sr = w.env.step(kAllActions[rs.action]);
                rs.next_state = env.tabular_index(w.env.position());
                rs.terminal = sr.reached_goal;
                rs.truncated = sr.done && !sr.reached_goal;
                const double next_phi = rs.terminal ? 0.0 : phi[rs.next_state];
                rs.reward = sr.reward + gamma * next_phi - phi[rs.state];
                if (sr.done) {
                    w.env.reset(w.rng);
                    w.state_index = env.tabular_index(w.env.position());
                } else {
                    w.state_index = rs.next_state;
                }
            }
        }
    };

    std::size_t steps_done = 0;
    std::size_t next_eval = config.eval_interval;
    Gradients actor_grad(current.actor);
    Gradients critic_grad(current.critic);
    std::vector<Loss> actor_losses;
    std::vector<double> returns(T);

    while (steps_done < config.total_env_steps) {
        const std::size_t n_threads = std::min(config.workers, K);
        if (n_threads <= 1) {
            collect(0, K);
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (K + n_threads - 1) / n_threads;
            for (std::size_t b = 0; b < K; b += chunk) pool.emplace_back(collect, b, std::min(K, b + chunk));
            for (auto& th : pool) th.join();
        }
        steps_done += T * K;

        // n-step returns, bootstrapped from the critic at the rollout end and
        // at step-cap truncations; terminal transitions do not bootstrap.
        actor_grad.zero();
        critic_grad.zero();
        const double scale = 1.0 / static_cast<double>(T * K);
        bool finite = true;
        double loss_sum = 0.0;
        for (std::size_t k = 0; k < K && finite; ++k) {
            const auto& ro = rollouts[k];
            double ret = current.value(encoded[ro[T - 1].next_state]);
            for (std::size_t t = T; t-- > 0;) {
                const RolloutStep& rs = ro[t];
                if (rs.terminal) ret = rs.reward;
                else if (rs.truncated) ret = rs.reward + gamma * current.value(encoded[rs.next_state]);
                else ret = rs.reward + gamma * ret;
                returns[t] = ret;
            }
            for (std::size_t t = 0; t < T; ++t) {
                const RolloutStep& rs = ro[t];
                const auto& x = encoded[rs.state];
                const double v = current.value(x);
                const double advantage = returns[t] - v;
                loss_sum += accumulate_gradient(current.actor, x,
                                                PolicyGradientLoss{rs.action, advantage, config.entropy_coef},
                                                actor_grad, scale);
                loss_sum += config.value_coef *
                            accumulate_gradient(current.critic, x, MseLoss{{returns[t]}}, critic_grad,
                                                scale * config.value_coef);
                if (!std::isfinite(loss_sum)) finite = false;
            }
        }
        if (!finite) {
            result.aborted = true;
            result.abort_reason = "non-finite loss after " + std::to_string(steps_done) + " env steps";
            break;
        }
        clip_gradient_norm(actor_grad, config.max_grad_norm);
        clip_gradient_norm(critic_grad, config.max_grad_norm);
        try {
            Policy next{apply_step(current.actor, actor_grad, actor_step),
                        apply_step(current.critic, critic_grad, critic_step)};
            current = std::move(next);
        } catch (const NumericError& e) {
            result.aborted = true;
            result.abort_reason = e.what();
            break;
        }

        while (steps_done >= next_eval && next_eval <= config.total_env_steps) {
            record(next_eval);
            next_eval += config.eval_interval;
        }
    }
    if (!result.aborted && (result.curve.empty() || result.curve.back().env_steps != config.total_env_steps)) {
        record(std::min(steps_done, config.total_env_steps));
    }
    return result;
}

QTable train_tabular_q(const GridEnv& env_in, std::span<const double> potential, const TabularQConfig& config) {
    GridEnv env = env_in;
    const std::size_t n = env.num_states();
    if (!potential.empty() && potential.size() != n) throw ShapeError("potential table does not cover every state");
    auto phi = [&](std::size_t s) { return potential.empty() ? 0.0 : potential[s]; };
    QTable q(n, std::array<double, kNumActions>{});
    Rng rng(config.seed);
    const double gamma = env.gamma();
    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
        env.reset(rng);
        std::size_t s = env.tabular_index(env.position());
        while (!env.done()) {
            std::size_t a;
            if (uniform01(rng) < config.epsilon) {
                a = uniform_index(rng, kNumActions);
            } else {
                a = static_cast<std::size_t>(std::max_element(q[s].begin(), q[s].end()) - q[s].begin());
            }
            const StepResult sr = env.step(kAllActions[a]);
            const std::size_t s2 = env.tabular_index(env.position());
            const double r = sr.reward + (sr.reached_goal ? 0.0 : gamma * phi(s2)) - phi(s);
            const double target =
                sr.reached_goal ? r : r + gamma * *std::max_element(q[s2].begin(), q[s2].end());
            q[s][a] += config.alpha * (target - q[s][a]);
            s = s2;
        }
    }
    return q;
}

QTable train_tabular_q(const GridEnv& env, const ShapingPotential& shaping, const TabularQConfig& config) {
    const std::vector<double> table = shaping.potential_table(env);
    return train_tabular_q(env, table, config);
}

std::vector<Action> greedy_actions(const QTable& q) {
    std::vector<Action> out;
    out.reserve(q.size());
    for (const auto& row : q) {
        out.push_back(action_from_index(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())));
    }
    return out;
}

}  // namespace sgf
