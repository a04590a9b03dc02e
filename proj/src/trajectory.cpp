#include "sgf/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sgf {

void TrajectorySet::add(Trajectory trajectory) {
    if (trajectory.steps.empty()) throw ContractError("trajectory " + std::to_string(trajectory.episode_id) + " is empty");
    if (!trajectory.terminal_reached) {
        throw ContractError("trajectory " + std::to_string(trajectory.episode_id) +
                            " does not reach a terminal state and cannot be admitted");
    }
    if (state_dim_ == 0) state_dim_ = trajectory.steps.front().state.size();
    for (const TrajectoryStep& s : trajectory.steps) {
        if (s.state.size() != state_dim_) {
            throw ShapeError("trajectory " + std::to_string(trajectory.episode_id) + " has a state of dimension " +
                             std::to_string(s.state.size()) + ", set uses " + std::to_string(state_dim_));
        }
    }
    total_states_ += trajectory.steps.size();
    trajectories_.push_back(std::move(trajectory));
}

double TrajectorySet::mean_return(double gamma) const {
    if (trajectories_.empty()) return 0.0;
    double sum = 0.0;
    for (const Trajectory& t : trajectories_) sum += std::pow(gamma, static_cast<double>(t.size() - 1));
    return sum / static_cast<double>(trajectories_.size());
}

double TrajectorySet::mean_length() const {
    if (trajectories_.empty()) return 0.0;
    return static_cast<double>(total_states_) / static_cast<double>(trajectories_.size());
}

TrajectorySet generate_expert(const GridEnv& env_in, const ExpertConfig& config, std::size_t count,
                              std::uint64_t seed) {
    if (count == 0) throw ContractError("expert count must be at least 1");
    if (config.p_random < 0.0 || config.p_random > 1.0) throw ContractError("p_random must lie in [0, 1]");
    GridEnv env = env_in;
    Rng rng(seed);
    TrajectorySet set(env.state_dim());
    for (std::size_t episode = 0; episode < count; ++episode) {
        bool admitted = false;
        for (std::size_t attempt = 0; attempt <= config.max_retries && !admitted; ++attempt) {
            env.reset(rng);
            const Cell start = env.position();
            const auto optimal = static_cast<double>(env.goal_distance(start));
            env.set_step_cap(static_cast<std::size_t>(std::max(1.0, std::ceil(config.cap_factor * optimal))));
            Trajectory traj;
            traj.episode_id = static_cast<long>(episode);
            while (!env.done()) {
                const Cell here = env.position();
                Action a;
                if (uniform01(rng) < config.p_random) {
                    a = action_from_index(uniform_index(rng, kNumActions));
                } else {
                    const std::vector<Action> best = env.shortest_path_actions(here);
                    a = best[uniform_index(rng, best.size())];
                }
                traj.steps.push_back({env.encode(here), a});
                const StepResult res = env.step(a);
                traj.terminal_reached = res.reached_goal;
            }
            if (traj.terminal_reached) {
                set.add(std::move(traj));
                admitted = true;
            }
        }
        if (!admitted) {
            throw GenerationError("expert episode " + std::to_string(episode) + " exceeded its step cap on all " +
                                  std::to_string(config.max_retries + 1) + " attempts (seed " +
                                  std::to_string(seed) + ")");
        }
    }
    return set;
}

bool starts_in_initial_distribution(const TrajectorySet& set, const GridEnv& env) {
    for (const Trajectory& t : set.trajectories()) {
        const Cell start = env.decode(t.steps.front().state);
        const auto& spawn = env.spawn_cells();
        if (std::find(spawn.begin(), spawn.end(), start) == spawn.end()) return false;
    }
    return true;
}

void save_trajectories(const TrajectorySet& set, std::ostream& out) {
    out << "state_dim," << set.state_dim() << '\n';
    for (const Trajectory& t : set.trajectories()) {
        for (std::size_t i = 0; i < t.steps.size(); ++i) {
            out << t.episode_id << ',' << i;
            for (double v : t.steps[i].state) out << ',' << format_double(v);
            out << ',' << action_index(t.steps[i].action) << '\n';
        }
    }
}

TrajectorySet load_trajectories(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::size_t state_dim = 0;
    // Header.
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string prefix = "state_dim,";
        if (line.rfind(prefix, 0) != 0) throw ParseError("expected 'state_dim,<d>' header", lineno);
        try {
            const long d = std::stol(line.substr(prefix.size()));
            if (d <= 0) throw std::invalid_argument("non-positive");
            state_dim = static_cast<std::size_t>(d);
        } catch (const std::exception&) {
            throw ParseError("invalid state_dim", lineno);
        }
        break;
    }
    if (state_dim == 0) throw ParseError("missing header", lineno + 1);

    TrajectorySet set(state_dim);
    Trajectory current;
    bool open = false;
    auto flush = [&]() {
        if (!open) return;
        current.terminal_reached = true;
        set.add(std::move(current));
        current = Trajectory{};
        open = false;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (fields.size() != state_dim + 3) {
            throw ParseError("expected " + std::to_string(state_dim + 3) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno);
        }
        long episode = 0;
        long t = 0;
        long action = 0;
        std::vector<double> state(state_dim);
        try {
            std::size_t used = 0;
            episode = std::stol(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("episode");
            t = std::stol(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("t");
            for (std::size_t k = 0; k < state_dim; ++k) state[k] = parse_double(fields[2 + k]);
            action = std::stol(fields.back(), &used);
            if (used != fields.back().size()) throw std::invalid_argument("action");
        } catch (const std::exception&) {
            throw ParseError("malformed record '" + line + "'", lineno);
        }
        if (action < 0 || action >= static_cast<long>(kNumActions)) throw ParseError("action out of range", lineno);
        if (!open || episode != current.episode_id) {
            flush();
            if (t != 0) throw ParseError("episode " + std::to_string(episode) + " does not start at t=0", lineno);
            for (const Trajectory& prev : set.trajectories()) {
                if (prev.episode_id == episode) {
                    throw ParseError("episode " + std::to_string(episode) + " appears twice", lineno);
                }
            }
            current.episode_id = episode;
            open = true;
        } else if (t != static_cast<long>(current.steps.size())) {
            throw ParseError("non-consecutive t in episode " + std::to_string(episode), lineno);
        }
        current.steps.push_back({std::move(state), static_cast<Action>(action)});
    }
    flush();
    return set;
}

void save_trajectories(const TrajectorySet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save_trajectories(set, out);
}

TrajectorySet load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return load_trajectories(in);
}

}  // namespace sgf
