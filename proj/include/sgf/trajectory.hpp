#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgf/envs.hpp"

namespace sgf {

struct TrajectoryStep {
    std::vector<double> state;
    Action action = Action::Noop;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

/// One expert episode, start to terminal. The terminal state itself is not
/// stored: it has no action attached.
struct Trajectory {
    long episode_id = 0;
    std::vector<TrajectoryStep> steps;
    bool terminal_reached = false;

    std::size_t size() const noexcept { return steps.size(); }
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// The demonstration set. Immutable once built; only terminal-reaching,
/// non-empty trajectories of a consistent state dimension are admitted.
class TrajectorySet {
public:
    explicit TrajectorySet(std::size_t state_dim = 0) : state_dim_(state_dim) {}

    /// Throws ContractError if the trajectory violates the admission rules.
    void add(Trajectory trajectory);

    const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
    const Trajectory& operator[](std::size_t i) const { return trajectories_.at(i); }
    std::size_t size() const noexcept { return trajectories_.size(); }
    bool empty() const noexcept { return trajectories_.empty(); }
    std::size_t state_dim() const noexcept { return state_dim_; }
    /// N, the total number of states over all trajectories.
    std::size_t total_states() const noexcept { return total_states_; }

    /// Mean discounted sparse return of the demonstrations: gamma^(n_i - 1)
    /// for a trajectory of n_i steps whose last action enters the goal.
    double mean_return(double gamma) const;
    double mean_length() const;

    friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;

private:
    std::size_t state_dim_;
    std::size_t total_states_ = 0;
    std::vector<Trajectory> trajectories_;
};

struct ExpertConfig {
    /// Probability of replacing the shortest-path action by a uniformly random one.
    double p_random = 0.0;
    /// Episodes longer than cap_factor * (optimal length from the start) are resampled.
    double cap_factor = 8.0;
    std::size_t max_retries = 200;
};

/// Scripted search expert. With p_random == 0 it follows a shortest path,
/// breaking ties uniformly at random.
TrajectorySet generate_expert(const GridEnv& env, const ExpertConfig& config, std::size_t count,
                              std::uint64_t seed);

/// True when every trajectory starts on one of the env's spawn cells.
bool starts_in_initial_distribution(const TrajectorySet& set, const GridEnv& env);

void save_trajectories(const TrajectorySet& set, std::ostream& out);
TrajectorySet load_trajectories(std::istream& in);
void save_trajectories(const TrajectorySet& set, const std::string& path);
TrajectorySet load_trajectories(const std::string& path);

}  // namespace sgf
