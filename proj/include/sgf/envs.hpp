#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgf/common.hpp"

namespace sgf {

enum class EnvName { RingMaze, OpenTarget, UMaze };

std::string to_string(EnvName name);
EnvName parse_env_name(std::string_view text);

enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Noop = 4 };
inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions{Action::Up, Action::Down, Action::Left,
                                                             Action::Right, Action::Noop};

Action action_from_index(std::size_t index);
inline std::size_t action_index(Action a) { return static_cast<std::size_t>(a); }

enum class Encoding { NormalizedXy, OnehotCell };

std::string to_string(Encoding encoding);
Encoding parse_encoding(std::string_view text);

struct Cell {
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

struct StepResult {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
    /// True when the episode ended on a goal cell (as opposed to the step cap).
    bool reached_goal = false;
};

/// Deterministic grid world with a sparse terminal-only reward.
///
/// Moving into a wall or off the grid leaves the agent in place. Entering a
/// goal cell pays +1 and ends the episode; every other transition pays 0.
/// Episodes are also cut at `step_cap` steps.
class GridEnv {
public:
    /// Builds an env from rows of text: '#' wall, '.' free, 'S' spawn, 'G' goal.
    static GridEnv from_ascii(std::string name, const std::vector<std::string>& layout, std::size_t step_cap,
                              double gamma = 0.99, Encoding encoding = Encoding::NormalizedXy);

    /// Built-in layouts: ring_maze 21x21, open_target 15x15, u_maze 11x7.
    static GridEnv make(EnvName name, Encoding encoding = Encoding::NormalizedXy);
    static std::size_t default_step_cap(EnvName name);

    const std::string& name() const noexcept { return name_; }
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t step_cap() const noexcept { return step_cap_; }
    void set_step_cap(std::size_t cap);
    double gamma() const noexcept { return gamma_; }
    Encoding encoding() const noexcept { return encoding_; }
    std::size_t state_dim() const;

    bool in_bounds(Cell c) const noexcept;
    bool is_wall(Cell c) const noexcept;
    bool is_goal(Cell c) const noexcept;
    const std::vector<Cell>& spawn_cells() const noexcept { return spawn_; }
    const std::vector<Cell>& goal_cells() const noexcept { return goals_; }

    /// Samples the start state from the initial distribution.
    std::vector<double> reset(Rng& rng);
    std::vector<double> reset(std::uint64_t seed);
    /// Starts an episode from a specific cell (tests, exhaustive sweeps).
    std::vector<double> reset_to(Cell start);
    StepResult step(Action action);

    Cell position() const noexcept { return pos_; }
    bool done() const noexcept { return done_; }
    std::size_t elapsed() const noexcept { return elapsed_; }

    /// Pure transition function.
    Cell transition(Cell from, Action action) const noexcept;

    std::vector<double> encode(Cell c) const;
    Cell decode(std::span<const double> state) const;

    /// Number of cells reachable from the spawn set (goal cells included).
    std::size_t num_states() const noexcept { return reachable_.size(); }
    std::size_t tabular_index(Cell c) const;
    std::size_t tabular_index(std::span<const double> state) const { return tabular_index(decode(state)); }
    Cell cell_at(std::size_t index) const { return reachable_.at(index); }
    bool is_reachable(Cell c) const noexcept;

    /// Shortest number of steps from each reachable cell to a goal (index order), -1 if none.
    const std::vector<int>& goal_distances() const noexcept { return goal_dist_; }
    int goal_distance(Cell c) const { return goal_dist_[tabular_index(c)]; }
    /// Actions that strictly decrease the goal distance from `c`.
    std::vector<Action> shortest_path_actions(Cell c) const;

    std::string ascii() const;

    /// Process-wide count of step() calls, for instrumentation.
    static std::uint64_t total_steps() noexcept;

private:
    GridEnv() = default;
    std::size_t flat(Cell c) const noexcept { return static_cast<std::size_t>(c.row * cols_ + c.col); }
    void finalize();

    std::string name_;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<char> wall_;
    std::vector<char> goal_;
    std::vector<Cell> goals_;
    std::vector<Cell> spawn_;
    std::size_t step_cap_ = 0;
    double gamma_ = 0.99;
    Encoding encoding_ = Encoding::NormalizedXy;

    std::vector<Cell> reachable_;
    std::vector<long> index_of_;  // flat cell -> tabular index, -1 when unreachable
    std::vector<int> goal_dist_;

    Cell pos_{};
    bool done_ = true;
    std::size_t elapsed_ = 0;
};

}  // namespace sgf
