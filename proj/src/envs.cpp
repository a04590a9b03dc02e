#include "sgf/envs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <numbers>

namespace sgf {

namespace {

std::atomic<std::uint64_t> g_total_steps{0};

// Concentric square rings around a goal chamber. Walls sit at Chebyshev
// distance 10 (border), 8, 6, 4, 2 from the center; each inner wall has one
// gap, alternating top and bottom so every ring must be traversed halfway.
std::vector<std::string> ring_maze_layout() {
    constexpr int n = 21;
    constexpr int mid = 10;
    std::vector<std::string> rows(n, std::string(n, '.'));
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const int d = std::max(std::abs(r - mid), std::abs(c - mid));
            char& ch = rows[r][c];
            if (d == 10 || d == 8 || d == 6 || d == 4 || d == 2) ch = '#';
            else if (d <= 1) ch = 'G';
            else if (d == 9) ch = 'S';
        }
    }
    rows[mid - 8][mid] = '.';
    rows[mid + 6][mid] = '.';
    rows[mid - 4][mid] = '.';
    rows[mid + 2][mid] = '.';
    return rows;
}

// Open field with the goal at the center; spawns lie on a 45-degree arc of
// radius ~6 in the north-east octant.
std::vector<std::string> open_target_layout() {
    constexpr int n = 15;
    constexpr int mid = 7;
    std::vector<std::string> rows(n, std::string(n, '.'));
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double dx = c - mid;
            const double dy = mid - r;
            const double radius = std::hypot(dx, dy);
            const double angle = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
            if (radius >= 5.5 && radius <= 7.0 && angle >= 0.0 && angle <= 45.0) rows[r][c] = 'S';
        }
    }
    rows[mid][mid] = 'G';
    return rows;
}

// U-shaped corridor: entrance at the top of the left arm, goal at the top of
// the right arm, arms joined below the central spine.
std::vector<std::string> u_maze_layout() {
    return {
        ".S.#.G.",  //
        "...#...",  //
        "...#...",  //
        "...#...",  //
        "...#...",  //
        "...#...",  //
        "...#...",  //
        "...#...",  //
        ".......",  //
        ".......",  //
        ".......",  //
    };
}

}  // namespace

std::string to_string(EnvName name) {
    switch (name) {
        case EnvName::RingMaze: return "ring_maze";
        case EnvName::OpenTarget: return "open_target";
        case EnvName::UMaze: return "u_maze";
    }
    return "?";
}

EnvName parse_env_name(std::string_view text) {
    if (text == "ring_maze") return EnvName::RingMaze;
    if (text == "open_target") return EnvName::OpenTarget;
    if (text == "u_maze") return EnvName::UMaze;
    throw ConfigError("unknown env '" + std::string(text) + "' (expected ring_maze, open_target or u_maze)");
}

Action action_from_index(std::size_t index) {
    if (index >= kNumActions) throw ContractError("action index " + std::to_string(index) + " out of range");
    return static_cast<Action>(index);
}

std::string to_string(Encoding encoding) {
    return encoding == Encoding::OnehotCell ? "onehot_cell" : "normalized_xy";
}

Encoding parse_encoding(std::string_view text) {
    if (text == "normalized_xy") return Encoding::NormalizedXy;
    if (text == "onehot_cell") return Encoding::OnehotCell;
    throw ConfigError("unknown encoding '" + std::string(text) + "'");
}

GridEnv GridEnv::from_ascii(std::string name, const std::vector<std::string>& layout, std::size_t step_cap,
                            double gamma, Encoding encoding) {
    if (layout.empty() || layout.front().empty()) throw ContractError("empty layout");
    if (gamma < 0.0 || gamma > 1.0) throw ContractError("gamma must lie in [0, 1]");
    if (step_cap == 0) throw ContractError("step cap must be positive");
    GridEnv env;
    env.name_ = std::move(name);
    env.rows_ = static_cast<int>(layout.size());
    env.cols_ = static_cast<int>(layout.front().size());
    env.wall_.assign(static_cast<std::size_t>(env.rows_ * env.cols_), 0);
    env.goal_.assign(env.wall_.size(), 0);
    env.step_cap_ = step_cap;
    env.gamma_ = gamma;
    env.encoding_ = encoding;
    for (int r = 0; r < env.rows_; ++r) {
        if (static_cast<int>(layout[r].size()) != env.cols_) throw ContractError("ragged layout");
        for (int c = 0; c < env.cols_; ++c) {
            const Cell cell{r, c};
            switch (layout[r][c]) {
                case '#': env.wall_[env.flat(cell)] = 1; break;
                case 'G':
                    env.goal_[env.flat(cell)] = 1;
                    env.goals_.push_back(cell);
                    break;
                case 'S': env.spawn_.push_back(cell); break;
                case '.': break;
                default: throw ContractError(std::string("unknown layout character '") + layout[r][c] + "'");
            }
        }
    }
    if (env.spawn_.empty()) throw ContractError("layout has no spawn cell");
    if (env.goals_.empty()) throw ContractError("layout has no goal cell");
    env.finalize();
    return env;
}

std::size_t GridEnv::default_step_cap(EnvName name) {
    switch (name) {
        case EnvName::RingMaze: return 300;
        case EnvName::OpenTarget: return 60;
        case EnvName::UMaze: return 60;
    }
    return 100;
}

GridEnv GridEnv::make(EnvName name, Encoding encoding) {
    switch (name) {
        case EnvName::RingMaze:
            return from_ascii("ring_maze", ring_maze_layout(), default_step_cap(name), 0.99, encoding);
        case EnvName::OpenTarget:
            return from_ascii("open_target", open_target_layout(), default_step_cap(name), 0.99, encoding);
        case EnvName::UMaze:
            return from_ascii("u_maze", u_maze_layout(), default_step_cap(name), 0.99, encoding);
    }
    throw ContractError("unknown env");
}

void GridEnv::finalize() {
    // Reachability from the spawn set.
    index_of_.assign(wall_.size(), -1);
    std::vector<char> seen(wall_.size(), 0);
    std::deque<Cell> queue;
    for (Cell s : spawn_) {
        if (is_wall(s)) throw ContractError("spawn cell inside a wall");
        if (!seen[flat(s)]) {
            seen[flat(s)] = 1;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        if (is_goal(c)) continue;  // episodes end on goal cells
        for (Action a : kAllActions) {
            const Cell n = transition(c, a);
            if (!seen[flat(n)]) {
                seen[flat(n)] = 1;
                queue.push_back(n);
            }
        }
    }
    reachable_.clear();
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            if (seen[flat({r, c})]) {
                index_of_[flat({r, c})] = static_cast<long>(reachable_.size());
                reachable_.push_back({r, c});
            }
        }
    }

    // Reverse BFS from the goal set. Transitions are symmetric on grids, so
    // a forward neighbor sweep over reachable cells is enough.
    goal_dist_.assign(reachable_.size(), -1);
    for (Cell g : goals_) {
        if (is_reachable(g)) {
            goal_dist_[tabular_index(g)] = 0;
            queue.push_back(g);
        }
    }
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        const int d = goal_dist_[tabular_index(c)];
        for (Action a : kAllActions) {
            const Cell n = transition(c, a);
            if (!is_reachable(n) || is_goal(n)) continue;
            // n -> c must be a legal move; on a grid with unit moves it is.
            if (goal_dist_[tabular_index(n)] == -1) {
                goal_dist_[tabular_index(n)] = d + 1;
                queue.push_back(n);
            }
        }
    }
    for (Cell s : spawn_) {
        if (goal_dist_[tabular_index(s)] < 0) {
            throw ContractError(name_ + ": spawn cell (" + std::to_string(s.row) + "," + std::to_string(s.col) +
                                ") cannot reach a goal");
        }
    }
}

void GridEnv::set_step_cap(std::size_t cap) {
    if (cap == 0) throw ContractError("step cap must be positive");
    step_cap_ = cap;
}

std::size_t GridEnv::state_dim() const { return encoding_ == Encoding::OnehotCell ? reachable_.size() : 2; }

bool GridEnv::in_bounds(Cell c) const noexcept { return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_; }

bool GridEnv::is_wall(Cell c) const noexcept { return !in_bounds(c) || wall_[flat(c)] != 0; }

bool GridEnv::is_goal(Cell c) const noexcept { return in_bounds(c) && goal_[flat(c)] != 0; }

bool GridEnv::is_reachable(Cell c) const noexcept { return in_bounds(c) && index_of_[flat(c)] >= 0; }

std::vector<double> GridEnv::reset(Rng& rng) { return reset_to(spawn_[uniform_index(rng, spawn_.size())]); }

std::vector<double> GridEnv::reset(std::uint64_t seed) {
    Rng rng(seed);
    return reset(rng);
}

std::vector<double> GridEnv::reset_to(Cell start) {
    if (!is_reachable(start) || is_goal(start)) throw ContractError("start cell must be a reachable non-goal cell");
    pos_ = start;
    done_ = false;
    elapsed_ = 0;
    return encode(pos_);
}

StepResult GridEnv::step(Action action) {
    if (done_) throw ContractError("step() called on a finished episode; call reset() first");
    if (action_index(action) >= kNumActions) throw ContractError("invalid action");
    g_total_steps.fetch_add(1, std::memory_order_relaxed);
    pos_ = transition(pos_, action);
    ++elapsed_;
    StepResult res;
    res.reached_goal = is_goal(pos_);
    res.reward = res.reached_goal ? 1.0 : 0.0;
    done_ = res.reached_goal || elapsed_ >= step_cap_;
    res.done = done_;
    res.state = encode(pos_);
    return res;
}

Cell GridEnv::transition(Cell from, Action action) const noexcept {
    Cell to = from;
    switch (action) {
        case Action::Up: --to.row; break;
        case Action::Down: ++to.row; break;
        case Action::Left: --to.col; break;
        case Action::Right: ++to.col; break;
        case Action::Noop: break;
    }
    return is_wall(to) ? from : to;
}

std::vector<double> GridEnv::encode(Cell c) const {
    if (encoding_ == Encoding::OnehotCell) {
        std::vector<double> v(reachable_.size(), 0.0);
        v[tabular_index(c)] = 1.0;
        return v;
    }
    const double x = cols_ > 1 ? static_cast<double>(c.col) / (cols_ - 1) : 0.0;
    const double y = rows_ > 1 ? static_cast<double>(c.row) / (rows_ - 1) : 0.0;
    return {x, y};
}

Cell GridEnv::decode(std::span<const double> state) const {
    if (state.size() != state_dim()) {
        throw ShapeError("state has " + std::to_string(state.size()) + " entries, env encodes " +
                         std::to_string(state_dim()));
    }
    if (encoding_ == Encoding::OnehotCell) {
        const auto it = std::max_element(state.begin(), state.end());
        return reachable_[static_cast<std::size_t>(it - state.begin())];
    }
    const Cell c{static_cast<int>(std::lround(state[1] * (rows_ - 1))),
                 static_cast<int>(std::lround(state[0] * (cols_ - 1)))};
    if (!in_bounds(c)) throw ContractError("decoded state lies outside the grid");
    return c;
}

std::size_t GridEnv::tabular_index(Cell c) const {
    if (!is_reachable(c)) {
        throw ContractError("cell (" + std::to_string(c.row) + "," + std::to_string(c.col) + ") is not reachable");
    }
    return static_cast<std::size_t>(index_of_[flat(c)]);
}

std::vector<Action> GridEnv::shortest_path_actions(Cell c) const {
    std::vector<Action> out;
    const int d = goal_distance(c);
    for (Action a : kAllActions) {
        const Cell n = transition(c, a);
        if (is_reachable(n) && goal_distance(n) == d - 1) out.push_back(a);
    }
    return out;
}

std::string GridEnv::ascii() const {
    std::string out;
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            const Cell cell{r, c};
            char ch = '.';
            if (is_wall(cell)) ch = '#';
            else if (is_goal(cell)) ch = 'G';
            else if (std::find(spawn_.begin(), spawn_.end(), cell) != spawn_.end()) ch = 'S';
            out.push_back(ch);
        }
        out.push_back('\n');
    }
    return out;
}

std::uint64_t GridEnv::total_steps() noexcept { return g_total_steps.load(std::memory_order_relaxed); }

}  // namespace sgf
