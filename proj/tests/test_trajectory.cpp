#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "sgf/trajectory.hpp"

using namespace sgf;

namespace {

GridEnv corridor() { return GridEnv::from_ascii("corridor", {"S....G"}, 50); }

}  // namespace

TEST_CASE("five-step corridor gives one five-step trajectory") {
    const TrajectorySet set = generate_expert(corridor(), {}, 1, 0);
    REQUIRE(set.size() == 1);
    CHECK(set[0].size() == 5);
    CHECK(set[0].terminal_reached);
    for (const TrajectoryStep& s : set[0].steps) CHECK(s.action == Action::Right);
    CHECK(set.total_states() == 5);
    CHECK(set.mean_return(0.99) == doctest::Approx(std::pow(0.99, 4)));
}

TEST_CASE("zero noise follows shortest paths") {
    const GridEnv env = GridEnv::make(EnvName::RingMaze);
    const TrajectorySet set = generate_expert(env, {.p_random = 0.0}, 30, 12);
    for (const Trajectory& t : set.trajectories()) {
        const Cell start = env.decode(t.steps.front().state);
        CHECK(static_cast<int>(t.size()) == env.goal_distance(start));
        for (const TrajectoryStep& s : t.steps) {
            const auto best = env.shortest_path_actions(env.decode(s.state));
            CHECK(std::find(best.begin(), best.end(), s.action) != best.end());
        }
    }
    CHECK(generate_expert(env, {.p_random = 0.0}, 30, 12) == set);
}

TEST_CASE("noisy expert is longer than optimal on u_maze") {
    const GridEnv env = GridEnv::make(EnvName::UMaze);
    const TrajectorySet set = generate_expert(env, {.p_random = 0.3}, 100, 7);
    double optimal = 0.0;
    for (const Trajectory& t : set.trajectories()) optimal += env.goal_distance(env.decode(t.steps.front().state));
    optimal /= static_cast<double>(set.size());
    CHECK(set.mean_length() > optimal);
    CHECK(starts_in_initial_distribution(set, env));
}

TEST_CASE("total states is the sum of lengths") {
    const TrajectorySet set = generate_expert(GridEnv::make(EnvName::OpenTarget), {.p_random = 0.5}, 40, 3);
    std::size_t n = 0;
    for (const Trajectory& t : set.trajectories()) n += t.size();
    CHECK(n == set.total_states());
}

TEST_CASE("admission filter") {
    TrajectorySet set(2);
    Trajectory open_ended{0, {{{0.0, 0.0}, Action::Up}}, false};
    CHECK_THROWS_AS(set.add(open_ended), ContractError);
    CHECK_THROWS_AS(set.add(Trajectory{1, {}, true}), ContractError);
    CHECK_THROWS_AS(set.add(Trajectory{2, {{{0.0}, Action::Up}}, true}), ShapeError);
    CHECK(set.empty());
    set.add(Trajectory{3, {{{0.0, 1.0}, Action::Left}}, true});
    CHECK(set.size() == 1);
}

TEST_CASE("start states outside the spawn set are detected") {
    const GridEnv env = GridEnv::make(EnvName::UMaze);
    TrajectorySet set(2);
    set.add(Trajectory{0, {{env.encode({5, 0}), Action::Up}}, true});
    CHECK_FALSE(starts_in_initial_distribution(set, env));
}

TEST_CASE("save and load round trip") {
    const TrajectorySet set = generate_expert(GridEnv::make(EnvName::UMaze), {.p_random = 0.3}, 10, 5);
    std::stringstream ss;
    save_trajectories(set, ss);
    const TrajectorySet back = load_trajectories(ss);
    CHECK(back == set);

    const TrajectorySet onehot = generate_expert(GridEnv::make(EnvName::UMaze, Encoding::OnehotCell), {}, 3, 5);
    std::stringstream s2;
    save_trajectories(onehot, s2);
    CHECK(load_trajectories(s2) == onehot);
}

TEST_CASE("parse errors carry the line number") {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::stringstream ss(text);
        try {
            (void)load_trajectories(ss);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("dim,2\n") == 1);
    CHECK(line_of("state_dim,2\n0,0,0.1,0.2,1\n0,1,0.1,3\n") == 3);
    CHECK(line_of("state_dim,2\n0,0,0.1,0.2,1\n0,2,0.1,0.2,1\n") == 3);
    CHECK(line_of("state_dim,2\n0,0,0.1,0.2,9\n") == 2);
    CHECK(line_of("state_dim,2\n0,0,0.1,abc,1\n") == 2);
    CHECK(line_of("state_dim,2\n0,0,0.1,0.2,1\n1,0,0.1,0.2,1\n0,0,0.1,0.2,1\n") == 4);
    CHECK(line_of("state_dim,2\n3,1,0.1,0.2,1\n") == 2);
}
