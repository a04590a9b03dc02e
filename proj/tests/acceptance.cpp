// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 4 9      run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sgf/harness.hpp"

using namespace sgf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

fs::path scratch_root() {
    const fs::path p = fs::temp_directory_path() / "sgf_acceptance";
    fs::create_directories(p);
    return p;
}

std::vector<std::vector<double>> random_pmfs(Rng& rng, std::size_t n, std::size_t g) {
    std::vector<std::vector<double>> out(n, std::vector<double>(g));
    for (auto& p : out) {
        double s = 0.0;
        for (double& v : p) s += (v = -std::log(1.0 - uniform01(rng)));
        for (double& v : p) v /= s;
    }
    return out;
}

// Shared experiment defaults: 50 noisy-expert demos, three seeds, 500k steps.
ExperimentConfig desk_config(EnvName env, Encoding enc = Encoding::NormalizedXy) {
    ExperimentConfig c;
    c.env = env;
    c.encoding = enc;
    c.demos.count = 50;
    c.demos.noise = 0.3;
    c.demos.seed = 1;
    c.seeds = {1, 2, 3};
    c.train.total_env_steps = 500000;
    return c;
}

std::vector<double> finals(const RunRecord& rec, Variant v, bool success) {
    std::vector<double> out;
    for (const VariantRun* r : rec.select(v)) out.push_back(success ? r->final_eval.success_rate : r->final_eval.mean_return);
    return out;
}

std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], 2);
    return s + "]";
}

// ---------------------------------------------------------------------------

Outcome dtw_oracle() {
    Rng rng(20240601);
    std::size_t matched = 0;
    const std::size_t total = 1000;
    for (std::size_t trial = 0; trial < total; ++trial) {
        const std::size_t g = 2 + uniform_index(rng, 3);
        const std::size_t n = g + uniform_index(rng, 11 - g);
        Trajectory traj{static_cast<long>(trial), {}, true};
        std::vector<std::vector<double>> pmfs;
        if (trial % 2 == 0) {
            // Predictor-driven sequences through dtw_infer.
            Mlp net = Mlp::xavier({2, 8, g}, OutputHead::Softmax, rng());
            for (double& p : net.params()) p *= 3.0;
            const SubgoalPredictor pred(net);
            for (std::size_t t = 0; t < n; ++t) traj.steps.push_back({{uniform01(rng), uniform01(rng)}, Action::Noop});
            for (const auto& s : traj.steps) pmfs.push_back(pred.predict(s.state));
            const DtwResult dp = dtw_infer(pred, traj);
            const oracle::Alignment bf = oracle::brute_force_dtw(pmfs);
            matched += dp.labels == bf.labels && dp.cost == bf.cost;
        } else {
            pmfs = random_pmfs(rng, n, g);
            const DtwResult dp = dtw_align(pmfs);
            const oracle::Alignment bf = oracle::brute_force_dtw(pmfs);
            matched += dp.labels == bf.labels && dp.cost == bf.cost;
        }
    }
    return {matched == total, std::to_string(matched) + "/" + std::to_string(total) + " sequences match exactly"};
}

Outcome gradient_check() {
    Rng rng(777);
    const char* names[] = {"cross_entropy", "mse", "svdd"};
    double worst_all = 0.0;
    std::string detail;
    for (int kind = 0; kind < 3; ++kind) {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<std::size_t> dims{1 + uniform_index(rng, 4)};
            for (std::size_t h = 0, layers = 1 + uniform_index(rng, 2); h < layers; ++h) dims.push_back(2 + uniform_index(rng, 6));
            dims.push_back(2 + uniform_index(rng, 4));
            const bool svdd = kind == 2;
            Mlp net = Mlp::xavier(dims, kind == 0 ? OutputHead::Softmax : OutputHead::Linear, rng(), !svdd);
            if (!svdd) {
                for (std::size_t l = 0; l < net.num_layers(); ++l) {
                    for (std::size_t r = 0; r < dims[l + 1]; ++r) net.params()[net.bias_offset(l) + r] = uniform01(rng) - 0.5;
                }
            }
            std::vector<double> x(net.input_dim());
            for (double& v : x) v = 2.0 * uniform01(rng) - 1.0;
            std::vector<double> target(net.output_dim());
            for (double& v : target) v = 2.0 * uniform01(rng) - 1.0;
            Loss loss;
            if (kind == 0) loss = CrossEntropyLoss{uniform_index(rng, net.output_dim()), 1.0};
            else if (kind == 1) loss = MseLoss{target};
            else loss = SvddLoss{target};
            const Gradients g = backward(net, x, loss);
            worst = std::max(worst, oracle::max_relative_error(g.values, oracle::fd_gradient(net, x, loss, 1e-5)));
        }
        worst_all = std::max(worst_all, worst);
        detail += std::string(kind ? ", " : "") + names[kind] + " max rel err " + [&] {
            std::ostringstream s;
            s << std::scientific << std::setprecision(2) << worst;
            return s.str();
        }();
    }
    return {worst_all < 1e-4, detail};
}

Outcome invariance() {
    std::size_t checked = 0;
    std::size_t agree = 0;
    for (EnvName name : {EnvName::RingMaze, EnvName::OpenTarget, EnvName::UMaze}) {
        const GridEnv env = GridEnv::make(name);
        const auto want = greedy_action_sets(env, value_iteration(env), 1e-9);
        std::vector<std::vector<double>> potentials;
        Rng rng(derive_seed(99, static_cast<std::uint64_t>(name)));
        for (int i = 0; i < 5; ++i) {
            std::vector<double> phi(env.num_states());
            for (double& v : phi) v = 10.0 * uniform01(rng) - 5.0;
            potentials.push_back(std::move(phi));
        }
        // Learned potentials: three discovered sub-goal maps (one gated) and two value baselines.
        const TrajectorySet demos = generate_expert(env, {.p_random = 0.3}, 30, 5);
        for (std::uint64_t s = 1; s <= 3; ++s) {
            const DiscoverResult d = discover(demos, {.num_subgoals = 2 + s, .seed = s});
            if (s == 3) {
                UtilityConfig uc;
                uc.epochs = 20;
                uc.seed = s;
                potentials.push_back(ShapingPotential::gated_subgoal(d.predictor, fit_utility(demos, uc).model, env.gamma())
                                         .potential_table(env));
            } else {
                potentials.push_back(ShapingPotential::subgoal(d.predictor, env.gamma()).potential_table(env));
            }
        }
        for (std::uint64_t s = 1; s <= 2; ++s) {
            ValueBaselineConfig vc;
            vc.seed = s;
            vc.epochs = 20;
            potentials.push_back(
                ShapingPotential::value(fit_value_baseline(demos, env.gamma(), vc).net, env.gamma()).potential_table(env));
        }
        for (const auto& phi : potentials) {
            const auto got = greedy_action_sets(env, value_iteration(env, phi), 1e-9);
            for (std::size_t s = 0; s < got.size(); ++s) {
                ++checked;
                agree += got[s] == want[s];
            }
        }
    }
    return {agree == checked, std::to_string(agree) + "/" + std::to_string(checked) +
                                  " (state, potential) pairs keep the optimal action set; 3 envs x 10 potentials"};
}

Outcome subgoal_recovery() {
    bool ok = true;
    std::string detail;
    double worst = 1.0;
    std::size_t worst_iters = 0;
    for (std::size_t segments : {2, 3, 4}) {
        for (double noise : {0.1, 0.2, 0.3}) {
            const PlantedCorpus c = planted_corpus({.segments = segments, .noise = noise, .count = 40,
                                                    .seed = derive_seed(segments, static_cast<std::uint64_t>(noise * 100))});
            const DiscoverResult r = discover(c.set, {.num_subgoals = segments, .max_iters = 20, .seed = 1});
            const double agree = planted_agreement(r.labeling, c.planted);
            worst = std::min(worst, agree);
            worst_iters = std::max(worst_iters, r.iterations);
            if (!r.converged || agree < 0.95) {
                ok = false;
                detail += " [segments " + std::to_string(segments) + " noise " + fmt(noise, 1) + ": converged " +
                          (r.converged ? "yes" : "no") + ", agreement " + fmt(agree) + "]";
            }
        }
    }
    return {ok, "9 corpora, min agreement " + fmt(worst) + ", max iterations " + std::to_string(worst_iters) + detail};
}

Outcome u_maze_comparison() {
    ExperimentConfig c = desk_config(EnvName::UMaze);
    c.variants = {Variant::PretrainOnly, Variant::None, Variant::Subgoal, Variant::GatedSubgoal};
    c.output_dir = (scratch_root() / "c5_u_maze").string();
    const RunRecord rec = run_comparison(c);
    const double gated = median(finals(rec, Variant::GatedSubgoal, true));
    const double ungated = median(finals(rec, Variant::Subgoal, true));
    const double pre = median(finals(rec, Variant::PretrainOnly, true));
    const double none = median(finals(rec, Variant::None, true));
    const bool ok = gated >= 0.9 && ungated >= 0.9 && pre < 0.1 && none < 0.1;
    std::string d = "median final success: gated_subgoal " + fmt(gated, 2) + " (>=0.9), subgoal " + fmt(ungated, 2) +
                    " (>=0.9), pretrain_only " + fmt(pre, 2) + " (<0.1), none " + fmt(none, 2) + " (<0.1)";
    d += "; per-seed gated " + list(finals(rec, Variant::GatedSubgoal, true)) + " subgoal " +
         list(finals(rec, Variant::Subgoal, true));
    return {ok, d};
}

Outcome out_of_set_ablation() {
    ExperimentConfig c = desk_config(EnvName::OpenTarget);
    c.output_dir = (scratch_root() / "c6_open_target").string();
    const RunRecord rec = run_outofset_ablation(c);
    std::vector<double> gated, ungated;
    for (const VariantRun* r : rec.select(Variant::GatedSubgoal)) gated.push_back(curve_auc(r->curve));
    for (const VariantRun* r : rec.select(Variant::Subgoal)) ungated.push_back(curve_auc(r->curve));
    const double g = mean(gated);
    const double u = mean(ungated);
    return {g >= u, "mean AUC gated_subgoal " + fmt(g) + " vs subgoal " + fmt(u) + "; per-seed gated " + list(gated) +
                        " subgoal " + list(ungated)};
}

Outcome surpass_expert() {
    ExperimentConfig c = desk_config(EnvName::RingMaze, Encoding::OnehotCell);
    c.variants = {Variant::PretrainOnly, Variant::GatedSubgoal};
    c.output_dir = (scratch_root() / "c7_ring_maze").string();
    const RunRecord rec = run_comparison(c);
    const double agent = mean(finals(rec, Variant::GatedSubgoal, false));
    const double cloned = mean(finals(rec, Variant::PretrainOnly, false));
    const double expert = rec.demo_mean_return;
    const double gain = agent / expert - 1.0;
    return {gain >= 0.2, "agent mean return " + fmt(agent) + " vs expert corpus " + fmt(expert) + " (+" +
                             fmt(100.0 * gain, 1) + "%, need +20%); pretrain_only " + fmt(cloned)};
}

Outcome partition_map() {
    const GridEnv env = GridEnv::make(EnvName::RingMaze);
    const TrajectorySet demos = generate_expert(env, {.p_random = 0.3}, 50, 1);
    DiscoverConfig dc;
    dc.num_subgoals = 4;
    dc.seed = derive_seed(1, 10);
    // Ten epochs per learning step underfit the nested rings from xy inputs.
    dc.learning.epochs = 50;
    const DiscoverResult d = discover(demos, dc);
    const PartitionMap map = render_partition_map(d.predictor.net(), env);
    std::ofstream(scratch_root() / "c8_ring_map.txt") << map.ascii();
    std::ofstream(scratch_root() / "c8_ring_map.pgm") << map.pgm();

    std::vector<int> dominant;
    std::string shares;
    for (int ring : {9, 7, 5, 3}) {
        std::map<int, int> counts;
        int cells = 0;
        for (int r = 0; r < env.rows(); ++r) {
            for (int c = 0; c < env.cols(); ++c) {
                if (std::max(std::abs(r - 10), std::abs(c - 10)) != ring || map.at({r, c}) < 0) continue;
                ++counts[map.at({r, c})];
                ++cells;
            }
        }
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        dominant.push_back(best->first);
        shares += (shares.empty() ? "" : ", ") + std::string("ring ") + std::to_string(ring) + " -> " +
                  std::to_string(best->first) + " (" + fmt(100.0 * best->second / cells, 0) + "%)";
    }
    bool ok = true;
    for (std::size_t i = 1; i < dominant.size(); ++i) ok &= dominant[i] > dominant[i - 1];
    return {ok, "discover converged " + std::string(d.converged ? "yes" : "no") + " in " +
                    std::to_string(d.iterations) + " iterations; " + shares};
}

double visited_auc(Encoding enc) {
    const GridEnv env = GridEnv::make(EnvName::UMaze, enc);
    const TrajectorySet demos = generate_expert(env, {.p_random = 0.3}, 50, 1);
    UtilityConfig uc;
    uc.seed = derive_seed(1, 11);
    const UtilityModel m = fit_utility(demos, uc).model;
    std::set<Cell> visited;
    for (const Trajectory& t : demos.trajectories()) {
        for (const TrajectoryStep& s : t.steps) visited.insert(env.decode(s.state));
    }
    std::vector<double> in, out;
    for (std::size_t i = 0; i < env.num_states(); ++i) {
        const Cell c = env.cell_at(i);
        if (env.is_goal(c)) continue;
        (visited.count(c) ? in : out).push_back(m.utility(env.encode(c)));
    }
    if (out.empty()) return -1.0;
    return roc_auc(in, out);
}

// Scored on one-hot cells; the xy figure is printed for reference only.
Outcome utility_auc() {
    const double onehot = visited_auc(Encoding::OnehotCell);
    const double xy = visited_auc(Encoding::NormalizedXy);
    if (onehot < 0.0) return {false, "every reachable cell was visited; no never-visited class"};
    return {onehot > 0.9, "AUC onehot_cell " + fmt(onehot) + " (normalized_xy " + fmt(xy) + ")"};
}

Outcome determinism() {
    const fs::path root = scratch_root() / "c10";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cli = SGF_CLI_PATH;
    const std::string base = "\"" + cli + "\" train --env u_maze --shaping gated_subgoal --ng 4 --steps 30000 --seeds 2 --workers 1 --out ";
    for (const char* run : {"a", "b"}) {
        const std::string cmd = base + "\"" + (root / run).string() + "\" > /dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "train command failed: " + cmd};
    }
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(root / "a" / "curves.csv");
    const std::string b = slurp(root / "b" / "curves.csv");
    const bool ok = !a.empty() && a == b;
    return {ok, "curves.csv " + std::to_string(a.size()) + " bytes, " + (ok ? "identical" : "different") +
                    " across two runs of `subgoal-forge train`"};
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // 0 = none stated
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "DTW equals exhaustive enumeration", 10, dtw_oracle},
        {2, "gradients match finite differences", 30, gradient_check},
        {3, "shaping keeps optimal action sets", 60, invariance},
        {4, "planted sub-goal recovery", 300, subgoal_recovery},
        {5, "u_maze comparison", 4 * 1800, u_maze_comparison},
        {6, "out-of-set ablation on open_target", 1800, out_of_set_ablation},
        {7, "surpassing a noisy expert on ring_maze", 1800, surpass_expert},
        {8, "ring_maze partition map", 0, partition_map},
        {9, "one-class utility AUC on u_maze", 120, utility_auc},
        {10, "byte-identical training CSV", 0, determinism},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.budget_seconds, 0) + " s budget";
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  C" << c.id << "  " << c.name << "  (" << fmt(secs, 1)
                  << " s)  " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
