// subgoal-forge: command-line front end for the sgf library.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sgf/harness.hpp"

namespace fs = std::filesystem;
using namespace sgf;

namespace {

// Exit codes: 0 success, 1 failure while running, 2 bad usage or config.
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

fs::path output_path(const std::string& path) {
    fs::path p = resolve_output_dir(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
}

GridEnv make_env(const std::string& name, const std::string& encoding, std::size_t step_cap) {
    GridEnv env = GridEnv::make(parse_env_name(name), parse_encoding(encoding));
    if (step_cap != 0) env.set_step_cap(step_cap);
    return env;
}

struct ExperimentFlags {
    std::string config;
    std::string out;
    std::size_t steps = 0;
    std::size_t seeds = 0;
    std::size_t workers = 0;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--config", f.config, "experiment config file")->required();
    cmd->add_option("--out", f.out, "output directory (overrides the config)");
    cmd->add_option("--steps", f.steps, "env-step budget per run (overrides the config)");
    cmd->add_option("--seeds", f.seeds, "use seeds 1..N (overrides the config)");
    cmd->add_option("--workers", f.workers, "rollout threads");
}

ExperimentConfig resolve_experiment(const ExperimentFlags& f) {
    require_file(f.config, "config");
    ExperimentConfig c = load_config(f.config);
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.steps != 0) c.train.total_env_steps = f.steps;
    if (f.seeds != 0) {
        c.seeds.clear();
        for (std::size_t s = 1; s <= f.seeds; ++s) c.seeds.push_back(s);
    }
    if (f.workers != 0) c.train.workers = f.workers;
    if (c.output_dir.empty()) throw ConfigError("no output directory: set [experiment] output or pass --out");
    c.validate();
    return c;
}

// Non-zero when any run stopped early on a numeric failure.
int report(const RunRecord& record) {
    std::cout << summary_table(record);
    std::cout << "outputs in " << resolve_output_dir(record.config.output_dir).string() << "\n";
    int code = 0;
    for (const auto& r : record.runs) {
        if (r.aborted) {
            std::cerr << "run " << to_string(r.variant) << " seed " << r.seed << " aborted: " << r.abort_reason << "\n";
            code = kExitRuntime;
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sub-goal discovery, shaping and training on grid mazes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // gen-demos
    auto* gen = app.add_subcommand("gen-demos", "generate an expert demonstration corpus");
    std::string g_env = "u_maze", g_encoding = "normalized_xy", g_out;
    std::size_t g_count = 50;
    double g_noise = 0.0;
    std::uint64_t g_seed = 1;
    gen->add_option("--env", g_env, "ring_maze | open_target | u_maze");
    gen->add_option("--encoding", g_encoding, "normalized_xy | onehot_cell");
    gen->add_option("--count", g_count, "number of trajectories")->check(CLI::PositiveNumber);
    gen->add_option("--noise", g_noise, "p_random of the noisy expert")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", g_seed, "generation seed");
    gen->add_option("--out", g_out, "trajectory file")->required();

    // discover
    auto* disc = app.add_subcommand("discover", "learn a sub-goal predictor from demonstrations");
    std::string d_demos, d_out, d_labels;
    std::size_t d_ng = 4, d_iters = 20;
    double d_eps = 0.01;
    std::uint64_t d_seed = 1;
    disc->add_option("--demos", d_demos, "trajectory file")->required();
    disc->add_option("--ng", d_ng, "number of sub-goals");
    disc->add_option("--eps", d_eps, "stop when fewer than this fraction of labels change");
    disc->add_option("--max-iters", d_iters, "iteration limit");
    disc->add_option("--seed", d_seed, "seed");
    disc->add_option("--out", d_out, "predictor checkpoint")->required();
    disc->add_option("--labels", d_labels, "labels CSV (episode_id,t,label)");

    // fit-utility
    auto* fit = app.add_subcommand("fit-utility", "fit the one-class utility model");
    std::string u_demos, u_out;
    UtilityConfig u_cfg;
    u_cfg.seed = 1;
    fit->add_option("--demos", u_demos, "trajectory file")->required();
    fit->add_option("--out", u_out, "utility checkpoint")->required();
    fit->add_option("--m", u_cfg.embedding_dim, "embedding dimension");
    fit->add_option("--lambda", u_cfg.lambda, "l2 coefficient");
    fit->add_option("--epochs", u_cfg.epochs, "training epochs");
    fit->add_option("--quantile", u_cfg.delta_quantile, "delta quantile of training utilities");
    fit->add_option("--seed", u_cfg.seed, "seed");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "behaviour-clone a policy from demonstrations");
    std::string p_demos, p_out;
    PretrainConfig p_cfg;
    p_cfg.seed = 1;
    pre->add_option("--demos", p_demos, "trajectory file")->required();
    pre->add_option("--out", p_out, "policy checkpoint")->required();
    pre->add_option("--epochs", p_cfg.epochs, "epochs");
    pre->add_option("--lr", p_cfg.learning_rate, "learning rate");
    pre->add_option("--seed", p_cfg.seed, "seed");

    // train
    auto* train = app.add_subcommand("train", "discover, pretrain and train one shaping variant");
    std::string t_config, t_env = "u_maze", t_encoding = "normalized_xy", t_demos, t_shaping = "gated_subgoal", t_out;
    std::size_t t_ng = 4, t_steps = 500000, t_seeds = 3, t_workers = 1, t_step_cap = 0;
    train->add_option("--config", t_config, "base experiment config; flags below override it");
    train->add_option("--env", t_env, "ring_maze | open_target | u_maze");
    train->add_option("--encoding", t_encoding, "normalized_xy | onehot_cell");
    train->add_option("--step-cap", t_step_cap, "episode step cap (0 keeps the env default)");
    train->add_option("--demos", t_demos, "trajectory file (generated from the config when omitted)");
    train->add_option("--shaping", t_shaping, "none | value | subgoal | gated_subgoal | pretrain_only");
    train->add_option("--ng", t_ng, "number of sub-goals");
    train->add_option("--steps", t_steps, "env-step budget");
    train->add_option("--seeds", t_seeds, "use seeds 1..N");
    train->add_option("--workers", t_workers, "rollout threads");
    train->add_option("--out", t_out, "run directory")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "evaluate a policy checkpoint on the sparse reward");
    std::string e_env = "u_maze", e_encoding = "normalized_xy", e_policy;
    std::size_t e_episodes = 100, e_step_cap = 0;
    std::uint64_t e_seed = 1;
    bool e_sampled = false;
    eval->add_option("--env", e_env, "ring_maze | open_target | u_maze");
    eval->add_option("--encoding", e_encoding, "normalized_xy | onehot_cell");
    eval->add_option("--step-cap", e_step_cap, "episode step cap (0 keeps the env default)");
    eval->add_option("--policy", e_policy, "policy checkpoint")->required();
    eval->add_option("--episodes", e_episodes, "episodes")->check(CLI::PositiveNumber);
    eval->add_option("--seed", e_seed, "seed");
    eval->add_flag("--sampled", e_sampled, "sample actions instead of taking the argmax");

    ExperimentFlags cmp_flags, ng_flags, oos_flags;
    auto* cmp = app.add_subcommand("compare", "run every configured variant");
    add_experiment_flags(cmp, cmp_flags);
    auto* abl_ng = app.add_subcommand("ablate-ng", "sweep the number of sub-goals");
    add_experiment_flags(abl_ng, ng_flags);
    auto* abl_oos = app.add_subcommand("ablate-oos", "subgoal vs gated_subgoal");
    add_experiment_flags(abl_oos, oos_flags);

    // render-map
    auto* render = app.add_subcommand("render-map", "write the per-cell argmax sub-goal map");
    std::string r_env = "ring_maze", r_encoding = "normalized_xy", r_predictor, r_out;
    render->add_option("--env", r_env, "ring_maze | open_target | u_maze");
    render->add_option("--encoding", r_encoding, "normalized_xy | onehot_cell");
    render->add_option("--predictor", r_predictor, "predictor checkpoint")->required();
    render->add_option("--out", r_out, "output prefix; writes <prefix>.txt and <prefix>.pgm")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) {
            const GridEnv env = make_env(g_env, g_encoding, 0);
            ExpertConfig ec;
            ec.p_random = g_noise;
            const TrajectorySet set = generate_expert(env, ec, g_count, g_seed);
            const fs::path out = output_path(g_out);
            save_trajectories(set, out.string());
            std::cout << "wrote " << set.size() << " trajectories (" << set.total_states() << " states, mean length "
                      << set.mean_length() << ") to " << out.string() << "\n";
        } else if (*disc) {
            require_file(d_demos, "demo file");
            const TrajectorySet set = load_trajectories(d_demos);
            DiscoverConfig dc;
            dc.num_subgoals = d_ng;
            dc.epsilon = d_eps;
            dc.max_iters = d_iters;
            dc.seed = d_seed;
            const DiscoverResult dr = discover(set, dc);
            const fs::path out = output_path(d_out);
            save_mlp(dr.predictor.net(), out.string());
            if (!d_labels.empty()) save_labels(set, dr.labeling, output_path(d_labels).string());
            for (const auto& w : dr.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "iterations " << dr.iterations << (dr.converged ? " (converged)" : " (not converged)")
                      << "\npredictor written to " << out.string() << "\n";
            if (!dr.converged) return kExitRuntime;
        } else if (*fit) {
            require_file(u_demos, "demo file");
            const TrajectorySet set = load_trajectories(u_demos);
            const UtilityFit uf = fit_utility(set, u_cfg);
            const fs::path out = output_path(u_out);
            save_utility(uf.model, out.string());
            std::cout << "delta " << uf.model.delta() << " after " << uf.loss_history.size() << " epochs (final loss "
                      << uf.loss_history.back() << ")\nutility model written to " << out.string() << "\n";
        } else if (*pre) {
            require_file(p_demos, "demo file");
            const TrajectorySet set = load_trajectories(p_demos);
            const PretrainReport rep = pretrain(Policy::create(set.state_dim(), derive_seed(p_cfg.seed, 14)), set, p_cfg);
            const fs::path out = output_path(p_out);
            save_policy(rep.policy, out.string());
            std::cout << "training accuracy " << rep.accuracy << "\npolicy written to " << out.string() << "\n";
        } else if (*train) {
            ExperimentConfig c;
            if (!t_config.empty()) {
                require_file(t_config, "config");
                c = load_config(t_config);
            }
            const auto given = [&](const char* flag) { return train->count(flag) > 0; };
            if (t_config.empty() || given("--env")) c.env = parse_env_name(t_env);
            if (t_config.empty() || given("--encoding")) c.encoding = parse_encoding(t_encoding);
            if (given("--step-cap")) c.step_cap = t_step_cap;
            if (given("--demos")) c.demos.path = t_demos;
            if (t_config.empty() || given("--ng")) c.num_subgoals = t_ng;
            if (t_config.empty() || given("--steps")) c.train.total_env_steps = t_steps;
            if (t_config.empty() || given("--seeds")) {
                c.seeds.clear();
                for (std::size_t s = 1; s <= t_seeds; ++s) c.seeds.push_back(s);
            }
            if (t_config.empty() || given("--workers")) c.train.workers = t_workers;
            c.output_dir = t_out;
            const Variant v = parse_variant(t_shaping);
            c.variants = {v};
            c.validate();
            return report(run_training(c, v));
        } else if (*eval) {
            require_file(e_policy, "policy checkpoint");
            const GridEnv env = make_env(e_env, e_encoding, e_step_cap);
            const Policy policy = load_policy(e_policy);
            const EvalResult ev = evaluate(policy, env, e_episodes, e_seed, !e_sampled);
            std::cout << "episodes " << ev.episodes << "\nmean_return " << format_double(ev.mean_return)
                      << "\nreturn_std " << format_double(ev.return_std) << "\nsuccess_rate "
                      << format_double(ev.success_rate) << "\nmean_length " << format_double(ev.mean_length) << "\n";
        } else if (*cmp) {
            return report(run_comparison(resolve_experiment(cmp_flags)));
        } else if (*abl_ng) {
            return report(run_ng_ablation(resolve_experiment(ng_flags)));
        } else if (*abl_oos) {
            return report(run_outofset_ablation(resolve_experiment(oos_flags)));
        } else if (*render) {
            require_file(r_predictor, "predictor checkpoint");
            const GridEnv env = make_env(r_env, r_encoding, 0);
            const PartitionMap map = render_partition_map(load_mlp(r_predictor), env);
            const fs::path txt = output_path(r_out + ".txt");
            const fs::path pgm = output_path(r_out + ".pgm");
            std::ofstream(txt) << map.ascii();
            std::ofstream(pgm) << map.pgm();
            std::cout << map.ascii();
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
