#include "sgf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace sgf {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::PretrainOnly: return "pretrain_only";
        case Variant::None: return "none";
        case Variant::Value: return "value";
        case Variant::Subgoal: return "subgoal";
        case Variant::GatedSubgoal: return "gated_subgoal";
    }
    return "?";
}

Variant parse_variant(std::string_view text) {
    if (text == "pretrain_only") return Variant::PretrainOnly;
    if (text == "none") return Variant::None;
    if (text == "value") return Variant::Value;
    if (text == "subgoal") return Variant::Subgoal;
    if (text == "gated_subgoal") return Variant::GatedSubgoal;
    throw ConfigError("unknown variant '" + std::string(text) +
                      "' (expected pretrain_only, none, value, subgoal or gated_subgoal)");
}

std::optional<ShapingKind> shaping_of(Variant v) {
    switch (v) {
        case Variant::PretrainOnly: return std::nullopt;
        case Variant::None: return ShapingKind::None;
        case Variant::Value: return ShapingKind::Value;
        case Variant::Subgoal: return ShapingKind::Subgoal;
        case Variant::GatedSubgoal: return ShapingKind::GatedSubgoal;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    auto check = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    check(!seeds.empty(), "at least one seed is required");
    check(!variants.empty(), "at least one variant is required");
    check(num_subgoals >= 2, "num_subgoals must be at least 2");
    check(!ng_list.empty(), "ng_list must not be empty");
    for (std::size_t ng : ng_list) check(ng >= 2, "every n_g in ng_list must be at least 2");
    if (demos.path.empty()) {
        check(demos.count >= 1, "demos.count must be positive");
        check(demos.noise >= 0.0 && demos.noise <= 1.0, "demos.noise must lie in [0, 1]");
    } else {
        check(std::filesystem::is_regular_file(demos.path), "demo file '" + demos.path + "' does not exist");
    }
    check(discover.epsilon > 0.0 && discover.epsilon <= 1.0, "discover.epsilon must lie in (0, 1]");
    check(discover.max_iters >= 1, "discover.max_iters must be positive");
    check(utility.embedding_dim >= 2, "utility.embedding_dim must be at least 2");
    check(utility.lambda >= 0.0, "utility.lambda must be non-negative");
    check(utility.delta_quantile >= 0.0 && utility.delta_quantile <= 1.0, "utility.delta_quantile must lie in [0, 1]");
    check(pretrain.epochs >= 1 && pretrain.batch_size >= 1, "pretrain epochs and batch_size must be positive");
    check(pretrain.learning_rate > 0.0, "pretrain.learning_rate must be positive");
    check(critic.batch_size >= 1, "critic.batch_size must be positive");
    check(critic.learning_rate > 0.0, "critic.learning_rate must be positive");
    check(final_eval_episodes >= 1, "final_eval_episodes must be positive");
    train.validate();
}

GridEnv ExperimentConfig::make_env() const {
    GridEnv env = GridEnv::make(this->env, encoding);
    if (step_cap != 0) env.set_step_cap(step_cap);
    return env;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::uint64_t parse_u64(const std::string& s) {
    std::size_t pos = 0;
    if (s.empty() || s[0] == '-') throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
    return v;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) out.push_back(static_cast<std::size_t>(parse_u64(item)));
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    auto sz = [](std::size_t ExperimentConfig::*field) -> Setter {
        return [field](ExperimentConfig& c, const std::string& v) { c.*field = parse_u64(v); };
    };
    static const std::map<std::string, Setter> table = {
        {"experiment.env", [](auto& c, const auto& v) { c.env = parse_env_name(v); }},
        {"experiment.encoding", [](auto& c, const auto& v) { c.encoding = parse_encoding(v); }},
        {"experiment.step_cap", sz(&ExperimentConfig::step_cap)},
        {"experiment.num_subgoals", sz(&ExperimentConfig::num_subgoals)},
        {"experiment.ng_list", [](auto& c, const auto& v) { c.ng_list = parse_sizes(v); }},
        {"experiment.variants",
         [](auto& c, const auto& v) {
             c.variants.clear();
             for (const auto& item : split_list(v)) c.variants.push_back(parse_variant(item));
         }},
        {"experiment.seeds",
         [](auto& c, const auto& v) {
             c.seeds.clear();
             for (const auto& item : split_list(v)) c.seeds.push_back(parse_u64(item));
         }},
        {"experiment.steps", [](auto& c, const auto& v) { c.train.total_env_steps = parse_u64(v); }},
        {"experiment.output", [](auto& c, const auto& v) { c.output_dir = v; }},
        {"experiment.final_eval_episodes", sz(&ExperimentConfig::final_eval_episodes)},
        {"experiment.policy_hidden", [](auto& c, const auto& v) { c.policy_hidden = parse_sizes(v); }},
        {"demos.path", [](auto& c, const auto& v) { c.demos.path = v; }},
        {"demos.count", [](auto& c, const auto& v) { c.demos.count = parse_u64(v); }},
        {"demos.noise", [](auto& c, const auto& v) { c.demos.noise = parse_double(v); }},
        {"demos.seed", [](auto& c, const auto& v) { c.demos.seed = parse_u64(v); }},
        {"discover.epsilon", [](auto& c, const auto& v) { c.discover.epsilon = parse_double(v); }},
        {"discover.max_iters", [](auto& c, const auto& v) { c.discover.max_iters = parse_u64(v); }},
        {"discover.epochs", [](auto& c, const auto& v) { c.discover.learning.epochs = parse_u64(v); }},
        {"discover.batch_size", [](auto& c, const auto& v) { c.discover.learning.batch_size = parse_u64(v); }},
        {"discover.learning_rate", [](auto& c, const auto& v) { c.discover.learning.learning_rate = parse_double(v); }},
        {"discover.hidden", [](auto& c, const auto& v) { c.discover.hidden = parse_sizes(v); }},
        {"utility.embedding_dim", [](auto& c, const auto& v) { c.utility.embedding_dim = parse_u64(v); }},
        {"utility.lambda", [](auto& c, const auto& v) { c.utility.lambda = parse_double(v); }},
        {"utility.epochs", [](auto& c, const auto& v) { c.utility.epochs = parse_u64(v); }},
        {"utility.batch_size", [](auto& c, const auto& v) { c.utility.batch_size = parse_u64(v); }},
        {"utility.learning_rate", [](auto& c, const auto& v) { c.utility.learning_rate = parse_double(v); }},
        {"utility.hidden", [](auto& c, const auto& v) { c.utility.hidden = parse_sizes(v); }},
        {"utility.delta_quantile", [](auto& c, const auto& v) { c.utility.delta_quantile = parse_double(v); }},
        {"value.epochs", [](auto& c, const auto& v) { c.value.epochs = parse_u64(v); }},
        {"value.batch_size", [](auto& c, const auto& v) { c.value.batch_size = parse_u64(v); }},
        {"value.learning_rate", [](auto& c, const auto& v) { c.value.learning_rate = parse_double(v); }},
        {"value.hidden", [](auto& c, const auto& v) { c.value.hidden = parse_sizes(v); }},
        {"pretrain.epochs", [](auto& c, const auto& v) { c.pretrain.epochs = parse_u64(v); }},
        {"pretrain.batch_size", [](auto& c, const auto& v) { c.pretrain.batch_size = parse_u64(v); }},
        {"pretrain.learning_rate", [](auto& c, const auto& v) { c.pretrain.learning_rate = parse_double(v); }},
        {"critic.epochs", [](auto& c, const auto& v) { c.critic.epochs = parse_u64(v); }},
        {"critic.batch_size", [](auto& c, const auto& v) { c.critic.batch_size = parse_u64(v); }},
        {"critic.learning_rate", [](auto& c, const auto& v) { c.critic.learning_rate = parse_double(v); }},
        {"train.rollout_length", [](auto& c, const auto& v) { c.train.rollout_length = parse_u64(v); }},
        {"train.num_envs", [](auto& c, const auto& v) { c.train.num_envs = parse_u64(v); }},
        {"train.entropy_coef", [](auto& c, const auto& v) { c.train.entropy_coef = parse_double(v); }},
        {"train.value_coef", [](auto& c, const auto& v) { c.train.value_coef = parse_double(v); }},
        {"train.learning_rate", [](auto& c, const auto& v) { c.train.learning_rate = parse_double(v); }},
        {"train.max_grad_norm", [](auto& c, const auto& v) { c.train.max_grad_norm = parse_double(v); }},
        {"train.eval_interval", [](auto& c, const auto& v) { c.train.eval_interval = parse_u64(v); }},
        {"train.eval_episodes", [](auto& c, const auto& v) { c.train.eval_episodes = parse_u64(v); }},
        {"train.workers", [](auto& c, const auto& v) { c.train.workers = parse_u64(v); }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig config;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", lineno);
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        const std::string key = (section.empty() ? "" : section + ".") + trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ParseError("unknown key '" + key + "'", lineno);
        try {
            it->second(config, value);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), lineno);
        } catch (const std::invalid_argument& e) {
            throw ParseError("bad value for '" + key + "': " + e.what(), lineno);
        } catch (const std::out_of_range&) {
            throw ParseError("value out of range for '" + key + "'", lineno);
        }
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    return parse_config(in);
}

std::string to_config_text(const ExperimentConfig& c) {
    std::ostringstream out;
    std::string variants;
    for (std::size_t i = 0; i < c.variants.size(); ++i) variants += (i ? "," : "") + to_string(c.variants[i]);
    out << "[experiment]\n"
        << "env = " << to_string(c.env) << "\n"
        << "encoding = " << to_string(c.encoding) << "\n"
        << "step_cap = " << c.step_cap << "\n"
        << "num_subgoals = " << c.num_subgoals << "\n"
        << "ng_list = " << join_sizes(c.ng_list) << "\n"
        << "variants = " << variants << "\n"
        << "seeds = " << join_seeds(c.seeds) << "\n"
        << "steps = " << c.train.total_env_steps << "\n"
        << "output = " << c.output_dir << "\n"
        << "final_eval_episodes = " << c.final_eval_episodes << "\n"
        << "policy_hidden = " << join_sizes(c.policy_hidden) << "\n"
        << "\n[demos]\n"
        << "path = " << c.demos.path << "\n"
        << "count = " << c.demos.count << "\n"
        << "noise = " << format_double(c.demos.noise) << "\n"
        << "seed = " << c.demos.seed << "\n"
        << "\n[discover]\n"
        << "epsilon = " << format_double(c.discover.epsilon) << "\n"
        << "max_iters = " << c.discover.max_iters << "\n"
        << "epochs = " << c.discover.learning.epochs << "\n"
        << "batch_size = " << c.discover.learning.batch_size << "\n"
        << "learning_rate = " << format_double(c.discover.learning.learning_rate) << "\n"
        << "hidden = " << join_sizes(c.discover.hidden) << "\n"
        << "\n[utility]\n"
        << "embedding_dim = " << c.utility.embedding_dim << "\n"
        << "lambda = " << format_double(c.utility.lambda) << "\n"
        << "epochs = " << c.utility.epochs << "\n"
        << "batch_size = " << c.utility.batch_size << "\n"
        << "learning_rate = " << format_double(c.utility.learning_rate) << "\n"
        << "hidden = " << join_sizes(c.utility.hidden) << "\n"
        << "delta_quantile = " << format_double(c.utility.delta_quantile) << "\n"
        << "\n[value]\n"
        << "epochs = " << c.value.epochs << "\n"
        << "batch_size = " << c.value.batch_size << "\n"
        << "learning_rate = " << format_double(c.value.learning_rate) << "\n"
        << "hidden = " << join_sizes(c.value.hidden) << "\n"
        << "\n[pretrain]\n"
        << "epochs = " << c.pretrain.epochs << "\n"
        << "batch_size = " << c.pretrain.batch_size << "\n"
        << "learning_rate = " << format_double(c.pretrain.learning_rate) << "\n"
        << "\n[critic]\n"
        << "epochs = " << c.critic.epochs << "\n"
        << "batch_size = " << c.critic.batch_size << "\n"
        << "learning_rate = " << format_double(c.critic.learning_rate) << "\n"
        << "\n[train]\n"
        << "rollout_length = " << c.train.rollout_length << "\n"
        << "num_envs = " << c.train.num_envs << "\n"
        << "entropy_coef = " << format_double(c.train.entropy_coef) << "\n"
        << "value_coef = " << format_double(c.train.value_coef) << "\n"
        << "learning_rate = " << format_double(c.train.learning_rate) << "\n"
        << "max_grad_norm = " << format_double(c.train.max_grad_norm) << "\n"
        << "eval_interval = " << c.train.eval_interval << "\n"
        << "eval_episodes = " << c.train.eval_episodes << "\n"
        << "workers = " << c.train.workers << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Statistics

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("mean of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size()));
}

double curve_auc(const std::vector<CurvePoint>& curve) {
    if (curve.empty()) throw ContractError("area under an empty curve");
    if (curve.size() == 1) return curve.front().mean_return;
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double w = static_cast<double>(curve[i].env_steps - curve[i - 1].env_steps);
        area += 0.5 * w * (curve[i].mean_return + curve[i - 1].mean_return);
    }
    return area / static_cast<double>(curve.back().env_steps - curve.front().env_steps);
}

std::vector<const VariantRun*> RunRecord::select(Variant v, std::size_t num_subgoals) const {
    std::vector<const VariantRun*> out;
    for (const auto& r : runs) {
        if (r.variant == v && (num_subgoals == 0 || r.num_subgoals == num_subgoals)) out.push_back(&r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

TrajectorySet obtain_demos(const ExperimentConfig& config, const GridEnv& env) {
    if (!config.demos.path.empty()) {
        TrajectorySet set = load_trajectories(config.demos.path);
        if (set.state_dim() != env.state_dim()) {
            throw ConfigError("demo state dimension " + std::to_string(set.state_dim()) +
                              " does not match the env encoding (" + std::to_string(env.state_dim()) + ")");
        }
        return set;
    }
    ExpertConfig ec;
    ec.p_random = config.demos.noise;
    return generate_expert(env, ec, config.demos.count, config.demos.seed);
}

// Per-seed artifacts shared by every variant of that seed.
struct SeedContext {
    SeedSummary summary;
    std::optional<SubgoalPredictor> predictor;
    std::optional<UtilityModel> utility;
    std::optional<Mlp> value_net;
    Policy pretrained;
    const TrajectorySet* demos = nullptr;
};

SeedContext prepare_seed(const ExperimentConfig& config, const TrajectorySet& demos, std::uint64_t seed,
                         std::size_t num_subgoals, bool need_subgoals, bool need_utility, bool need_value) {
    SeedContext ctx;
    ctx.demos = &demos;
    ctx.summary.seed = seed;
    ctx.summary.num_subgoals = num_subgoals;
    if (need_subgoals) {
        DiscoverConfig dc = config.discover;
        dc.num_subgoals = num_subgoals;
        dc.seed = derive_seed(seed, 10);
        DiscoverResult dr = discover(demos, dc);
        ctx.summary.discover_iterations = dr.iterations;
        ctx.summary.discover_converged = dr.converged;
        ctx.summary.label_counts.assign(num_subgoals, 0);
        for (const auto& labels : dr.labeling.labels) {
            for (int l : labels) ++ctx.summary.label_counts[static_cast<std::size_t>(l - 1)];
        }
        ctx.summary.warnings = dr.warnings;
        ctx.predictor = std::move(dr.predictor);
    }
    if (need_utility) {
        UtilityConfig uc = config.utility;
        uc.seed = derive_seed(seed, 11);
        UtilityFit uf = fit_utility(demos, uc);
        ctx.summary.delta = uf.model.delta();
        ctx.utility = std::move(uf.model);
    }
    if (need_value) {
        ValueBaselineConfig vc = config.value;
        vc.seed = derive_seed(seed, 12);
        ctx.value_net = fit_value_baseline(demos, config.make_env().gamma(), vc).net;
    }
    PretrainConfig pc = config.pretrain;
    pc.seed = derive_seed(seed, 13);
    PretrainReport rep = pretrain(Policy::create(demos.state_dim(), derive_seed(seed, 14), config.policy_hidden), demos, pc);
    ctx.summary.pretrain_accuracy = rep.accuracy;
    ctx.pretrained = std::move(rep.policy);
    return ctx;
}

ShapingPotential make_potential(ShapingKind kind, const SeedContext& ctx, double gamma) {
    switch (kind) {
        case ShapingKind::None: return ShapingPotential::none(gamma);
        case ShapingKind::Subgoal: return ShapingPotential::subgoal(*ctx.predictor, gamma);
        case ShapingKind::GatedSubgoal: return ShapingPotential::gated_subgoal(*ctx.predictor, *ctx.utility, gamma);
        case ShapingKind::Value: return ShapingPotential::value(*ctx.value_net, gamma);
    }
    throw ContractError("unknown shaping kind");
}

VariantRun run_variant(const ExperimentConfig& config, const GridEnv& env, const SeedContext& ctx, Variant v) {
    VariantRun run;
    run.variant = v;
    run.seed = ctx.summary.seed;
    run.num_subgoals = ctx.summary.num_subgoals;
    const std::uint64_t eval_seed = derive_seed(ctx.summary.seed, 16);
    Policy final_policy = ctx.pretrained;
    if (const auto kind = shaping_of(v)) {
        TrainConfig tc = config.train;
        tc.gamma = env.gamma();
        tc.seed = derive_seed(ctx.summary.seed, 15);
        const ShapingPotential shaping = make_potential(*kind, ctx, env.gamma());
        Policy start = ctx.pretrained;
        CriticWarmStartConfig cc = config.critic;
        cc.seed = derive_seed(ctx.summary.seed, 17);
        warm_start_critic(start, *ctx.demos, shaping, env.gamma(), cc);
        TrainResult tr = train_a2c(start, env, shaping, tc);
        run.curve = std::move(tr.curve);
        run.aborted = tr.aborted;
        run.abort_reason = tr.abort_reason;
        final_policy = std::move(tr.policy);
    } else {
        const EvalResult ev = evaluate(ctx.pretrained, env, config.train.eval_episodes,
                                       derive_seed(derive_seed(ctx.summary.seed, 15), 7));
        run.curve.push_back({0, ev.mean_return, ev.success_rate});
    }
    run.final_eval = evaluate(final_policy, env, config.final_eval_episodes, eval_seed);
    run.final_policy = std::move(final_policy);
    return run;
}

bool any_shaping(const std::vector<Variant>& vs, ShapingKind k) {
    return std::any_of(vs.begin(), vs.end(), [k](Variant v) { return shaping_of(v) == k; });
}

RunRecord run_matrix(const ExperimentConfig& config, const std::string& kind, const std::vector<Variant>& variants,
                     const std::vector<std::size_t>& ng_values) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    std::optional<OutputDir> out;
    if (!config.output_dir.empty()) {
        out.emplace(resolve_output_dir(config.output_dir));
        std::ofstream(out->file("config.ini")) << to_config_text(config);
    }

    const GridEnv env = config.make_env();
    const TrajectorySet demos = obtain_demos(config, env);
    if (!starts_in_initial_distribution(demos, env)) {
        throw ConfigError("demonstrations do not start from the env's initial distribution");
    }
    RunRecord record;
    record.kind = kind;
    record.config = config;
    record.gamma = env.gamma();
    record.demo_mean_return = demos.mean_return(env.gamma());
    record.demo_mean_length = demos.mean_length();

    const bool need_subgoals =
        any_shaping(variants, ShapingKind::Subgoal) || any_shaping(variants, ShapingKind::GatedSubgoal);
    const bool need_utility = any_shaping(variants, ShapingKind::GatedSubgoal);
    const bool need_value = any_shaping(variants, ShapingKind::Value);
    for (std::size_t ng : ng_values) {
        for (std::uint64_t seed : config.seeds) {
            SeedContext ctx = prepare_seed(config, demos, seed, ng, need_subgoals, need_utility, need_value);
            for (Variant v : variants) record.runs.push_back(run_variant(config, env, ctx, v));
            record.seeds.push_back(std::move(ctx.summary));
        }
    }
    record.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (out) {
        std::ofstream csv(out->file("curves.csv"));
        write_curves_csv(record.runs, csv, variants.size() > 1, ng_values.size() > 1);
        for (const auto& r : record.runs) {
            std::string name = "policy_" + to_string(r.variant);
            if (ng_values.size() > 1) name += "_ng" + std::to_string(r.num_subgoals);
            save_policy(r.final_policy, out->file(name + "_seed" + std::to_string(r.seed) + ".ckpt").string());
        }
        std::ofstream(out->file("summary.txt")) << summary_table(record);
        std::ofstream(out->file("run_record.txt")) << run_record_text(record);
        out->commit();
    }
    return record;
}

}  // namespace

RunRecord run_comparison(const ExperimentConfig& config) {
    return run_matrix(config, "compare", config.variants, {config.num_subgoals});
}

RunRecord run_training(const ExperimentConfig& config, Variant variant) {
    return run_matrix(config, "train", {variant}, {config.num_subgoals});
}

RunRecord run_ng_ablation(const ExperimentConfig& config) {
    return run_matrix(config, "ablate-ng", {Variant::Subgoal}, config.ng_list);
}

RunRecord run_outofset_ablation(const ExperimentConfig& config) {
    return run_matrix(config, "ablate-oos", {Variant::Subgoal, Variant::GatedSubgoal}, {config.num_subgoals});
}

// ---------------------------------------------------------------------------
// Artifacts

void write_curves_csv(const std::vector<VariantRun>& runs, std::ostream& out, bool with_variant, bool with_ng) {
    if (with_variant) out << "variant,";
    if (with_ng) out << "n_g,";
    out << "env_steps,seed,mean_return,success_rate\n";
    for (const auto& run : runs) {
        for (const auto& p : run.curve) {
            if (with_variant) out << to_string(run.variant) << ',';
            if (with_ng) out << run.num_subgoals << ',';
            out << p.env_steps << ',' << run.seed << ',' << format_double(p.mean_return) << ','
                << format_double(p.success_rate) << '\n';
        }
    }
}

std::string summary_table(const RunRecord& record) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "kind " << record.kind << "  env " << to_string(record.config.env) << "  seeds " << record.config.seeds.size()
        << "\n";
    out << "demo corpus: mean return " << record.demo_mean_return << ", mean length " << record.demo_mean_length
        << "\n\n";
    out << std::left << std::setw(16) << "variant" << std::setw(6) << "n_g" << std::setw(18) << "median success"
        << std::setw(24) << "final return (mean+-sd)" << "auc (mean)\n";
    std::vector<std::pair<Variant, std::size_t>> keys;
    for (const auto& r : record.runs) {
        const std::pair<Variant, std::size_t> k{r.variant, r.num_subgoals};
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    for (const auto& [v, ng] : keys) {
        std::vector<double> success, ret, auc;
        for (const VariantRun* r : record.select(v, ng)) {
            success.push_back(r->final_eval.success_rate);
            ret.push_back(r->final_eval.mean_return);
            auc.push_back(curve_auc(r->curve));
        }
        std::ostringstream rs;
        rs << std::fixed << std::setprecision(4) << mean(ret) << " +- " << stddev(ret);
        out << std::setw(16) << to_string(v) << std::setw(6) << ng << std::setw(18) << median(success) << std::setw(24)
            << rs.str() << mean(auc) << "\n";
    }
    return out.str();
}

std::string run_record_text(const RunRecord& record) {
    std::ostringstream out;
    out << "version " << record.version << "\n"
        << "kind " << record.kind << "\n"
        << "gamma " << format_double(record.gamma) << "\n"
        << "wall_clock_seconds " << std::fixed << std::setprecision(3) << record.wall_clock_seconds << "\n"
        << std::defaultfloat << "demo_mean_return " << format_double(record.demo_mean_return) << "\n"
        << "demo_mean_length " << format_double(record.demo_mean_length) << "\n";
    for (const auto& s : record.seeds) {
        out << "seed " << s.seed << " n_g " << s.num_subgoals << " discover_iterations " << s.discover_iterations
            << " converged " << (s.discover_converged ? 1 : 0) << " delta " << format_double(s.delta)
            << " pretrain_accuracy " << format_double(s.pretrain_accuracy) << " label_counts";
        for (std::size_t c : s.label_counts) out << ' ' << c;
        out << "\n";
        for (const auto& w : s.warnings) out << "  warning " << w << "\n";
    }
    for (const auto& r : record.runs) {
        out << "run " << to_string(r.variant) << " seed " << r.seed << " n_g " << r.num_subgoals << " final_success "
            << format_double(r.final_eval.success_rate) << " final_return " << format_double(r.final_eval.mean_return)
            << " auc " << format_double(curve_auc(r.curve));
        if (r.aborted) out << " aborted \"" << r.abort_reason << '"';
        out << "\n";
    }
    out << "\n[config]\n" << to_config_text(record.config);
    return out.str();
}

std::filesystem::path resolve_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
            return std::filesystem::path(root) / p;
        }
    }
    return p;
}

OutputDir::OutputDir(const std::filesystem::path& path) : path_(path) {
    std::filesystem::create_directories(path_);
    std::ofstream marker(path_ / kInProgressMarker);
    if (!marker) throw std::runtime_error("cannot write into output directory " + path_.string());
    marker << "incomplete run; outputs here are partial\n";
}

void OutputDir::commit() { std::filesystem::remove(path_ / kInProgressMarker); }

// ---------------------------------------------------------------------------
// Partition maps

PartitionMap render_partition_map(const Mlp& predictor, const GridEnv& env) {
    if (predictor.head() != OutputHead::Softmax) throw ContractError("partition map needs a softmax predictor");
    if (predictor.input_dim() != env.state_dim()) throw ShapeError("predictor input does not match the env encoding");
    PartitionMap map;
    map.rows = env.rows();
    map.cols = env.cols();
    map.num_subgoals = predictor.output_dim();
    map.index.assign(static_cast<std::size_t>(map.rows * map.cols), -1);
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            const Cell cell{r, c};
            if (!env.is_reachable(cell)) continue;
            const std::vector<double> p = predictor.forward(env.encode(cell));
            map.index[static_cast<std::size_t>(r * map.cols + c)] =
                static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        }
    }
    // Walls are marked with -2 so ascii() can tell them from unreachable floor.
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (env.is_wall({r, c})) map.index[static_cast<std::size_t>(r * map.cols + c)] = -2;
        }
    }
    return map;
}

std::string PartitionMap::ascii() const {
    std::string out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int i = at({r, c});
            if (i == -2) out += '#';
            else if (i < 0) out += ' ';
            else if (i < 10) out += static_cast<char>('0' + i);
            else out += static_cast<char>('a' + (i - 10) % 26);
        }
        out += '\n';
    }
    return out;
}

std::string PartitionMap::pgm() const {
    std::ostringstream out;
    out << "P2\n" << cols << ' ' << rows << "\n255\n";
    const double levels = static_cast<double>(std::max<std::size_t>(num_subgoals, 1));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int i = at({r, c});
            int gray = 0;
            if (i == -1) gray = 255;
            else if (i >= 0) gray = 64 + static_cast<int>(std::lround(160.0 * (i + 1) / levels));
            out << gray << (c + 1 == cols ? '\n' : ' ');
        }
    }
    return out.str();
}

}  // namespace sgf
