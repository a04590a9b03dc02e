#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "sgf/approximator.hpp"
#include "sgf/envs.hpp"
#include "sgf/outofset.hpp"
#include "sgf/rl.hpp"
#include "sgf/shaping.hpp"
#include "sgf/subgoal.hpp"
#include "sgf/trajectory.hpp"

namespace sgf {

inline constexpr const char* kVersion = "subgoal-forge 0.1.0";
inline constexpr const char* kOutputRootEnv = "SGF_OUTPUT_ROOT";
inline constexpr const char* kInProgressMarker = "IN_PROGRESS";

/// One arm of an experiment. PretrainOnly evaluates the cloned policy with no
/// RL steps; the others run A2C with the named potential.
enum class Variant { PretrainOnly, None, Value, Subgoal, GatedSubgoal };

std::string to_string(Variant v);
Variant parse_variant(std::string_view text);
std::optional<ShapingKind> shaping_of(Variant v);

struct DemoSpec {
    /// Existing trajectory file; when empty the corpus is generated.
    std::string path;
    std::size_t count = 50;
    double noise = 0.3;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    EnvName env = EnvName::UMaze;
    Encoding encoding = Encoding::NormalizedXy;
    /// 0 keeps the env default.
    std::size_t step_cap = 0;
    DemoSpec demos;
    std::size_t num_subgoals = 4;
    std::vector<std::size_t> ng_list{2, 3, 4, 5};
    std::vector<Variant> variants{Variant::PretrainOnly, Variant::None, Variant::Value, Variant::Subgoal,
                                  Variant::GatedSubgoal};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string output_dir;

    DiscoverConfig discover;
    UtilityConfig utility;
    ValueBaselineConfig value;
    PretrainConfig pretrain;
    CriticWarmStartConfig critic;
    TrainConfig train;
    std::vector<std::size_t> policy_hidden{64, 64};
    std::size_t final_eval_episodes = 100;

    /// Throws ConfigError on the first violated invariant, including a demo
    /// path that does not exist.
    void validate() const;
    GridEnv make_env() const;
};

/// Flat key=value text with [section] headers; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
std::string to_config_text(const ExperimentConfig& config);

struct VariantRun {
    Variant variant = Variant::None;
    std::uint64_t seed = 0;
    std::size_t num_subgoals = 0;
    std::vector<CurvePoint> curve;
    EvalResult final_eval;
    Policy final_policy;
    bool aborted = false;
    std::string abort_reason;
};

/// What discovery and the utility fit produced for one seed.
struct SeedSummary {
    std::uint64_t seed = 0;
    std::size_t num_subgoals = 0;
    std::size_t discover_iterations = 0;
    bool discover_converged = false;
    /// States per sub-goal in the final labeling.
    std::vector<std::size_t> label_counts;
    double delta = 0.0;
    double pretrain_accuracy = 0.0;
    std::vector<std::string> warnings;
};

struct RunRecord {
    std::string kind;
    ExperimentConfig config;
    double gamma = 0.0;
    double demo_mean_return = 0.0;
    double demo_mean_length = 0.0;
    std::vector<SeedSummary> seeds;
    std::vector<VariantRun> runs;
    double wall_clock_seconds = 0.0;
    std::string version = kVersion;

    /// Runs of one variant (and sub-goal count, when non-zero).
    std::vector<const VariantRun*> select(Variant v, std::size_t num_subgoals = 0) const;
};

/// Full pipeline per seed: discover, fit utility, fit value baseline,
/// pretrain, then one A2C run per variant.
RunRecord run_comparison(const ExperimentConfig& config);
/// One variant at config.num_subgoals; curves.csv carries no variant column.
RunRecord run_training(const ExperimentConfig& config, Variant variant);
/// Sweeps config.ng_list with shaping=subgoal.
RunRecord run_ng_ablation(const ExperimentConfig& config);
/// subgoal vs gated_subgoal on the same demos and seeds.
RunRecord run_outofset_ablation(const ExperimentConfig& config);

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
double stddev(const std::vector<double>& values);
/// Trapezoidal area under mean_return over env_steps, divided by the step span.
double curve_auc(const std::vector<CurvePoint>& curve);

/// `curves.csv`: env_steps,seed,mean_return,success_rate, with leading
/// variant (and n_g) columns when requested.
void write_curves_csv(const std::vector<VariantRun>& runs, std::ostream& out, bool with_variant, bool with_ng);
std::string summary_table(const RunRecord& record);
std::string run_record_text(const RunRecord& record);

/// Resolves `dir` against $SGF_OUTPUT_ROOT when that is set and `dir` is relative.
std::filesystem::path resolve_output_dir(const std::string& dir);

/// Creates the directory with an in-progress marker; commit() removes it.
class OutputDir {
public:
    explicit OutputDir(const std::filesystem::path& path);
    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }
    void commit();

private:
    std::filesystem::path path_;
};

struct PartitionMap {
    int rows = 0;
    int cols = 0;
    /// Argmax sub-goal per cell; -2 marks walls, -1 unreachable floor.
    std::vector<int> index;
    std::size_t num_subgoals = 0;

    int at(Cell c) const { return index[static_cast<std::size_t>(c.row * cols + c.col)]; }
    /// One character per cell: the index digit ('a'.. past 9), '#' for walls, ' ' for unreachable.
    std::string ascii() const;
    /// Plain P2 graymap; walls black, sub-goals evenly spaced grays.
    std::string pgm() const;
};

PartitionMap render_partition_map(const Mlp& predictor, const GridEnv& env);

}  // namespace sgf
