#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sgf/approximator.hpp"
#include "sgf/trajectory.hpp"

namespace sgf {

/// Per-state sub-goal labels (1-based, G = {1..n_g}) for every trajectory of a
/// set, in the set's trajectory order.
struct SubgoalLabeling {
    std::vector<std::vector<int>> labels;
    std::size_t num_subgoals = 0;
    int generation = 0;
    std::vector<std::string> warnings;

    std::size_t total_states() const noexcept;
};

/// |g^k != g^{k+1}| / N. Both labelings must cover the same set.
double changed_fraction(const SubgoalLabeling& a, const SubgoalLabeling& b);

/// Classifier state -> p.m.f. over n_g sub-goals. Entry j of the p.m.f.
/// belongs to sub-goal j + 1.
class SubgoalPredictor {
public:
    SubgoalPredictor() = default;
    SubgoalPredictor(std::size_t state_dim, std::size_t num_subgoals, std::uint64_t seed,
                     const std::vector<std::size_t>& hidden = {64, 64});
    explicit SubgoalPredictor(Mlp net);

    std::vector<double> predict(std::span<const double> state) const { return net_.forward(state); }
    /// 0-based argmax of the p.m.f.; ties go to the lower index.
    std::size_t argmax(std::span<const double> state) const;

    std::size_t num_subgoals() const noexcept { return net_.output_dim(); }
    const Mlp& net() const noexcept { return net_; }

private:
    Mlp net_;
};

/// Equipartition labels for a trajectory of n_i states: state t (1-based) gets
/// label j iff floor((j-1) n_i / n_g) < t <= floor(j n_i / n_g).
std::vector<int> equipartition_labels(std::size_t n_i, std::size_t n_g);
SubgoalLabeling equipartition_init(const TrajectorySet& set, std::size_t n_g);

struct LearningConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 3e-3;
    std::uint64_t seed = 0;
};

/// Mean cross-entropy of the predictor over all N labelled states.
double mean_cross_entropy(const SubgoalPredictor& predictor, const TrajectorySet& set,
                          const SubgoalLabeling& labeling);

/// Minibatch Adam on the mean cross-entropy, warm-starting from `predictor`
/// with fresh optimizer moments. Samples are visited in (episode_id, t) order
/// before shuffling so the result does not depend on trajectory order.
SubgoalPredictor learning_step(const TrajectorySet& set, const SubgoalLabeling& labeling,
                               const SubgoalPredictor& predictor, const LearningConfig& config);

struct DtwResult {
    std::vector<int> labels;  // 1-based
    double cost = 0.0;
};

/// Order-constrained alignment of a p.m.f. sequence against the basis
/// vectors e_1..e_G under l1 cost. Labels start at 1, end at G and advance by
/// 0 or 1 per step. Among equal-cost labelings the lexicographically smallest
/// is returned. Throws InferenceError when fewer states than sub-goals.
DtwResult dtw_align(const std::vector<std::vector<double>>& pmfs);
DtwResult dtw_infer(const SubgoalPredictor& predictor, const Trajectory& trajectory);

/// l1 distance between a p.m.f. and basis vector e_{label} (label 1-based).
double basis_l1_cost(std::span<const double> pmf, int label);

struct DiscoverConfig {
    std::size_t num_subgoals = 4;
    double epsilon = 0.01;
    std::size_t max_iters = 20;
    LearningConfig learning{};
    std::vector<std::size_t> hidden{64, 64};
    std::uint64_t seed = 0;
};

struct DiscoverResult {
    SubgoalPredictor predictor;
    SubgoalLabeling labeling;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> change_history;
    std::vector<std::string> warnings;
};

/// Alternates learning_step and dtw_infer from the equipartition labels until
/// the changed-label fraction drops below epsilon or max_iters is hit.
DiscoverResult discover(const TrajectorySet& set, const DiscoverConfig& config);

/// Synthetic corpus whose trajectories walk through `segments` Gaussian
/// clusters in order. Ground-truth labels are returned alongside.
struct PlantedCorpusConfig {
    std::size_t segments = 3;
    double noise = 0.1;
    std::size_t count = 40;
    std::size_t min_segment_length = 3;
    std::size_t max_segment_length = 12;
    /// Probability that a state is drawn from the previous or next cluster
    /// while keeping its planted label (an order violation).
    double order_violation = 0.0;
    std::uint64_t seed = 0;
};

struct PlantedCorpus {
    TrajectorySet set;
    std::vector<std::vector<int>> planted;  // 1-based
};

PlantedCorpus planted_corpus(const PlantedCorpusConfig& config);

/// Fraction of states whose label equals the planted one, counting only states
/// whose planted label matches both temporal neighbours.
double planted_agreement(const SubgoalLabeling& labeling, const std::vector<std::vector<int>>& planted);

/// CSV with columns episode_id, t, label.
void save_labels(const TrajectorySet& set, const SubgoalLabeling& labeling, std::ostream& out);
void save_labels(const TrajectorySet& set, const SubgoalLabeling& labeling, const std::string& path);

}  // namespace sgf
