#include "sgf/subgoal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

namespace sgf {

std::size_t SubgoalLabeling::total_states() const noexcept {
    std::size_t n = 0;
    for (const auto& l : labels) n += l.size();
    return n;
}

double changed_fraction(const SubgoalLabeling& a, const SubgoalLabeling& b) {
    if (a.labels.size() != b.labels.size()) throw ContractError("labelings cover different trajectory counts");
    std::size_t changed = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        if (a.labels[i].size() != b.labels[i].size()) throw ContractError("labelings differ in trajectory length");
        for (std::size_t t = 0; t < a.labels[i].size(); ++t) changed += a.labels[i][t] != b.labels[i][t];
        total += a.labels[i].size();
    }
    return total == 0 ? 0.0 : static_cast<double>(changed) / static_cast<double>(total);
}

SubgoalPredictor::SubgoalPredictor(std::size_t state_dim, std::size_t num_subgoals, std::uint64_t seed,
                                   const std::vector<std::size_t>& hidden) {
    if (num_subgoals < 2) throw ContractError("a sub-goal predictor needs n_g >= 2");
    std::vector<std::size_t> dims{state_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(num_subgoals);
    net_ = Mlp::xavier(std::move(dims), OutputHead::Softmax, seed);
}

SubgoalPredictor::SubgoalPredictor(Mlp net) : net_(std::move(net)) {
    if (net_.head() != OutputHead::Softmax) throw ContractError("a sub-goal predictor needs a softmax head");
}

std::size_t SubgoalPredictor::argmax(std::span<const double> state) const {
    const std::vector<double> p = predict(state);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> equipartition_labels(std::size_t n_i, std::size_t n_g) {
    if (n_g < 2) throw ContractError("equipartition needs n_g >= 2");
    std::vector<int> labels(n_i, 0);
    for (std::size_t j = 1; j <= n_g; ++j) {
        const std::size_t lo = (j - 1) * n_i / n_g;
        const std::size_t hi = j * n_i / n_g;
        for (std::size_t t = lo + 1; t <= hi; ++t) labels[t - 1] = static_cast<int>(j);
    }
    return labels;
}

SubgoalLabeling equipartition_init(const TrajectorySet& set, std::size_t n_g) {
    SubgoalLabeling labeling;
    labeling.num_subgoals = n_g;
    labeling.generation = 0;
    for (const Trajectory& t : set.trajectories()) {
        labeling.labels.push_back(equipartition_labels(t.size(), n_g));
        if (t.size() < n_g) {
            labeling.warnings.push_back("trajectory " + std::to_string(t.episode_id) + " has " +
                                        std::to_string(t.size()) + " states for " + std::to_string(n_g) +
                                        " sub-goals; some sub-goals get no state");
        }
    }
    return labeling;
}

namespace {

void check_coverage(const TrajectorySet& set, const SubgoalLabeling& labeling) {
    if (labeling.labels.size() != set.size()) throw ContractError("labeling does not cover every trajectory");
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (labeling.labels[i].size() != set[i].size()) {
            throw ContractError("labeling does not cover every state of trajectory " +
                                std::to_string(set[i].episode_id));
        }
        for (int l : labeling.labels[i]) {
            if (l < 1 || static_cast<std::size_t>(l) > labeling.num_subgoals) {
                throw ContractError("label " + std::to_string(l) + " outside 1.." +
                                    std::to_string(labeling.num_subgoals));
            }
        }
    }
}

// Trajectory indices sorted by episode id, so datasets are built in a
// canonical order regardless of how the set was assembled.
std::vector<std::size_t> canonical_order(const TrajectorySet& set) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return set[a].episode_id < set[b].episode_id; });
    return order;
}

}  // namespace

double mean_cross_entropy(const SubgoalPredictor& predictor, const TrajectorySet& set,
                          const SubgoalLabeling& labeling) {
    check_coverage(set, labeling);
    double total = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t t = 0; t < set[i].size(); ++t) {
            const auto target = static_cast<std::size_t>(labeling.labels[i][t] - 1);
            total += loss_value(predictor.net(), set[i].steps[t].state, CrossEntropyLoss{target});
        }
    }
    return total / static_cast<double>(set.total_states());
}

SubgoalPredictor learning_step(const TrajectorySet& set, const SubgoalLabeling& labeling,
                               const SubgoalPredictor& predictor, const LearningConfig& config) {
    check_coverage(set, labeling);
    if (predictor.num_subgoals() != labeling.num_subgoals) {
        throw ContractError("predictor width does not match the labeling's n_g");
    }
    std::vector<std::vector<double>> inputs;
    std::vector<Loss> losses;
    inputs.reserve(set.total_states());
    losses.reserve(set.total_states());
    for (std::size_t i : canonical_order(set)) {
        for (std::size_t t = 0; t < set[i].size(); ++t) {
            inputs.push_back(set[i].steps[t].state);
            losses.emplace_back(CrossEntropyLoss{static_cast<std::size_t>(labeling.labels[i][t] - 1)});
        }
    }
    Mlp net = predictor.net();
    GradientStep step;
    step.learning_rate = config.learning_rate;
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(labeling.generation)));
    fit_minibatch(net, inputs, losses, config.epochs, config.batch_size, step, rng);
    return SubgoalPredictor(std::move(net));
}

double basis_l1_cost(std::span<const double> pmf, int label) {
    double c = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        const double target = static_cast<int>(k) + 1 == label ? 1.0 : 0.0;
        c += std::abs(pmf[k] - target);
    }
    return c;
}

DtwResult dtw_align(const std::vector<std::vector<double>>& pmfs) {
    const std::size_t n = pmfs.size();
    if (n == 0) throw InferenceError("cannot align an empty trajectory");
    const std::size_t g = pmfs.front().size();
    if (g == 0) throw InferenceError("empty p.m.f.");
    if (n < g) {
        throw InferenceError(std::to_string(n) + " states cannot visit all " + std::to_string(g) +
                             " sub-goals in order");
    }
    for (const auto& p : pmfs) {
        if (p.size() != g) throw InferenceError("p.m.f. sequence has inconsistent widths");
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    // togo[t * g + j]: cheapest cost of states t..n-1 given label j+1 at time t.
    std::vector<double> cost(n * g);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < g; ++j) cost[t * g + j] = basis_l1_cost(pmfs[t], static_cast<int>(j) + 1);
    }
    std::vector<double> togo(n * g, inf);
    togo[(n - 1) * g + (g - 1)] = cost[(n - 1) * g + (g - 1)];
    for (std::size_t t = n - 1; t-- > 0;) {
        // Label j at time t is feasible iff j <= t and the remaining steps can still reach g-1.
        const std::size_t jmin = (g - 1) > (n - 1 - t) ? (g - 1) - (n - 1 - t) : 0;
        const std::size_t jmax = std::min(t, g - 1);
        for (std::size_t j = jmin; j <= jmax; ++j) {
            double best = togo[(t + 1) * g + j];
            if (j + 1 < g) best = std::min(best, togo[(t + 1) * g + j + 1]);
            togo[t * g + j] = cost[t * g + j] + best;
        }
    }

    DtwResult res;
    res.labels.resize(n);
    std::size_t j = 0;
    res.labels[0] = 1;
    res.cost = cost[0];
    for (std::size_t t = 1; t < n; ++t) {
        const double stay = togo[t * g + j];
        const double advance = j + 1 < g ? togo[t * g + j + 1] : inf;
        if (advance < stay) ++j;
        res.labels[t] = static_cast<int>(j) + 1;
        res.cost += cost[t * g + j];
    }
    return res;
}

DtwResult dtw_infer(const SubgoalPredictor& predictor, const Trajectory& trajectory) {
    std::vector<std::vector<double>> pmfs;
    pmfs.reserve(trajectory.size());
    for (const TrajectoryStep& s : trajectory.steps) pmfs.push_back(predictor.predict(s.state));
    return dtw_align(pmfs);
}

DiscoverResult discover(const TrajectorySet& set, const DiscoverConfig& config) {
    if (set.empty()) throw ContractError("cannot discover sub-goals from an empty trajectory set");
    if (config.num_subgoals < 2) throw ContractError("discover needs n_g >= 2");
    if (!(config.epsilon > 0.0 && config.epsilon <= 1.0)) throw ContractError("epsilon must lie in (0, 1]");
    if (config.max_iters == 0) throw ContractError("max_iters must be positive");

    DiscoverResult out;
    SubgoalLabeling labels = equipartition_init(set, config.num_subgoals);
    out.warnings = labels.warnings;
    SubgoalPredictor predictor(set.state_dim(), config.num_subgoals, derive_seed(config.seed, 1), config.hidden);
    LearningConfig learning = config.learning;
    learning.seed = derive_seed(config.seed, 2);

    for (std::size_t k = 0; k < config.max_iters; ++k) {
        predictor = learning_step(set, labels, predictor, learning);
        SubgoalLabeling next;
        next.num_subgoals = config.num_subgoals;
        next.generation = labels.generation + 1;
        next.labels.reserve(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) {
            try {
                next.labels.push_back(dtw_infer(predictor, set[i]).labels);
            } catch (const InferenceError& e) {
                next.labels.push_back(labels.labels[i]);
                if (k == 0) {
                    out.warnings.push_back("trajectory " + std::to_string(set[i].episode_id) +
                                           " skipped during inference: " + e.what());
                }
            }
        }
        const double change = changed_fraction(labels, next);
        out.change_history.push_back(change);
        labels = std::move(next);
        out.iterations = k + 1;
        if (change < config.epsilon) {
            out.converged = true;
            break;
        }
    }
    labels.warnings = out.warnings;
    out.predictor = std::move(predictor);
    out.labeling = std::move(labels);
    return out;
}

PlantedCorpus planted_corpus(const PlantedCorpusConfig& config) {
    if (config.segments < 2) throw ContractError("a planted corpus needs at least two segments");
    if (config.min_segment_length == 0 || config.max_segment_length < config.min_segment_length) {
        throw ContractError("invalid segment length range");
    }
    Rng rng(config.seed);
    std::normal_distribution<double> jitter(0.0, config.noise);
    std::uniform_int_distribution<std::size_t> length(config.min_segment_length, config.max_segment_length);
    PlantedCorpus corpus{TrajectorySet(2), {}};
    // Cluster centers sit one unit apart on a line.
    for (std::size_t i = 0; i < config.count; ++i) {
        Trajectory traj;
        traj.episode_id = static_cast<long>(i);
        traj.terminal_reached = true;
        std::vector<int> planted;
        for (std::size_t seg = 0; seg < config.segments; ++seg) {
            const std::size_t len = length(rng);
            for (std::size_t t = 0; t < len; ++t) {
                double center = static_cast<double>(seg);
                if (config.order_violation > 0.0 && uniform01(rng) < config.order_violation) {
                    const bool back = seg > 0 && (seg + 1 == config.segments || uniform01(rng) < 0.5);
                    center += back ? -1.0 : 1.0;
                }
                traj.steps.push_back({{center + jitter(rng), jitter(rng)}, Action::Noop});
                planted.push_back(static_cast<int>(seg) + 1);
            }
        }
        corpus.set.add(std::move(traj));
        corpus.planted.push_back(std::move(planted));
    }
    return corpus;
}

double planted_agreement(const SubgoalLabeling& labeling, const std::vector<std::vector<int>>& planted) {
    if (labeling.labels.size() != planted.size()) throw ContractError("planted labels cover a different set");
    std::size_t agree = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < planted.size(); ++i) {
        const auto& p = planted[i];
        if (labeling.labels[i].size() != p.size()) throw ContractError("planted labels differ in length");
        for (std::size_t t = 0; t < p.size(); ++t) {
            const bool boundary = (t > 0 && p[t - 1] != p[t]) || (t + 1 < p.size() && p[t + 1] != p[t]);
            if (boundary) continue;
            ++counted;
            agree += labeling.labels[i][t] == p[t];
        }
    }
    return counted == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(counted);
}

void save_labels(const TrajectorySet& set, const SubgoalLabeling& labeling, std::ostream& out) {
    check_coverage(set, labeling);
    out << "episode_id,t,label\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t t = 0; t < set[i].size(); ++t) {
            out << set[i].episode_id << ',' << t << ',' << labeling.labels[i][t] << '\n';
        }
    }
}

void save_labels(const TrajectorySet& set, const SubgoalLabeling& labeling, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save_labels(set, labeling, out);
}

}  // namespace sgf
