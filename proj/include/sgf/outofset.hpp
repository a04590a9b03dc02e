#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sgf/approximator.hpp"
#include "sgf/trajectory.hpp"

namespace sgf {

/// One-class utility u(s) = ||f(s) - c||^2. Low values mean "looks like the
/// demonstrations". The embedding net has no bias terms and c stays fixed.
class UtilityModel {
public:
    UtilityModel() = default;
    UtilityModel(Mlp net, std::vector<double> center, double delta, double lambda);

    double utility(std::span<const double> state) const;
    bool in_set(std::span<const double> state) const { return utility(state) <= delta_; }

    const Mlp& net() const noexcept { return net_; }
    const std::vector<double>& center() const noexcept { return center_; }
    double delta() const noexcept { return delta_; }
    double lambda() const noexcept { return lambda_; }
    std::size_t embedding_dim() const noexcept { return center_.size(); }

    /// Overrides the in-set threshold; +infinity disables gating.
    void set_delta(double delta);

private:
    Mlp net_;
    std::vector<double> center_;
    double delta_ = 0.0;
    double lambda_ = 0.0;
};

struct UtilityConfig {
    std::size_t embedding_dim = 16;
    double lambda = 1e-4;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::vector<std::size_t> hidden{64, 64};
    /// delta is set to this quantile of the training utilities.
    double delta_quantile = 0.99;
    std::uint64_t seed = 0;
};

struct UtilityFit {
    UtilityModel model;
    std::vector<double> loss_history;
    /// Number of re-initializations forced by the collapse guard.
    std::size_t reinitializations = 0;
};

/// Minimizes mean ||f(s) - c||^2 + lambda ||psi||^2 over every state of the set.
/// c is the mean embedding of the untrained net; delta is the configured
/// quantile of the trained utilities over the set.
UtilityFit fit_utility(const TrajectorySet& set, const UtilityConfig& config);

/// Linear-interpolation quantile of `values` at q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Area under the ROC curve for `negatives` (expected low) vs `positives`
/// (expected high), ties counted as one half.
double roc_auc(std::span<const double> negatives, std::span<const double> positives);

void save_utility(const UtilityModel& model, std::ostream& out);
UtilityModel load_utility(std::istream& in);
void save_utility(const UtilityModel& model, const std::string& path);
UtilityModel load_utility(const std::string& path);

}  // namespace sgf
