#include "sgf/outofset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace sgf {

UtilityModel::UtilityModel(Mlp net, std::vector<double> center, double delta, double lambda)
    : net_(std::move(net)), center_(std::move(center)), delta_(delta), lambda_(lambda) {
    if (net_.head() != OutputHead::Linear) throw ContractError("utility embedding needs a linear head");
    if (net_.output_dim() != center_.size()) throw ShapeError("center dimension does not match the embedding");
    if (std::isnan(delta_) || delta_ < 0.0) throw ContractError("delta must be non-negative");
}

double UtilityModel::utility(std::span<const double> state) const {
    const std::vector<double> f = net_.forward(state);
    double u = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double e = f[k] - center_[k];
        u += e * e;
    }
    return u;
}

void UtilityModel::set_delta(double delta) {
    if (std::isnan(delta) || delta < 0.0) throw ContractError("delta must be non-negative");
    delta_ = delta;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ContractError("quantile of an empty sample");
    if (q < 0.0 || q > 1.0) throw ContractError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double roc_auc(std::span<const double> negatives, std::span<const double> positives) {
    if (negatives.empty() || positives.empty()) throw ContractError("AUC needs both classes");
    double score = 0.0;
    for (double p : positives) {
        for (double n : negatives) {
            if (p > n) score += 1.0;
            else if (p == n) score += 0.5;
        }
    }
    return score / (static_cast<double>(negatives.size()) * static_cast<double>(positives.size()));
}

UtilityFit fit_utility(const TrajectorySet& set, const UtilityConfig& config) {
    if (set.empty()) throw ContractError("cannot fit a utility model to an empty set");
    if (config.embedding_dim < 2) throw ContractError("embedding dimension m must be at least 2");
    if (config.lambda < 0.0) throw ContractError("lambda must be non-negative");

    std::vector<std::vector<double>> states;
    states.reserve(set.total_states());
    for (const Trajectory& t : set.trajectories()) {
        for (const TrajectoryStep& s : t.steps) states.push_back(s.state);
    }

    std::vector<std::size_t> dims{set.state_dim()};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(config.embedding_dim);

    UtilityFit fit;
    Mlp net;
    std::vector<double> center;
    constexpr std::size_t kMaxAttempts = 10;
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt == kMaxAttempts) {
            throw NumericError("utility embedding collapsed at initialization on every attempt");
        }
        net = Mlp::xavier(dims, OutputHead::Linear, derive_seed(config.seed, attempt), /*with_bias=*/false);
        center.assign(config.embedding_dim, 0.0);
        for (const auto& s : states) {
            const std::vector<double> f = net.forward(s);
            for (std::size_t k = 0; k < f.size(); ++k) center[k] += f[k];
        }
        for (double& c : center) c /= static_cast<double>(states.size());
        double spread = 0.0;
        for (const auto& s : states) spread += UtilityModel(net, center, 0.0, 0.0).utility(s);
        spread /= static_cast<double>(states.size());
        if (spread >= 1e-8) break;
        ++fit.reinitializations;
    }

    std::vector<Loss> losses(states.size(), SvddLoss{center});
    GradientStep step;
    step.learning_rate = config.learning_rate;
    step.l2 = config.lambda;
    Rng rng(derive_seed(config.seed, 1000));
    fit.loss_history = fit_minibatch(net, states, losses, config.epochs, config.batch_size, step, rng);

    UtilityModel model(std::move(net), std::move(center), 0.0, config.lambda);
    std::vector<double> train_u;
    train_u.reserve(states.size());
    for (const auto& s : states) train_u.push_back(model.utility(s));
    model.set_delta(quantile(std::move(train_u), config.delta_quantile));
    fit.model = std::move(model);
    return fit;
}

void save_utility(const UtilityModel& model, std::ostream& out) {
    out << "UTILCKPT v1\ncenter";
    for (double c : model.center()) out << ' ' << format_double(c);
    out << "\ndelta " << format_double(model.delta()) << "\nlambda " << format_double(model.lambda()) << '\n';
    save_mlp(model.net(), out);
}

UtilityModel load_utility(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> std::string& {
        if (!std::getline(in, line)) throw ParseError("unexpected end of utility checkpoint", lineno + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next() != "UTILCKPT v1") throw ParseError("missing 'UTILCKPT v1' header", lineno);
    auto keyed_values = [&](const std::string& key) {
        std::istringstream ss(next());
        std::string k;
        ss >> k;
        if (k != key) throw ParseError("expected " + key, lineno);
        std::vector<double> vals;
        for (std::string tok; ss >> tok;) {
            try {
                vals.push_back(parse_double(tok));
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), lineno);
            }
        }
        return vals;
    };
    std::vector<double> center = keyed_values("center");
    const std::vector<double> delta = keyed_values("delta");
    const std::vector<double> lambda = keyed_values("lambda");
    if (delta.size() != 1 || lambda.size() != 1) throw ParseError("delta and lambda take one value", lineno);
    Mlp net = load_mlp(in);
    return UtilityModel(std::move(net), std::move(center), delta[0], lambda[0]);
}

void save_utility(const UtilityModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save_utility(model, out);
}

UtilityModel load_utility(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return load_utility(in);
}

}  // namespace sgf
