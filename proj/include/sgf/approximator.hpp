#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sgf/common.hpp"

namespace sgf {

enum class OutputHead { Linear, Softmax };

std::string to_string(OutputHead head);
OutputHead parse_output_head(const std::string& text);

/// Feed-forward network with tanh hidden layers.
///
/// Parameters live in one flat buffer. Layer l occupies a row-major
/// (out x in) weight block followed by its bias vector (when biases are
/// enabled). Gradients use the identical layout.
class Mlp {
public:
    Mlp() = default;

    /// All-zero parameters.
    Mlp(std::vector<std::size_t> layer_dims, OutputHead head, bool with_bias = true);

    /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
    static Mlp xavier(std::vector<std::size_t> layer_dims, OutputHead head, std::uint64_t seed,
                      bool with_bias = true);

    const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    std::size_t input_dim() const noexcept { return dims_.front(); }
    std::size_t output_dim() const noexcept { return dims_.back(); }
    std::size_t num_layers() const noexcept { return dims_.size() - 1; }
    OutputHead head() const noexcept { return head_; }
    bool has_bias() const noexcept { return bias_; }

    std::size_t param_count() const noexcept { return params_.size(); }
    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }

    double weight(std::size_t layer, std::size_t row, std::size_t col) const;
    double bias(std::size_t layer, std::size_t row) const;
    std::size_t weight_offset(std::size_t layer) const { return w_off_.at(layer); }
    std::size_t bias_offset(std::size_t layer) const { return b_off_.at(layer); }

    /// Human-readable location of a flat parameter index, e.g. "layer 1 weight[3,0]".
    std::string param_path(std::size_t flat_index) const;

    /// Output of the network; a valid p.m.f. for the softmax head.
    std::vector<double> forward(std::span<const double> x) const;

    /// Pre-head outputs of the last layer.
    std::vector<double> logits(std::span<const double> x) const;

    /// Squared l2 norm of every parameter.
    double l2_norm_sq() const noexcept;

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    friend struct MlpTape;
    void check_input(std::span<const double> x) const;

    std::vector<std::size_t> dims_;
    OutputHead head_ = OutputHead::Linear;
    bool bias_ = true;
    std::vector<double> params_;
    std::vector<std::size_t> w_off_;
    std::vector<std::size_t> b_off_;
};

// Loss kinds. Cross-entropy and policy-gradient act on the logits of a softmax
// head; mse and svdd act on the raw output of a linear head.
struct CrossEntropyLoss {
    std::size_t target = 0;
    double weight = 1.0;
};
struct MseLoss {
    std::vector<double> target;
};
struct SvddLoss {
    std::vector<double> center;
};
/// -advantage * log pi(action) - entropy_coef * H(pi)
struct PolicyGradientLoss {
    std::size_t action = 0;
    double advantage = 0.0;
    double entropy_coef = 0.0;
};
using Loss = std::variant<CrossEntropyLoss, MseLoss, SvddLoss, PolicyGradientLoss>;

struct Gradients {
    std::vector<double> values;

    Gradients() = default;
    explicit Gradients(const Mlp& net) : values(net.param_count(), 0.0) {}
    void zero() { std::fill(values.begin(), values.end(), 0.0); }
    double norm() const;
    void scale(double factor);
};

/// Per-sample loss value (no l2 term).
double loss_value(const Mlp& net, std::span<const double> x, const Loss& loss);

/// Adds scale * dLoss/dparams into `grads` and returns the loss value.
double accumulate_gradient(const Mlp& net, std::span<const double> x, const Loss& loss,
                           Gradients& grads, double scale = 1.0);

/// Single-sample gradient.
Gradients backward(const Mlp& net, std::span<const double> x, const Loss& loss);

struct AdamMoments {
    std::vector<double> first;
    std::vector<double> second;
    long step = 0;
};

/// Adam update with optional l2 penalty lambda * ||theta||^2 folded into the gradient.
struct GradientStep {
    double learning_rate = 1e-3;
    double l2 = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    AdamMoments moments;

    void reset_moments() { moments = {}; }
};

/// Returns the updated network; advances `step.moments`. Throws NumericError
/// naming the offending parameter when a gradient entry is not finite.
Mlp apply_step(const Mlp& net, const Gradients& grads, GradientStep& step);

/// Rescales `grads` so its l2 norm is at most max_norm. Returns the pre-clip norm.
double clip_gradient_norm(Gradients& grads, double max_norm);

/// Shuffled minibatch training: `epochs` passes over (inputs[i], losses[i]),
/// one apply_step per batch on the batch-mean gradient. Returns the mean
/// per-sample loss of each epoch (measured while training). Throws
/// NumericError on a non-finite loss.
std::vector<double> fit_minibatch(Mlp& net, const std::vector<std::vector<double>>& inputs,
                                  const std::vector<Loss>& losses, std::size_t epochs, std::size_t batch_size,
                                  GradientStep& step, Rng& rng);

void save_mlp(const Mlp& net, std::ostream& out);
Mlp load_mlp(std::istream& in);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace sgf
