#include "sgf/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sgf {

namespace {

constexpr double kProbFloor = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Numerically stable softmax and log-softmax of a logit vector.
void softmax_inplace(std::vector<double>& z, std::vector<double>* log_probs = nullptr) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    if (log_probs) {
        log_probs->resize(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            (*log_probs)[k] = std::max(z[k] - lse, std::log(kProbFloor));
        }
    }
    for (double& v : z) v = std::exp(v - lse);
}

}  // namespace

std::string to_string(OutputHead head) { return head == OutputHead::Softmax ? "softmax" : "linear"; }

OutputHead parse_output_head(const std::string& text) {
    if (text == "softmax") return OutputHead::Softmax;
    if (text == "linear") return OutputHead::Linear;
    throw ContractError("unknown output head '" + text + "'");
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, OutputHead head, bool with_bias)
    : dims_(std::move(layer_dims)), head_(head), bias_(with_bias) {
    if (dims_.size() < 2) throw ShapeError("an Mlp needs at least an input and an output dimension");
    for (std::size_t d : dims_) {
        if (d == 0) throw ShapeError("layer dimensions must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        w_off_.push_back(offset);
        offset += dims_[l] * dims_[l + 1];
        b_off_.push_back(offset);
        if (bias_) offset += dims_[l + 1];
    }
    params_.assign(offset, 0.0);
}

Mlp Mlp::xavier(std::vector<std::size_t> layer_dims, OutputHead head, std::uint64_t seed, bool with_bias) {
    Mlp net(std::move(layer_dims), head, with_bias);
    Rng rng(seed);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const std::size_t fan_in = net.dims_[l];
        const std::size_t fan_out = net.dims_[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) net.params_[net.w_off_[l] + i] = dist(rng);
    }
    return net;
}

double Mlp::weight(std::size_t layer, std::size_t row, std::size_t col) const {
    if (layer >= num_layers() || row >= dims_[layer + 1] || col >= dims_[layer]) {
        throw ShapeError("weight index out of range");
    }
    return params_[w_off_[layer] + row * dims_[layer] + col];
}

double Mlp::bias(std::size_t layer, std::size_t row) const {
    if (!bias_) return 0.0;
    if (layer >= num_layers() || row >= dims_[layer + 1]) throw ShapeError("bias index out of range");
    return params_[b_off_[layer] + row];
}

std::string Mlp::param_path(std::size_t flat_index) const {
    for (std::size_t l = 0; l < num_layers(); ++l) {
        const std::size_t in = dims_[l];
        const std::size_t out = dims_[l + 1];
        if (flat_index >= w_off_[l] && flat_index < w_off_[l] + in * out) {
            const std::size_t k = flat_index - w_off_[l];
            return "layer " + std::to_string(l) + " weight[" + std::to_string(k / in) + "," +
                   std::to_string(k % in) + "]";
        }
        if (bias_ && flat_index >= b_off_[l] && flat_index < b_off_[l] + out) {
            return "layer " + std::to_string(l) + " bias[" + std::to_string(flat_index - b_off_[l]) + "]";
        }
    }
    throw ShapeError("parameter index " + std::to_string(flat_index) + " out of range");
}

void Mlp::check_input(std::span<const double> x) const {
    if (dims_.empty()) throw ShapeError("forward on an empty network");
    if (x.size() != dims_.front()) {
        throw ShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                         std::to_string(dims_.front()));
    }
}

// Activations of every layer, kept for the backward pass.
struct MlpTape {
    // acts[0] = input, acts[l] = tanh output of hidden layer l, acts.back() = logits / raw output.
    std::vector<std::vector<double>> acts;

    MlpTape(const Mlp& net, std::span<const double> x) {
        net.check_input(x);
        acts.reserve(net.num_layers() + 1);
        acts.emplace_back(x.begin(), x.end());
        for (std::size_t l = 0; l < net.num_layers(); ++l) {
            const std::size_t in = net.dims_[l];
            const std::size_t out = net.dims_[l + 1];
            const double* w = net.params_.data() + net.w_off_[l];
            const std::vector<double>& a = acts.back();
            std::vector<double> z(out);
            for (std::size_t r = 0; r < out; ++r) {
                double s = net.bias_ ? net.params_[net.b_off_[l] + r] : 0.0;
                const double* row = w + r * in;
                for (std::size_t c = 0; c < in; ++c) s += row[c] * a[c];
                z[r] = s;
            }
            if (l + 1 < net.num_layers()) {
                for (double& v : z) v = std::tanh(v);
            }
            acts.push_back(std::move(z));
        }
    }

    // Propagates dLoss/d(last pre-head output) back through the layers.
    void backprop(const Mlp& net, std::vector<double> delta, Gradients& grads, double scale) const {
        for (std::size_t l = net.num_layers(); l-- > 0;) {
            const std::size_t in = net.dims_[l];
            const std::size_t out = net.dims_[l + 1];
            const std::vector<double>& a = acts[l];
            double* gw = grads.values.data() + net.w_off_[l];
            for (std::size_t r = 0; r < out; ++r) {
                const double d = scale * delta[r];
                double* row = gw + r * in;
                for (std::size_t c = 0; c < in; ++c) row[c] += d * a[c];
            }
            if (net.bias_) {
                double* gb = grads.values.data() + net.b_off_[l];
                for (std::size_t r = 0; r < out; ++r) gb[r] += scale * delta[r];
            }
            if (l == 0) break;
            const double* w = net.params_.data() + net.w_off_[l];
            std::vector<double> prev(in, 0.0);
            for (std::size_t r = 0; r < out; ++r) {
                const double d = delta[r];
                const double* row = w + r * in;
                for (std::size_t c = 0; c < in; ++c) prev[c] += row[c] * d;
            }
            for (std::size_t c = 0; c < in; ++c) prev[c] *= 1.0 - a[c] * a[c];
            delta = std::move(prev);
        }
    }
};

std::vector<double> Mlp::logits(std::span<const double> x) const {
    MlpTape tape(*this, x);
    return std::move(tape.acts.back());
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    std::vector<double> out = logits(x);
    if (head_ == OutputHead::Softmax) softmax_inplace(out);
    return out;
}

double Mlp::l2_norm_sq() const noexcept {
    double s = 0.0;
    for (double p : params_) s += p * p;
    return s;
}

double Gradients::norm() const {
    double s = 0.0;
    for (double g : values) s += g * g;
    return std::sqrt(s);
}

void Gradients::scale(double factor) {
    for (double& g : values) g *= factor;
}

namespace {

void require_head(const Mlp& net, OutputHead head, const char* loss_name) {
    if (net.head() != head) {
        throw ContractError(std::string(loss_name) + " loss requires a " + to_string(head) + " head");
    }
}

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw ContractError(std::string(what) + " has " + std::to_string(got) + " entries, expected " +
                            std::to_string(want));
    }
}

// Loss value and dLoss/d(last layer output) for one sample.
double loss_and_delta(const Mlp& net, const std::vector<double>& raw, const Loss& loss,
                      std::vector<double>* delta) {
    const std::size_t k = raw.size();
    return std::visit(
        Overloaded{
            [&](const CrossEntropyLoss& ce) {
                require_head(net, OutputHead::Softmax, "cross-entropy");
                if (ce.target >= k) throw ContractError("cross-entropy target class out of range");
                std::vector<double> p = raw;
                std::vector<double> logp;
                softmax_inplace(p, &logp);
                if (delta) {
                    delta->assign(k, 0.0);
                    for (std::size_t i = 0; i < k; ++i) (*delta)[i] = ce.weight * p[i];
                    (*delta)[ce.target] -= ce.weight;
                }
                return -ce.weight * logp[ce.target];
            },
            [&](const MseLoss& mse) {
                require_head(net, OutputHead::Linear, "mse");
                require_size(mse.target.size(), k, "mse target");
                double l = 0.0;
                if (delta) delta->assign(k, 0.0);
                for (std::size_t i = 0; i < k; ++i) {
                    const double e = raw[i] - mse.target[i];
                    l += e * e;
                    if (delta) (*delta)[i] = 2.0 * e / static_cast<double>(k);
                }
                return l / static_cast<double>(k);
            },
            [&](const SvddLoss& svdd) {
                require_head(net, OutputHead::Linear, "svdd");
                require_size(svdd.center.size(), k, "svdd center");
                double l = 0.0;
                if (delta) delta->assign(k, 0.0);
                for (std::size_t i = 0; i < k; ++i) {
                    const double e = raw[i] - svdd.center[i];
                    l += e * e;
                    if (delta) (*delta)[i] = 2.0 * e;
                }
                return l;
            },
            [&](const PolicyGradientLoss& pg) {
                require_head(net, OutputHead::Softmax, "policy-gradient");
                if (pg.action >= k) throw ContractError("policy-gradient action out of range");
                std::vector<double> p = raw;
                std::vector<double> logp;
                softmax_inplace(p, &logp);
                double entropy = 0.0;
                for (std::size_t i = 0; i < k; ++i) entropy -= p[i] * logp[i];
                if (delta) {
                    delta->assign(k, 0.0);
                    for (std::size_t i = 0; i < k; ++i) {
                        (*delta)[i] = pg.advantage * p[i] + pg.entropy_coef * p[i] * (logp[i] + entropy);
                    }
                    (*delta)[pg.action] -= pg.advantage;
                }
                return -pg.advantage * logp[pg.action] - pg.entropy_coef * entropy;
            },
        },
        loss);
}

}  // namespace

double loss_value(const Mlp& net, std::span<const double> x, const Loss& loss) {
    return loss_and_delta(net, net.logits(x), loss, nullptr);
}

double accumulate_gradient(const Mlp& net, std::span<const double> x, const Loss& loss, Gradients& grads,
                           double scale) {
    if (grads.values.size() != net.param_count()) throw ShapeError("gradient buffer does not match network");
    MlpTape tape(net, x);
    std::vector<double> delta;
    const double l = loss_and_delta(net, tape.acts.back(), loss, &delta);
    tape.backprop(net, std::move(delta), grads, scale);
    return l;
}

Gradients backward(const Mlp& net, std::span<const double> x, const Loss& loss) {
    Gradients g(net);
    accumulate_gradient(net, x, loss, g);
    return g;
}

Mlp apply_step(const Mlp& net, const Gradients& grads, GradientStep& step) {
    const std::size_t n = net.param_count();
    if (grads.values.size() != n) throw ShapeError("gradient buffer does not match network");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grads.values[i])) {
            throw NumericError("non-finite gradient at " + net.param_path(i));
        }
    }
    AdamMoments& mom = step.moments;
    if (mom.first.size() != n) {
        mom.first.assign(n, 0.0);
        mom.second.assign(n, 0.0);
        mom.step = 0;
    }
    ++mom.step;
    const double bc1 = 1.0 - std::pow(step.beta1, static_cast<double>(mom.step));
    const double bc2 = 1.0 - std::pow(step.beta2, static_cast<double>(mom.step));
    Mlp out = net;
    std::span<double> p = out.params();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads.values[i] + 2.0 * step.l2 * p[i];
        mom.first[i] = step.beta1 * mom.first[i] + (1.0 - step.beta1) * g;
        mom.second[i] = step.beta2 * mom.second[i] + (1.0 - step.beta2) * g * g;
        const double mhat = mom.first[i] / bc1;
        const double vhat = mom.second[i] / bc2;
        p[i] -= step.learning_rate * mhat / (std::sqrt(vhat) + step.epsilon);
    }
    return out;
}

double clip_gradient_norm(Gradients& grads, double max_norm) {
    const double norm = grads.norm();
    if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
    return norm;
}

std::vector<double> fit_minibatch(Mlp& net, const std::vector<std::vector<double>>& inputs,
                                  const std::vector<Loss>& losses, std::size_t epochs, std::size_t batch_size,
                                  GradientStep& step, Rng& rng) {
    if (inputs.size() != losses.size()) throw ShapeError("inputs and losses differ in length");
    if (batch_size == 0) throw ContractError("batch size must be positive");
    std::vector<double> history;
    if (inputs.empty()) return history;
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Gradients grads(net);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            grads.zero();
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const double l = accumulate_gradient(net, inputs[i], losses[i], grads, scale);
                if (!std::isfinite(l)) throw NumericError("non-finite training loss at sample " + std::to_string(i));
                total += l;
            }
            net = apply_step(net, grads, step);
        }
        history.push_back(total / static_cast<double>(order.size()));
    }
    return history;
}

void save_mlp(const Mlp& net, std::ostream& out) {
    out << "MLPCKPT v1\n";
    out << "layer_dims";
    for (std::size_t d : net.layer_dims()) out << ' ' << d;
    out << "\nhead " << to_string(net.head()) << "\nbias " << (net.has_bias() ? 1 : 0) << '\n';
    const auto& dims = net.layer_dims();
    std::span<const double> p = net.params();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const std::size_t in = dims[l];
        const std::size_t outd = dims[l + 1];
        for (std::size_t r = 0; r < outd; ++r) {
            for (std::size_t c = 0; c < in; ++c) {
                out << (c ? " " : "") << format_double(p[net.weight_offset(l) + r * in + c]);
            }
            out << '\n';
        }
        if (net.has_bias()) {
            for (std::size_t r = 0; r < outd; ++r) {
                out << (r ? " " : "") << format_double(p[net.bias_offset(l) + r]);
            }
            out << '\n';
        }
    }
}

Mlp load_mlp(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line)) throw ParseError("unexpected end of checkpoint", lineno + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "MLPCKPT v1") throw ParseError("missing 'MLPCKPT v1' header", lineno);

    std::istringstream dims_in(next_line());
    std::string key;
    dims_in >> key;
    if (key != "layer_dims") throw ParseError("expected layer_dims", lineno);
    std::vector<std::size_t> dims;
    for (std::size_t d; dims_in >> d;) dims.push_back(d);
    if (dims.size() < 2) throw ParseError("layer_dims needs at least two entries", lineno);

    std::istringstream head_in(next_line());
    std::string head_name;
    head_in >> key >> head_name;
    if (key != "head") throw ParseError("expected head", lineno);
    OutputHead head{};
    try {
        head = parse_output_head(head_name);
    } catch (const ContractError& e) {
        throw ParseError(e.what(), lineno);
    }

    std::istringstream bias_in(next_line());
    int bias_flag = -1;
    bias_in >> key >> bias_flag;
    if (key != "bias" || (bias_flag != 0 && bias_flag != 1)) throw ParseError("expected bias 0|1", lineno);

    Mlp net(dims, head, bias_flag == 1);
    std::span<double> p = net.params();
    auto read_row = [&](std::size_t offset, std::size_t count) {
        std::istringstream row(next_line());
        std::string tok;
        std::size_t k = 0;
        while (row >> tok) {
            if (k == count) throw ParseError("too many values in row", lineno);
            try {
                p[offset + k] = parse_double(tok);
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), lineno);
            }
            ++k;
        }
        if (k != count) throw ParseError("expected " + std::to_string(count) + " values in row", lineno);
    };
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (std::size_t r = 0; r < dims[l + 1]; ++r) read_row(net.weight_offset(l) + r * dims[l], dims[l]);
        if (net.has_bias()) read_row(net.bias_offset(l), dims[l + 1]);
    }
    return net;
}

void save_mlp(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save_mlp(net, out);
}

Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return load_mlp(in);
}

}  // namespace sgf
