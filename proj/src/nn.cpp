#include "cmi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "cmi/error.hpp"
#include "cmi/random.hpp"

namespace cmi::nn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

void apply_activation(Activation a, MatrixXd& m) {
    switch (a) {
        case Activation::relu: m = m.cwiseMax(0.0); break;
        case Activation::sigmoid: m = m.unaryExpr(&sigmoid); break;
        case Activation::identity: break;
    }
}

// Multiplies `delta` (gradient w.r.t. a layer's output) by the activation
// derivative, expressed through the layer's output. ReLU's output is
// positive exactly where its input is.
void apply_activation_derivative(Activation a, const MatrixXd& post, MatrixXd& delta) {
    switch (a) {
        case Activation::relu: delta = (post.array() > 0.0).select(delta, 0.0); break;
        case Activation::sigmoid: delta.array() *= post.array() * (1.0 - post.array()); break;
        case Activation::identity: break;
    }
}

void check_input_dim(const ClassifierNet& net, Index rows) {
    if (static_cast<std::size_t>(rows) != net.input_dim())
        throw InputError("input has " + std::to_string(rows) + " features, network expects " +
                         std::to_string(net.input_dim()));
}

MatrixXd scaled_inputs(const ClassifierNet& net, const MatrixXd& inputs) {
    check_input_dim(net, inputs.rows());
    if (net.scaling.is_identity()) return inputs;
    return (inputs.colwise() - net.scaling.shift).cwiseProduct(net.scaling.scale.replicate(1, inputs.cols()));
}

// Layer outputs reused across training steps. post[0] is the (scaled) input
// and post.back() holds raw logits; the sigmoid is folded into the loss.
struct Workspace {
    std::vector<MatrixXd> post;
    MatrixXd delta;
    MatrixXd back;
};

void run_layers(const ClassifierNet& net, Workspace& ws) {
    const std::size_t depth = net.params.size();
    ws.post.resize(depth + 1);
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& p = net.params[l];
        auto& out = ws.post[l + 1];
        out.noalias() = p.weight * ws.post[l];
        out.colwise() += p.bias;
        if (l + 1 < depth) apply_activation(net.specs[l].activation, out);
    }
}

// log of the clamped sigmoid; log(1 - w) is log_clamped_sigmoid(-u).
double log_clamped_sigmoid(double u) { return std::log(clamped_sigmoid(u)); }

template <typename Joint, typename Prod>
double loss_from_logits(const Joint& joint_logits, const Prod& prod_logits) {
    const auto total = joint_logits.size() + prod_logits.size();
    if (joint_logits.size() == 0 || prod_logits.size() == 0) throw InputError("cross-entropy needs both classes");
    const double sj = joint_logits.unaryExpr([](double u) { return log_clamped_sigmoid(u); }).sum();
    const double sp = prod_logits.unaryExpr([](double u) { return log_clamped_sigmoid(-u); }).sum();
    return -(sj + sp) / static_cast<double>(total);
}

// Loss and gradients of one labelled minibatch whose inputs are already in
// ws.post[0]: the first nj columns are joint samples (label 1), the rest
// product samples (label 0).
double loss_and_gradients(const ClassifierNet& net, Index nj, Workspace& ws, Gradients& grads) {
    const Index total = ws.post[0].cols();
    const Index np = total - nj;
    if (nj == 0 || np == 0) throw InputError("cross-entropy needs both classes");
    run_layers(net, ws);

    const MatrixXd& out = ws.post.back();
    const double norm = 1.0 / static_cast<double>(total);
    ws.delta.resize(1, total);
    for (Index i = 0; i < total; ++i) ws.delta(0, i) = (sigmoid(out(0, i)) - (i < nj ? 1.0 : 0.0)) * norm;

    const std::size_t depth = net.params.size();
    grads.layers.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        grads.layers[l].weight.noalias() = ws.delta * ws.post[l].transpose();
        grads.layers[l].bias = ws.delta.rowwise().sum();
        if (l == 0) break;
        ws.back.noalias() = net.params[l].weight.transpose() * ws.delta;
        apply_activation_derivative(net.specs[l - 1].activation, ws.post[l], ws.back);
        std::swap(ws.delta, ws.back);
    }
    return loss_from_logits(out.row(0).head(nj), out.row(0).tail(np));
}

double loss_and_gradients(const ClassifierNet& net, const MatrixXd& joint, const MatrixXd& prod, Gradients& grads) {
    Workspace ws;
    ws.post.resize(1);
    ws.post[0].resize(joint.rows(), joint.cols() + prod.cols());
    ws.post[0] << joint, prod;
    ws.post[0] = scaled_inputs(net, ws.post[0]);
    return loss_and_gradients(net, joint.cols(), ws, grads);
}

bool all_finite(const Gradients& g) {
    return std::all_of(g.layers.begin(), g.layers.end(),
                       [](const DenseParams& p) { return p.weight.allFinite() && p.bias.allFinite(); });
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw InputError("unknown activation '" + s + "'");
}

}  // namespace

std::vector<LayerSpec> classifier_layers(std::size_t input_dim, std::span<const std::size_t> hidden) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input_dim;
    for (auto width : hidden) {
        specs.push_back({prev, width, Activation::relu});
        prev = width;
    }
    specs.push_back({prev, 1, Activation::sigmoid});
    return specs;
}

std::size_t ClassifierNet::parameter_count() const noexcept {
    std::size_t count = 0;
    for (const auto& p : params) count += static_cast<std::size_t>(p.weight.size() + p.bias.size());
    return count;
}

double clamped_sigmoid(double logit) noexcept {
    return std::clamp(sigmoid(logit), kOmegaClamp, 1.0 - kOmegaClamp);
}

void validate_specs(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].input_dim == 0 || specs[i].output_dim == 0)
            throw ConfigError("layer " + std::to_string(i) + " has a zero dimension");
        if (i + 1 < specs.size() && specs[i].output_dim != specs[i + 1].input_dim)
            throw ConfigError("layer " + std::to_string(i) + " outputs " + std::to_string(specs[i].output_dim) +
                              " units but layer " + std::to_string(i + 1) + " expects " +
                              std::to_string(specs[i + 1].input_dim));
    }
    if (specs.back().activation != Activation::sigmoid || specs.back().output_dim != 1)
        throw ConfigError("final layer must be a single sigmoid unit");
}

ClassifierNet init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
    validate_specs(specs);
    ClassifierNet net;
    net.specs.assign(specs.begin(), specs.end());
    auto rng = make_rng(seed);
    for (const auto& s : specs) {
        const double limit = std::sqrt(1.0 / static_cast<double>(s.input_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseParams p;
        p.weight.resize(static_cast<Index>(s.output_dim), static_cast<Index>(s.input_dim));
        // Row-major fill order keeps the stream layout independent of Eigen's storage order.
        for (Index r = 0; r < p.weight.rows(); ++r)
            for (Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = dist(rng);
        p.bias = VectorXd::Zero(static_cast<Index>(s.output_dim));
        net.params.push_back(std::move(p));
    }
    return net;
}

Eigen::VectorXd logits(const ClassifierNet& net, const Eigen::MatrixXd& inputs) {
    Workspace ws;
    ws.post.push_back(scaled_inputs(net, inputs));
    run_layers(net, ws);
    return ws.post.back().row(0).transpose();
}

Eigen::VectorXd forward_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs) {
    return logits(net, inputs).unaryExpr([](double u) { return clamped_sigmoid(u); });
}

double forward(const ClassifierNet& net, std::span<const double> input) {
    if (input.size() != net.input_dim())
        throw InputError("input has length " + std::to_string(input.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    if (!std::all_of(input.begin(), input.end(), [](double v) { return std::isfinite(v); }))
        throw InputError("non-finite network input");
    const MatrixXd column = Eigen::Map<const MatrixXd>(input.data(), static_cast<Index>(input.size()), 1);
    return forward_batch(net, column)(0);
}

double cross_entropy_loss(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod) {
    if (joint.cols() == 0 || prod.cols() == 0) throw InputError("cross-entropy needs a non-empty batch");
    return loss_from_logits(logits(net, joint), logits(net, prod));
}

double cross_entropy_loss(const ClassifierNet& net, const BatchPair& batch) {
    return cross_entropy_loss(net, batch.joint.matrix(), batch.prod.matrix());
}

Gradients backward(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod) {
    Gradients g;
    loss_and_gradients(net, joint, prod, g);
    return g;
}

Gradients backward(const ClassifierNet& net, const BatchPair& batch) {
    return backward(net, batch.joint.matrix(), batch.prod.matrix());
}

AdamState make_adam_state(const ClassifierNet& net) {
    AdamState s;
    for (const auto& p : net.params) {
        DenseParams zero{MatrixXd::Zero(p.weight.rows(), p.weight.cols()), VectorXd::Zero(p.bias.size())};
        s.first_moment.push_back(zero);
        s.second_moment.push_back(std::move(zero));
    }
    return s;
}

void adam_step(ClassifierNet& net, const Gradients& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (grads.layers.size() != net.params.size() || state.first_moment.size() != net.params.size())
        throw ConfigError("gradient/optimizer state does not match network");
    for (std::size_t l = 0; l < net.params.size(); ++l) {
        const auto& g = grads.layers[l];
        const auto& p = net.params[l];
        if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() || g.bias.size() != p.bias.size())
            throw ConfigError("gradient shape mismatch at layer " + std::to_string(l));
    }
    if (!all_finite(grads)) throw NumericalError("non-finite gradient");

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < net.params.size(); ++l) {
        update(net.params[l].weight, state.first_moment[l].weight, state.second_moment[l].weight, grads.layers[l].weight);
        update(net.params[l].bias, state.first_moment[l].bias, state.second_moment[l].bias, grads.layers[l].bias);
    }
}

void fit_input_scaling(ClassifierNet& net, const BatchPair& batch) {
    const auto& j = batch.joint.matrix();
    const auto& p = batch.prod.matrix();
    const double count = static_cast<double>(j.cols() + p.cols());
    if (count < 2) throw InputError("need at least two samples to standardise");
    const VectorXd mean = (j.rowwise().sum() + p.rowwise().sum()) / count;
    const VectorXd sq = ((j.colwise() - mean).cwiseAbs2().rowwise().sum() + (p.colwise() - mean).cwiseAbs2().rowwise().sum()) / count;
    net.scaling.shift = mean;
    net.scaling.scale = sq.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
}

TrainingResult train_classifier(ClassifierNet net, const BatchPair& train, const TrainingOptions& options) {
    validate_specs(net.specs);
    if (options.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (options.minibatch_size != 0 && (options.minibatch_size < 2 || options.minibatch_size % 2 != 0))
        throw ConfigError("minibatch size must be 0 (full batch) or even and >= 2");
    if (!(options.lr > 0.0)) throw ConfigError("learning rate must be positive");
    const std::size_t b = train.joint.size();
    if (b == 0 || train.prod.size() != b) throw InputError("training batch classes must be non-empty and equal-sized");
    if (train.joint.dims().total() != net.input_dim()) throw InputError("training features do not match network input");

    if (options.standardize) fit_input_scaling(net, train);
    // Train on pre-scaled features with an identity map, restored at the end.
    const InputScaling scaling = net.scaling;
    const MatrixXd joint = scaled_inputs(net, train.joint.matrix());
    const MatrixXd prod = scaled_inputs(net, train.prod.matrix());
    net.scaling = {};

    const std::size_t half = options.minibatch_size == 0 ? b : std::min(b, options.minibatch_size / 2);
    const bool full_batch = half == b;
    auto rng = make_rng(options.seed);
    std::vector<Index> order(b);
    std::iota(order.begin(), order.end(), Index{0});

    AdamState state = make_adam_state(net);
    Gradients grads;
    TrainingTrace trace;
    Workspace ws;
    ws.post.resize(1);
    if (full_batch) {
        ws.post[0].resize(joint.rows(), 2 * joint.cols());
        ws.post[0] << joint, prod;
    }
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < b; start += half) {
            const auto count = static_cast<Index>(std::min(half, b - start));
            if (!full_batch) {
                const auto idx = std::span(order).subspan(start, static_cast<std::size_t>(count));
                ws.post[0].resize(joint.rows(), 2 * count);
                ws.post[0].leftCols(count) = joint(Eigen::all, idx);
                ws.post[0].rightCols(count) = prod(Eigen::all, idx);
            }
            const double loss = loss_and_gradients(net, count, ws, grads);
            if (!std::isfinite(loss)) throw NumericalError("training loss diverged", epoch);
            try {
                adam_step(net, grads, state, options.lr);
            } catch (const NumericalError& e) {
                throw NumericalError(e.what(), epoch);
            }
        }
        if (epoch == 1 || epoch == options.epochs || options.record_epoch_losses) {
            const double full = cross_entropy_loss(net, joint, prod);
            if (!std::isfinite(full)) throw NumericalError("training loss diverged", epoch);
            if (epoch == 1) trace.first_epoch_loss = full;
            if (epoch == options.epochs) trace.final_loss = full;
            if (options.record_epoch_losses) trace.epoch_losses.push_back(full);
        }
    }
    net.scaling = scaling;
    return {std::move(net), std::move(trace)};
}

double gradient_check(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod,
                      double step) {
    if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
    const Gradients analytic = backward(net, joint, prod);
    ClassifierNet probe = net;
    double worst = 0.0;
    auto check = [&](double& param, double grad) {
        const double saved = param;
        param = saved + step;
        const double up = cross_entropy_loss(probe, joint, prod);
        param = saved - step;
        const double down = cross_entropy_loss(probe, joint, prod);
        param = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(grad), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(grad - numeric) / denom);
    };
    for (std::size_t l = 0; l < probe.params.size(); ++l) {
        auto& p = probe.params[l];
        for (Index c = 0; c < p.weight.cols(); ++c)
            for (Index r = 0; r < p.weight.rows(); ++r) check(p.weight(r, c), analytic.layers[l].weight(r, c));
        for (Index r = 0; r < p.bias.size(); ++r) check(p.bias(r), analytic.layers[l].bias(r));
    }
    return worst;
}

double gradient_check(const ClassifierNet& net, const BatchPair& batch, double step) {
    return gradient_check(net, batch.joint.matrix(), batch.prod.matrix(), step);
}

// Serialization

namespace {

constexpr const char* kFormat = "cmi-classifier";
constexpr int kFormatVersion = 1;

nlohmann::json row_major(const MatrixXd& m) {
    auto arr = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

VectorXd vector_from(const nlohmann::json& arr, Index expected, const char* what) {
    if (!arr.is_array() || static_cast<Index>(arr.size()) != expected)
        throw InputError(std::string("classifier file: bad ") + what + " length");
    VectorXd v(expected);
    for (Index i = 0; i < expected; ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

}  // namespace

void save_classifier(std::ostream& out, const ClassifierNet& net) {
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kFormatVersion;
    auto layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.specs.size(); ++l) {
        const auto& s = net.specs[l];
        layers.push_back({{"input_dim", s.input_dim},
                          {"output_dim", s.output_dim},
                          {"activation", activation_name(s.activation)},
                          {"weight", row_major(net.params[l].weight)},
                          {"bias", row_major(net.params[l].bias)}});
    }
    j["layers"] = std::move(layers);
    if (!net.scaling.is_identity())
        j["input_scaling"] = {{"shift", row_major(net.scaling.shift)}, {"scale", row_major(net.scaling.scale)}};
    out << j.dump() << '\n';
}

ClassifierNet load_classifier(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("classifier file: ") + e.what());
    }
    if (j.value("format", "") != kFormat) throw InputError("classifier file: unrecognised format tag");
    if (j.value("version", 0) != kFormatVersion)
        throw InputError("classifier file: unsupported version " + std::to_string(j.value("version", 0)));
    ClassifierNet net;
    try {
        for (const auto& layer : j.at("layers")) {
            LayerSpec s{layer.at("input_dim").get<std::size_t>(), layer.at("output_dim").get<std::size_t>(),
                        activation_from_name(layer.at("activation").get<std::string>())};
            const auto rows = static_cast<Index>(s.output_dim), cols = static_cast<Index>(s.input_dim);
            const VectorXd flat = vector_from(layer.at("weight"), rows * cols, "weight");
            DenseParams p;
            p.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                flat.data(), rows, cols);
            p.bias = vector_from(layer.at("bias"), rows, "bias");
            net.specs.push_back(s);
            net.params.push_back(std::move(p));
        }
        validate_specs(net.specs);
        if (j.contains("input_scaling")) {
            const auto dim = static_cast<Index>(net.input_dim());
            net.scaling.shift = vector_from(j["input_scaling"].at("shift"), dim, "shift");
            net.scaling.scale = vector_from(j["input_scaling"].at("scale"), dim, "scale");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("classifier file: ") + e.what());
    } catch (const ConfigError& e) {
        throw InputError(std::string("classifier file: ") + e.what());
    }
    return net;
}

void save_classifier_file(const std::string& path, const ClassifierNet& net) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    save_classifier(out, net);
}

ClassifierNet load_classifier_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return load_classifier(in);
}

}  // namespace cmi::nn
