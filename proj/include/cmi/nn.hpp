#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cmi/batch.hpp"

namespace cmi::nn {

// Outputs are clamped to [kOmegaClamp, 1 - kOmegaClamp] before any log or
// odds ratio is taken.
inline constexpr double kOmegaClamp = 1e-6;

enum class Activation { relu, sigmoid, identity };

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::relu;

    bool operator==(const LayerSpec&) const = default;
};

// input_dim -> hidden[0] -> ... -> hidden.back() -> 1, ReLU hidden units and a
// sigmoid head.
std::vector<LayerSpec> classifier_layers(std::size_t input_dim, std::span<const std::size_t> hidden);

struct DenseParams {
    Eigen::MatrixXd weight;  // output_dim x input_dim
    Eigen::VectorXd bias;    // output_dim
};

// Per-coordinate affine map applied to raw features before the first layer:
// (v - shift) .* scale. Empty vectors mean identity.
struct InputScaling {
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;

    bool is_identity() const noexcept { return shift.size() == 0; }
};

// Dense feed-forward classifier with a scalar sigmoid output. Immutable once
// trained, so concurrent read-only evaluation is safe.
struct ClassifierNet {
    std::vector<LayerSpec> specs;
    std::vector<DenseParams> params;
    InputScaling scaling;

    std::size_t input_dim() const noexcept { return specs.empty() ? 0 : specs.front().input_dim; }
    std::size_t parameter_count() const noexcept;
};

struct Gradients {
    std::vector<DenseParams> layers;
};

struct AdamState {
    std::vector<DenseParams> first_moment;
    std::vector<DenseParams> second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Throws ConfigError unless specs chain dimensionally and end in a 1-unit
// sigmoid layer.
void validate_specs(std::span<const LayerSpec> specs);

// Weights ~ U[-sqrt(1/fan_in), +sqrt(1/fan_in)], biases zero.
ClassifierNet init_network(std::span<const LayerSpec> specs, std::uint64_t seed);

// Pre-sigmoid output for every column of `inputs` (raw features x samples).
Eigen::VectorXd logits(const ClassifierNet& net, const Eigen::MatrixXd& inputs);

// Clamped sigmoid output for each column.
Eigen::VectorXd forward_batch(const ClassifierNet& net, const Eigen::MatrixXd& inputs);

// Single-sample forward pass. Throws InputError on length mismatch or
// non-finite entries.
double forward(const ClassifierNet& net, std::span<const double> input);

// Sigmoid of a logit, clamped.
double clamped_sigmoid(double logit) noexcept;

// -(1/2b)[sum_joint log w + sum_prod log(1 - w)] with w clamped. The two
// matrix arguments hold one sample per column.
double cross_entropy_loss(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod);
double cross_entropy_loss(const ClassifierNet& net, const BatchPair& batch);

// Gradient of the cross-entropy with respect to every weight and bias.
//
// The objective differentiated is the unclamped logit form, whose per-sample
// output gradient is (w - label). It coincides with cross_entropy_loss
// whenever no output sits on the clamp, and keeps confident mistakes
// trainable when one does.
Gradients backward(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod);
Gradients backward(const ClassifierNet& net, const BatchPair& batch);

AdamState make_adam_state(const ClassifierNet& net);

// One bias-corrected Adam update in place. Throws NumericalError on a
// non-finite gradient (parameters untouched) and ConfigError if lr <= 0.
void adam_step(ClassifierNet& net, const Gradients& grads, AdamState& state, double lr);

struct TrainingOptions {
    std::size_t epochs = 300;
    double lr = 2e-3;
    std::size_t minibatch_size = 0;    // 0 = full batch; otherwise even, half from each class
    std::uint64_t seed = 0;
    bool standardize = true;           // fit InputScaling on the training batch first
    bool record_epoch_losses = false;
};

struct TrainingTrace {
    double first_epoch_loss = 0.0;  // full-batch loss after epoch 1
    double final_loss = 0.0;        // full-batch loss after the last epoch
    std::vector<double> epoch_losses;
};

struct TrainingResult {
    ClassifierNet net;
    TrainingTrace trace;
};

// Each epoch is one pass over both classes. With minibatch_size 0 that is a
// single full-batch Adam step; otherwise shuffled balanced minibatches, one
// permutation per epoch applied to both classes, trailing partial minibatch
// kept.
// Throws ConfigError on bad options, NumericalError (with the epoch) when
// the loss or a gradient goes non-finite.
TrainingResult train_classifier(ClassifierNet net, const BatchPair& train, const TrainingOptions& options);

// Sets net.scaling to standardise each feature with the mean and standard
// deviation over both classes of `batch` (constant features keep scale 1).
void fit_input_scaling(ClassifierNet& net, const BatchPair& batch);

// Worst elementwise relative error between backward() and central finite
// differences of cross_entropy_loss, |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const ClassifierNet& net, const BatchPair& batch, double step);
double gradient_check(const ClassifierNet& net, const Eigen::MatrixXd& joint, const Eigen::MatrixXd& prod,
                      double step);

// JSON container: {"format":"cmi-classifier","version":1,...}. Doubles are
// written in shortest round-trip form so load(save(net)) is bit-exact.
void save_classifier(std::ostream& out, const ClassifierNet& net);
ClassifierNet load_classifier(std::istream& in);
void save_classifier_file(const std::string& path, const ClassifierNet& net);
ClassifierNet load_classifier_file(const std::string& path);

}  // namespace cmi::nn
