#pragma once

#include "divgan/autodiff.hpp"
#include "divgan/rng.hpp"
#include "divgan/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace divgan {

enum class HiddenActivation { tanh, relu, leaky_relu };
enum class OutputActivation { linear, sigmoid, tanh };

std::string to_string(HiddenActivation a);
std::string to_string(OutputActivation a);
HiddenActivation parse_hidden_activation(const std::string& s);
OutputActivation parse_output_activation(const std::string& s);

/// Fully connected network layout.
struct NetworkSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_dims{128, 128};
    std::size_t output_dim = 2;
    HiddenActivation hidden_activation = HiddenActivation::tanh;
    OutputActivation output_activation = OutputActivation::linear;
    double init_scale = 1.0;

    void validate() const;
    std::size_t layer_count() const { return hidden_dims.size() + 1; }
    /// True when the output layer squashes into a bounded range.
    bool bounded_output() const { return output_activation != OutputActivation::linear; }
    bool operator==(const NetworkSpec&) const = default;
};

/// Ring-task defaults: 2 -> [128, 128] -> 2 with tanh hidden units and a
/// linear output.
NetworkSpec default_generator_spec(std::size_t input_dim, std::size_t output_dim);
/// 2 -> [128, 128] -> 1 with ReLU hidden units, emitting a logit.
NetworkSpec default_discriminator_spec(std::size_t input_dim);

/// Weights and biases of an MLP stored as [W0, b0, W1, b1, ...].
/// W_l has shape (fan_in x fan_out) and multiplies batch rows from the left.
struct NetworkParams {
    std::vector<Tensor> tensors;

    const Tensor& weight(std::size_t layer) const { return tensors[2 * layer]; }
    Tensor& weight(std::size_t layer) { return tensors[2 * layer]; }
    const Tensor& bias(std::size_t layer) const { return tensors[2 * layer + 1]; }
    Tensor& bias(std::size_t layer) { return tensors[2 * layer + 1]; }
    std::size_t layer_count() const { return tensors.size() / 2; }

    bool all_finite() const;
    /// Throws ShapeError unless every tensor matches `spec`.
    void check_against(const NetworkSpec& spec) const;
    bool operator==(const NetworkParams&) const = default;
};

/// Gaussian weights with std init_scale / sqrt(fan_in), zero biases.
NetworkParams mlp_init(const NetworkSpec& spec, std::uint64_t seed);
NetworkParams mlp_zeros(const NetworkSpec& spec);

/// Parameters bound onto a tape, either as variables or constants.
struct BoundParams {
    std::vector<Var> vars;
};

BoundParams bind(Tape& tape, const NetworkParams& params, bool trainable);

struct MlpOutput {
    Var output;
    /// Post-activation hidden layers, ordered from input to output.
    std::vector<Var> features;
};

/// Forward pass over a batch (n x input_dim) or a single input vector.
MlpOutput mlp_forward(const NetworkSpec& spec, const BoundParams& params, Var input);

/// Condition x (optional, n x c) and latent z (n x z_dim) for a batch.
struct GeneratorInput {
    std::optional<Tensor> condition;
    Tensor z;
};

/// Concatenates the condition (if any) in front of the latent on the tape.
Var join_condition(Tape& tape, const std::optional<Tensor>& condition, Var z);

Tensor generator_forward(const NetworkSpec& spec, const NetworkParams& params, const GeneratorInput& input);

struct DiscriminatorOutput {
    /// Pre-sigmoid scores, one per batch row.
    Tensor logits;
    std::vector<Tensor> features;
};

DiscriminatorOutput discriminator_forward(const NetworkSpec& spec, const NetworkParams& params,
                                          const std::optional<Tensor>& condition, const Tensor& y);

} // namespace divgan
