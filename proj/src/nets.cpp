#include "divgan/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace divgan {

std::string to_string(HiddenActivation a)
{
    switch (a) {
    case HiddenActivation::tanh: return "tanh";
    case HiddenActivation::relu: return "relu";
    case HiddenActivation::leaky_relu: return "leaky_relu";
    }
    return "?";
}

std::string to_string(OutputActivation a)
{
    switch (a) {
    case OutputActivation::linear: return "linear";
    case OutputActivation::sigmoid: return "sigmoid";
    case OutputActivation::tanh: return "tanh";
    }
    return "?";
}

HiddenActivation parse_hidden_activation(const std::string& s)
{
    if (s == "tanh") return HiddenActivation::tanh;
    if (s == "relu") return HiddenActivation::relu;
    if (s == "leaky_relu") return HiddenActivation::leaky_relu;
    throw std::invalid_argument("unknown hidden activation '" + s + "'");
}

OutputActivation parse_output_activation(const std::string& s)
{
    if (s == "linear") return OutputActivation::linear;
    if (s == "sigmoid") return OutputActivation::sigmoid;
    if (s == "tanh") return OutputActivation::tanh;
    throw std::invalid_argument("unknown output activation '" + s + "'");
}

void NetworkSpec::validate() const
{
    if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("network spec: dimensions must be >= 1");
    for (std::size_t h : hidden_dims) {
        if (h < 1) throw std::invalid_argument("network spec: hidden dimensions must be >= 1");
    }
    if (!(init_scale > 0.0)) throw std::invalid_argument("network spec: init_scale must be positive");
}

NetworkSpec default_generator_spec(std::size_t input_dim, std::size_t output_dim)
{
    return NetworkSpec{input_dim, {128, 128}, output_dim, HiddenActivation::tanh, OutputActivation::linear, 1.0};
}

NetworkSpec default_discriminator_spec(std::size_t input_dim)
{
    return NetworkSpec{input_dim, {128, 128}, 1, HiddenActivation::relu, OutputActivation::linear, std::sqrt(2.0)};
}

bool NetworkParams::all_finite() const
{
    for (const Tensor& t : tensors) {
        if (!t.all_finite()) return false;
    }
    return true;
}

namespace {

std::vector<std::size_t> layer_dims(const NetworkSpec& spec)
{
    std::vector<std::size_t> dims{spec.input_dim};
    dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
    dims.push_back(spec.output_dim);
    return dims;
}

} // namespace

void NetworkParams::check_against(const NetworkSpec& spec) const
{
    const auto dims = layer_dims(spec);
    if (tensors.size() != 2 * spec.layer_count()) {
        throw ShapeError("network params: expected " + std::to_string(2 * spec.layer_count()) + " tensors, got " +
                         std::to_string(tensors.size()));
    }
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const Shape w{dims[l], dims[l + 1]};
        const Shape b{dims[l + 1]};
        if (weight(l).shape() != w || bias(l).shape() != b) {
            throw ShapeError("network params: layer " + std::to_string(l) + " has weight " +
                             shape_to_string(weight(l).shape()) + " and bias " + shape_to_string(bias(l).shape()) +
                             ", spec needs " + shape_to_string(w) + " and " + shape_to_string(b));
        }
    }
}

NetworkParams mlp_zeros(const NetworkSpec& spec)
{
    spec.validate();
    const auto dims = layer_dims(spec);
    NetworkParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        p.tensors.emplace_back(Shape{dims[l], dims[l + 1]}, 0.0);
        p.tensors.emplace_back(Shape{dims[l + 1]}, 0.0);
    }
    return p;
}

NetworkParams mlp_init(const NetworkSpec& spec, std::uint64_t seed)
{
    NetworkParams p = mlp_zeros(spec);
    Rng rng(seed, 0x6e657473);
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        Tensor& w = p.weight(l);
        const double stddev = spec.init_scale / std::sqrt(static_cast<double>(w.rows()));
        for (double& v : w.values()) v = stddev * rng.normal();
    }
    return p;
}

BoundParams bind(Tape& tape, const NetworkParams& params, bool trainable)
{
    BoundParams b;
    b.vars.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) b.vars.push_back(trainable ? tape.variable(t) : tape.constant(t));
    return b;
}

namespace {

Var apply(HiddenActivation a, Var x)
{
    switch (a) {
    case HiddenActivation::tanh: return tanh(x);
    case HiddenActivation::relu: return relu(x);
    case HiddenActivation::leaky_relu: return leaky_relu(x, 0.2);
    }
    return x;
}

Var apply(OutputActivation a, Var x)
{
    switch (a) {
    case OutputActivation::linear: return x;
    case OutputActivation::sigmoid: return sigmoid(x);
    case OutputActivation::tanh: return tanh(x);
    }
    return x;
}

} // namespace

MlpOutput mlp_forward(const NetworkSpec& spec, const BoundParams& params, Var input)
{
    if (params.vars.size() != 2 * spec.layer_count()) {
        throw ShapeError("mlp_forward: parameter count does not match the network spec");
    }
    Var h = input;
    if (h.value().rank() == 1) h = reshape(h, Shape{1, h.value().size()});
    if (h.value().rank() != 2 || h.value().cols() != spec.input_dim) {
        throw ShapeError("mlp_forward: input " + shape_to_string(input.shape()) + " does not match input_dim " +
                         std::to_string(spec.input_dim));
    }
    MlpOutput out;
    const std::size_t layers = spec.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        h = add_bias(matmul(h, params.vars[2 * l]), params.vars[2 * l + 1]);
        if (l + 1 < layers) {
            h = apply(spec.hidden_activation, h);
            out.features.push_back(h);
        } else {
            h = apply(spec.output_activation, h);
        }
    }
    out.output = h;
    return out;
}

Var join_condition(Tape& tape, const std::optional<Tensor>& condition, Var z)
{
    if (!condition) return z;
    Var x = tape.constant(*condition);
    if (x.value().rank() == 1) x = reshape(x, Shape{1, x.value().size()});
    if (z.value().rank() == 1) z = reshape(z, Shape{1, z.value().size()});
    return concat_cols(x, z);
}

Tensor generator_forward(const NetworkSpec& spec, const NetworkParams& params, const GeneratorInput& input)
{
    Tape tape;
    const BoundParams bound = bind(tape, params, false);
    const Var in = join_condition(tape, input.condition, tape.constant(input.z));
    return mlp_forward(spec, bound, in).output.value();
}

DiscriminatorOutput discriminator_forward(const NetworkSpec& spec, const NetworkParams& params,
                                          const std::optional<Tensor>& condition, const Tensor& y)
{
    Tape tape;
    const BoundParams bound = bind(tape, params, false);
    const Var in = join_condition(tape, condition, tape.constant(y));
    const MlpOutput out = mlp_forward(spec, bound, in);
    DiscriminatorOutput result;
    const Tensor& o = out.output.value();
    result.logits = Tensor::vector(o.to_vector());
    for (const Var& f : out.features) result.features.push_back(f.value());
    return result;
}

} // namespace divgan
