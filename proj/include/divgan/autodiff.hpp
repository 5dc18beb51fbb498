#pragma once

#include "divgan/tensor.hpp"

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace divgan {

class Tape;

/// Raised for values outside an op's domain (tiny denominators, non-finite
/// function values in the finite-difference oracle).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records a computation over Tensors and replays it backwards.
///
/// Nodes whose inputs are all constants are not differentiated, so binding
/// e.g. discriminator weights as constants while training the generator
/// skips their weight gradients entirely. A tape is single-threaded.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(Tensor value);
    Var constant(Tensor value);

    /// Record an op output. `backward` is only kept when some parent needs
    /// gradients.
    Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
    Var record(Tensor value, std::span<const Var> parents, Backward backward);

    /// Reverse sweep from a scalar output seeded with 1.
    void backward(Var output);
    /// Reverse sweep from any output with an explicit seed of its shape.
    void backward(Var output, const Tensor& seed);
    void zero_grads();

    /// Accumulated gradient; zeros when nothing flowed into the node.
    Tensor grad(Var v) const;

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of node `id`, zero-initialised on first use.
    Tensor& grad_buffer(std::size_t id);
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        Backward backward;
    };

    std::vector<Node> nodes_;
};

// Supported ops. Every binary element-wise op requires identical shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Element-wise quotient; any |denominator| < 1e-12 raises DomainError.
Var div(Var a, Var b);
/// Adds vector `bias` (length m) to every row of the (n x m) matrix `a`.
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var sigmoid(Var a);
/// log(1 + exp(a)) evaluated without overflow.
Var softplus(Var a);
Var abs(Var a);
Var square(Var a);
/// Square root; the gradient at exactly 0 is taken to be 0.
Var sqrt(Var a);
Var sum(Var a);
Var mean(Var a);
/// Per-row sum of an (n x m) matrix, giving a length-n vector.
Var row_sum(Var a);
/// min(a, c) element-wise. Gradient flows only where a < c strictly.
Var min_const(Var a, double c);
/// Column-wise concatenation of matrices with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
/// Columns [begin, end) of an (n x m) matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Same values under a new shape of equal size.
Var reshape(Var a, Shape shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double c, Var a) { return scale(a, c); }

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct ValueAndGrads {
    double value = 0.0;
    std::vector<Tensor> grads;
};

/// Evaluate a scalar function built from tape ops and return its value and
/// the gradient with respect to each input.
ValueAndGrads evaluate_with_gradients(const ScalarFunction& f, std::span<const Tensor> inputs);

/// Central-difference gradient of `f` at `x`.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Jacobian of a vector-valued tape function at z, shaped (dim(out) x dim(z)).
Tensor jacobian(const std::function<Var(Tape&, Var)>& f, const Tensor& z);

} // namespace divgan
