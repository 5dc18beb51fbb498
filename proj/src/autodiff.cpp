#include "divgan/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace divgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), t.rows(), t.cols()); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), t.rows(), t.cols()); }

void require_rank2(const Tensor& t, const char* op)
{
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
    }
}

// Element-wise op with derivative computed from (input, output).
template <typename F, typename DF>
Var unary(Var a, F f, DF df)
{
    const Tensor& in = a.value();
    Tensor out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    const std::size_t pa = a.id();
    return a.tape().record(std::move(out), {a}, [pa, df](Tape& tape, std::size_t self) {
        const Tensor& x = tape.value(pa);
        const Tensor& y = tape.value(self);
        const Tensor& g = tape.out_grad(self);
        Tensor& ga = tape.grad_buffer(pa);
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

void require_same_tape(Var a, Var b, const char* op)
{
    if (&a.tape() != &b.tape()) throw std::logic_error(std::string(op) + ": operands live on different tapes");
}

} // namespace

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::variable(Tensor value)
{
    nodes_.push_back(Node{std::move(value), Tensor{}, false, true, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), Tensor{}, false, false, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward)
{
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward)
{
    bool needs = false;
    for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
    nodes_.push_back(Node{std::move(value), Tensor{}, false, needs, needs ? std::move(backward) : Backward{}});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id)
{
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var output)
{
    if (output.value().size() != 1) {
        throw ShapeError("backward: output of shape " + shape_to_string(output.shape()) + " is not a scalar");
    }
    backward(output, Tensor(output.shape(), 1.0));
}

void Tape::backward(Var output, const Tensor& seed)
{
    require_same_shape(output.value(), seed, "backward");
    zero_grads();
    grad_buffer(output.id()) = seed;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.has_grad && n.requires_grad && n.backward) n.backward(*this, i);
    }
}

void Tape::zero_grads()
{
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor{};
    }
}

Tensor Tape::grad(Var v) const
{
    const Node& n = nodes_[v.id()];
    if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
    return n.grad;
}

Var matmul(Var a, Var b)
{
    require_same_tape(a, b, "matmul");
    const Tensor& x = a.value();
    const Tensor& w = b.value();
    require_rank2(x, "matmul");
    require_rank2(w, "matmul");
    if (x.cols() != w.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + shape_to_string(x.shape()) + " * " +
                         shape_to_string(w.shape()));
    }
    Tensor out(Shape{x.rows(), w.cols()});
    as_matrix(out).noalias() = as_matrix(x) * as_matrix(w);
    const std::size_t pa = a.id();
    const std::size_t pb = b.id();
    return a.tape().record(std::move(out), {a, b}, [pa, pb](Tape& tape, std::size_t self) {
        const auto g = as_matrix(tape.out_grad(self));
        if (tape.requires_grad(pa)) as_matrix(tape.grad_buffer(pa)).noalias() += g * as_matrix(tape.value(pb)).transpose();
        if (tape.requires_grad(pb)) as_matrix(tape.grad_buffer(pb)).noalias() += as_matrix(tape.value(pa)).transpose() * g;
    });
}

Var add(Var a, Var b)
{
    require_same_tape(a, b, "add");
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const Tensor& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    const std::size_t pa = a.id();
    const std::size_t pb = b.id();
    return a.tape().record(std::move(out), {a, b}, [pa, pb](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        for (std::size_t p : {pa, pb}) {
            if (!tape.requires_grad(p)) continue;
            Tensor& gp = tape.grad_buffer(p);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
        }
    });
}

Var sub(Var a, Var b)
{
    require_same_tape(a, b, "sub");
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const Tensor& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
    const std::size_t pa = a.id();
    const std::size_t pb = b.id();
    return a.tape().record(std::move(out), {a, b}, [pa, pb](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        if (tape.requires_grad(pa)) {
            Tensor& ga = tape.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(pb)) {
            Tensor& gb = tape.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b)
{
    require_same_tape(a, b, "mul");
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const Tensor& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
    const std::size_t pa = a.id();
    const std::size_t pb = b.id();
    return a.tape().record(std::move(out), {a, b}, [pa, pb](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        const Tensor& x = tape.value(pa);
        const Tensor& y = tape.value(pb);
        if (tape.requires_grad(pa)) {
            Tensor& ga = tape.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (tape.requires_grad(pb)) {
            Tensor& gb = tape.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
        }
    });
}

Var div(Var a, Var b)
{
    require_same_tape(a, b, "div");
    require_same_shape(a.value(), b.value(), "div");
    const Tensor& den = b.value();
    for (std::size_t i = 0; i < den.size(); ++i) {
        if (!(std::abs(den[i]) >= 1e-12)) {
            throw DomainError("div: denominator " + std::to_string(den[i]) + " at index " + std::to_string(i) +
                              " is below 1e-12 in magnitude");
        }
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= den[i];
    const std::size_t pa = a.id();
    const std::size_t pb = b.id();
    return a.tape().record(std::move(out), {a, b}, [pa, pb](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        const Tensor& q = tape.value(self);
        const Tensor& d = tape.value(pb);
        if (tape.requires_grad(pa)) {
            Tensor& ga = tape.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / d[i];
        }
        if (tape.requires_grad(pb)) {
            Tensor& gb = tape.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * q[i] / d[i];
        }
    });
}

Var add_bias(Var a, Var bias)
{
    require_same_tape(a, bias, "add_bias");
    const Tensor& x = a.value();
    const Tensor& b = bias.value();
    require_rank2(x, "add_bias");
    if (b.rank() != 1 || b.size() != x.cols()) {
        throw ShapeError("add_bias: bias " + shape_to_string(b.shape()) + " does not match columns of " +
                         shape_to_string(x.shape()));
    }
    Tensor out = x;
    as_matrix(out).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    const std::size_t pa = a.id();
    const std::size_t pb = bias.id();
    return a.tape().record(std::move(out), {a, bias}, [pa, pb](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        if (tape.requires_grad(pa)) {
            Tensor& ga = tape.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(pb)) {
            Tensor& gb = tape.grad_buffer(pb);
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) +=
                as_matrix(g).colwise().sum();
        }
    });
}

Var scale(Var a, double factor)
{
    return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c)
{
    return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var tanh(Var a)
{
    // tanh|x| = (1 - e) / (1 + e) with e = exp(-2|x|), using Eigen's vectorised exp.
    const Tensor& in = a.value();
    Tensor out(in.shape());
    const auto x = Eigen::Map<const Eigen::ArrayXd>(in.data(), static_cast<Eigen::Index>(in.size()));
    auto y = Eigen::Map<Eigen::ArrayXd>(out.data(), static_cast<Eigen::Index>(out.size()));
    y = (-2.0 * x.abs()).exp();
    y = (1.0 - y) / (1.0 + y);
    y = (x < 0.0).select(-y, y);
    const std::size_t pa = a.id();
    return a.tape().record(std::move(out), {a}, [pa](Tape& tape, std::size_t self) {
        const Tensor& yv = tape.value(self);
        const Tensor& g = tape.out_grad(self);
        Tensor& ga = tape.grad_buffer(pa);
        for (std::size_t i = 0; i < yv.size(); ++i) ga[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
}

Var relu(Var a)
{
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope)
{
    return unary(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a)
{
    return unary(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a)
{
    return unary(
        a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

Var abs(Var a)
{
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a)
{
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a)
{
    for (double v : a.value().values()) {
        if (v < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(v));
    }
    return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var sum(Var a)
{
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t pa = a.id();
    return a.tape().record(Tensor::scalar(s), {a}, [pa](Tape& tape, std::size_t self) {
        const double g = tape.out_grad(self)[0];
        Tensor& ga = tape.grad_buffer(pa);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var mean(Var a)
{
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a)
{
    const Tensor& x = a.value();
    require_rank2(x, "row_sum");
    Tensor out(Shape{x.rows()});
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) s += x.at(r, c);
        out[r] = s;
    }
    const std::size_t pa = a.id();
    return a.tape().record(std::move(out), {a}, [pa](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        Tensor& ga = tape.grad_buffer(pa);
        const std::size_t cols = ga.cols();
        for (std::size_t r = 0; r < g.size(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r];
        }
    });
}

Var min_const(Var a, double c)
{
    return unary(a, [c](double x) { return x < c ? x : c; }, [c](double x, double) { return x < c ? 1.0 : 0.0; });
}

Var concat_cols(std::span<const Var> parts)
{
    if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
    Tape& tape = parts.front().tape();
    const std::size_t rows = parts.front().value().rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        require_same_tape(parts.front(), p, "concat_cols");
        require_rank2(p.value(), "concat_cols");
        if (p.value().rows() != rows) {
            throw ShapeError("concat_cols: row counts differ " + shape_to_string(parts.front().shape()) + " vs " +
                             shape_to_string(p.shape()));
        }
        total += p.value().cols();
    }
    Tensor out(Shape{rows, total});
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& v = p.value();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < v.cols(); ++c) out.at(r, offset + c) = v.at(r, c);
        }
        ids.push_back(p.id());
        offsets.push_back(offset);
        offset += v.cols();
    }
    Tape::Backward backward = [ids, offsets, total](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        const std::size_t rows = g.rows();
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!t.requires_grad(ids[k])) continue;
            Tensor& gp = t.grad_buffer(ids[k]);
            const std::size_t cols = gp.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) gp[r * cols + c] += g[r * total + offsets[k] + c];
            }
        }
    };
    return tape.record(std::move(out), parts, std::move(backward));
}

Var concat_cols(Var a, Var b)
{
    const Var parts[] = {a, b};
    return concat_cols(std::span<const Var>(parts));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end)
{
    const Tensor& x = a.value();
    require_rank2(x, "slice_cols");
    if (begin >= end || end > x.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_to_string(x.shape()));
    }
    const std::size_t width = end - begin;
    Tensor out(Shape{x.rows(), width});
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < width; ++c) out.at(r, c) = x.at(r, begin + c);
    }
    const std::size_t pa = a.id();
    return a.tape().record(std::move(out), {a}, [pa, begin, width](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        Tensor& ga = tape.grad_buffer(pa);
        const std::size_t cols = ga.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += g[r * width + c];
        }
    });
}

Var reshape(Var a, Shape shape)
{
    Tensor out = a.value().reshaped(std::move(shape));
    const std::size_t pa = a.id();
    return a.tape().record(std::move(out), {a}, [pa](Tape& tape, std::size_t self) {
        const Tensor& g = tape.out_grad(self);
        Tensor& ga = tape.grad_buffer(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

ValueAndGrads evaluate_with_gradients(const ScalarFunction& f, std::span<const Tensor> inputs)
{
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
    const Var out = f(tape, vars);
    if (!out.valid() || &out.tape() != &tape) throw std::logic_error("evaluate_with_gradients: function returned a foreign value");
    tape.backward(out);
    ValueAndGrads result;
    result.value = out.value().item();
    for (const Var& v : vars) result.grads.push_back(tape.grad(v));
    return result;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h)
{
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw DomainError("finite_diff_gradient: non-finite function value at coordinate " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

Tensor jacobian(const std::function<Var(Tape&, Var)>& f, const Tensor& z)
{
    Tape tape;
    const Var input = tape.variable(z);
    const Var out = f(tape, input);
    const std::size_t m = out.value().size();
    const std::size_t n = z.size();
    Tensor jac(Shape{m, n});
    Tensor seed(out.shape(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        seed[i] = 1.0;
        tape.backward(out, seed);
        seed[i] = 0.0;
        const Tensor g = tape.grad(input);
        for (std::size_t j = 0; j < n; ++j) jac.at(i, j) = g[j];
    }
    return jac;
}

} // namespace divgan
