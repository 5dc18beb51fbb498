#include "divgan/autodiff.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>

using namespace divgan;
using divgan::testing::gradient_check;
using divgan::testing::random_tensor;

namespace {

constexpr int kTrials = 100;
constexpr double kTol = 1e-4;

// Draws entries with |x| >= margin so kinked ops are probed away from the kink.
Tensor away_from_zero(const Shape& shape, Rng& rng, double margin = 1e-2)
{
    Tensor t = random_tensor(shape, rng, -2.0, 2.0);
    for (double& v : t.values()) {
        if (std::abs(v) < margin) v = v < 0 ? -margin - 0.5 : margin + 0.5;
    }
    return t;
}

// Reduces an op output to a scalar with fixed random weights so every output
// entry contributes a distinct gradient.
Var weighted_sum(Var y, std::uint64_t seed)
{
    Rng rng(seed, 99);
    const Tensor w = random_tensor(y.shape(), rng, 0.5, 1.5);
    return sum(y * y.tape().constant(w));
}

using UnaryOp = std::function<Var(Var)>;

void check_unary(const std::string& name, const UnaryOp& op, const std::function<Tensor(Rng&)>& draw)
{
    Rng rng(std::hash<std::string>{}(name), 1);
    double worst = 0.0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const Tensor x = draw(rng);
        const ScalarFunction f = [&](Tape&, std::span<const Var> in) { return weighted_sum(op(in[0]), 7); };
        worst = std::max(worst, gradient_check(f, {x}));
    }
    EXPECT_LE(worst, kTol) << name;
}

} // namespace

TEST(Tape, ConstantsReceiveNoGradient)
{
    Tape tape;
    const Var a = tape.variable(Tensor::vector({1.0, 2.0}));
    const Var c = tape.constant(Tensor::vector({3.0, 4.0}));
    const Var y = sum(a * c);
    EXPECT_TRUE(y.requires_grad());
    tape.backward(y);
    EXPECT_EQ(tape.grad(a), Tensor::vector({3.0, 4.0}));
    EXPECT_EQ(tape.grad(c), Tensor::vector({0.0, 0.0}));

    Tape frozen;
    const Var k = frozen.constant(Tensor::vector({1.0}));
    EXPECT_FALSE(sum(tanh(k)).requires_grad());
}

TEST(Tape, BackwardRequiresScalarOrSeed)
{
    Tape tape;
    const Var a = tape.variable(Tensor::vector({1.0, 2.0}));
    const Var y = square(a);
    EXPECT_THROW(tape.backward(y), ShapeError);
    tape.backward(y, Tensor::vector({1.0, 0.0}));
    EXPECT_EQ(tape.grad(a), Tensor::vector({2.0, 0.0}));
    EXPECT_THROW(tape.backward(y, Tensor::vector({1.0})), ShapeError);
}

TEST(Tape, RepeatedBackwardDoesNotAccumulate)
{
    Tape tape;
    const Var a = tape.variable(Tensor::scalar(3.0));
    const Var y = square(a);
    tape.backward(y);
    tape.backward(y);
    EXPECT_DOUBLE_EQ(tape.grad(a).item(), 6.0);
}

TEST(Tape, SharedSubexpressionAccumulates)
{
    Tape tape;
    const Var a = tape.variable(Tensor::scalar(2.0));
    const Var y = a * a + a;
    tape.backward(y);
    EXPECT_DOUBLE_EQ(tape.grad(a).item(), 5.0);
}

TEST(Ops, ShapeMismatchThrows)
{
    Tape tape;
    const Var a = tape.variable(Tensor(Shape{2, 3}));
    const Var b = tape.variable(Tensor(Shape{3, 2}));
    EXPECT_THROW(add(a, b), ShapeError);
    EXPECT_THROW(mul(a, b), ShapeError);
    EXPECT_THROW(matmul(a, a), ShapeError);
    EXPECT_THROW(add_bias(a, tape.variable(Tensor(Shape{2}))), ShapeError);
    EXPECT_THROW(concat_cols(a, tape.variable(Tensor(Shape{3, 1}))), ShapeError);
    EXPECT_THROW(slice_cols(a, 2, 4), ShapeError);
    EXPECT_THROW(reshape(a, Shape{4}), ShapeError);
}

TEST(Ops, DivisionByTinyDenominatorThrows)
{
    Tape tape;
    const Var a = tape.variable(Tensor::vector({1.0, 1.0}));
    EXPECT_THROW(div(a, tape.constant(Tensor::vector({1.0, 1e-13}))), DomainError);
    EXPECT_NO_THROW(div(a, tape.constant(Tensor::vector({1.0, -1e-11}))));
}

TEST(Ops, SqrtRejectsNegativeAndHasZeroGradientAtZero)
{
    Tape tape;
    EXPECT_THROW(sqrt(tape.variable(Tensor::vector({-1e-3}))), DomainError);
    const Var a = tape.variable(Tensor::vector({0.0, 4.0}));
    tape.backward(sum(sqrt(a)));
    EXPECT_EQ(tape.grad(a), Tensor::vector({0.0, 0.25}));
}

TEST(Ops, MinConstPassesGradientOnlyBelowTheCap)
{
    Tape tape;
    const Var a = tape.variable(Tensor::vector({1.0, 2.0, 3.0}));
    const Var y = min_const(a, 2.0);
    EXPECT_EQ(y.value(), Tensor::vector({1.0, 2.0, 2.0}));
    tape.backward(sum(y));
    EXPECT_EQ(tape.grad(a), Tensor::vector({1.0, 0.0, 0.0}));
}

TEST(Ops, SoftplusIsStableForLargeInputs)
{
    Tape tape;
    const Var a = tape.variable(Tensor::vector({-800.0, 0.0, 800.0}));
    const Var y = softplus(a);
    EXPECT_EQ(y.value()[0], 0.0);
    EXPECT_DOUBLE_EQ(y.value()[1], std::log(2.0));
    EXPECT_DOUBLE_EQ(y.value()[2], 800.0);
    tape.backward(sum(y));
    EXPECT_EQ(tape.grad(a)[0], 0.0);
    EXPECT_DOUBLE_EQ(tape.grad(a)[1], 0.5);
    EXPECT_EQ(tape.grad(a)[2], 1.0);
}

TEST(Ops, TanhMatchesStdTanh)
{
    Tape tape;
    Rng rng(5);
    const Tensor x = random_tensor(Shape{1000}, rng, -30.0, 30.0);
    const Var y = tanh(tape.constant(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], std::tanh(x[i]), 1e-15);
    EXPECT_EQ(tanh(tape.constant(Tensor::vector({0.0, -0.0}))).value()[0], 0.0);
}

TEST(Ops, ConcatSliceRoundTrip)
{
    Tape tape;
    const Var a = tape.variable(Tensor::matrix(2, 1, {1, 2}));
    const Var b = tape.variable(Tensor::matrix(2, 2, {3, 4, 5, 6}));
    const Var c = concat_cols(a, b);
    EXPECT_EQ(c.value(), Tensor::matrix(2, 3, {1, 3, 4, 2, 5, 6}));
    EXPECT_EQ(slice_cols(c, 1, 3).value(), b.value());
}

TEST(OpsGradient, Elementwise)
{
    const Shape s{3, 4};
    check_unary("tanh", [](Var a) { return tanh(a); }, [&](Rng& r) { return random_tensor(s, r, -3, 3); });
    check_unary("sigmoid", [](Var a) { return sigmoid(a); }, [&](Rng& r) { return random_tensor(s, r, -6, 6); });
    check_unary("softplus", [](Var a) { return softplus(a); }, [&](Rng& r) { return random_tensor(s, r, -6, 6); });
    check_unary("relu", [](Var a) { return relu(a); }, [&](Rng& r) { return away_from_zero(s, r); });
    check_unary("leaky_relu", [](Var a) { return leaky_relu(a); }, [&](Rng& r) { return away_from_zero(s, r); });
    check_unary("abs", [](Var a) { return abs(a); }, [&](Rng& r) { return away_from_zero(s, r); });
    check_unary("square", [](Var a) { return square(a); }, [&](Rng& r) { return random_tensor(s, r, -2, 2); });
    check_unary("sqrt", [](Var a) { return sqrt(a); }, [&](Rng& r) { return random_tensor(s, r, 0.1, 3); });
    check_unary("scale", [](Var a) { return scale(a, -1.7); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary("add_scalar", [](Var a) { return add_scalar(a, 0.3); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary(
        "min_const", [](Var a) { return min_const(a, 0.5); },
        [&](Rng& r) {
            Tensor t = random_tensor(s, r, -1.0, 2.0);
            for (double& v : t.values()) {
                if (std::abs(v - 0.5) < 1e-2) v += 0.1;
            }
            return t;
        });
}

TEST(OpsGradient, Reductions)
{
    const Shape s{4, 3};
    check_unary("sum", [](Var a) { return sum(square(a)); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary("mean", [](Var a) { return mean(square(a)); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary("row_sum", [](Var a) { return row_sum(a); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary("slice_cols", [](Var a) { return slice_cols(a, 1, 3); }, [&](Rng& r) { return random_tensor(s, r); });
    check_unary("reshape", [](Var a) { return reshape(a, Shape{12}); }, [&](Rng& r) { return random_tensor(s, r); });
}

TEST(OpsGradient, Binary)
{
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const Tensor a = random_tensor(Shape{3, 4}, rng, -2, 2);
        const Tensor b = random_tensor(Shape{3, 4}, rng, -2, 2);
        const Tensor pos = random_tensor(Shape{3, 4}, rng, 0.5, 2);
        const Tensor w = random_tensor(Shape{4, 2}, rng);
        const Tensor bias = random_tensor(Shape{2}, rng);
        const Tensor c = random_tensor(Shape{3, 2}, rng);

        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(v[0] + v[1], 1); }, {a, b}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(v[0] - v[1], 2); }, {a, b}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(v[0] * v[1], 3); }, {a, b}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(v[0] / v[1], 4); }, {a, pos}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(matmul(v[0], v[1]), 5); }, {a, w}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(add_bias(v[0], v[1]), 6); }, {c, bias}));
        worst = std::max(worst, gradient_check([](Tape&, std::span<const Var> v) { return weighted_sum(concat_cols(v[0], v[1]), 7); }, {a, c}));
    }
    EXPECT_LE(worst, kTol);
}

TEST(OpsGradient, ComposedMlpHead)
{
    Rng rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < kTrials; ++trial) {
        const Tensor x = random_tensor(Shape{5, 3}, rng, -2, 2);
        const Tensor w1 = random_tensor(Shape{3, 6}, rng);
        const Tensor b1 = random_tensor(Shape{6}, rng);
        const Tensor w2 = random_tensor(Shape{6, 1}, rng);
        const ScalarFunction f = [](Tape&, std::span<const Var> v) {
            const Var h = tanh(add_bias(matmul(v[0], v[1]), v[2]));
            return mean(softplus(matmul(h, v[3])));
        };
        worst = std::max(worst, gradient_check(f, {x, w1, b1, w2}));
    }
    EXPECT_LE(worst, kTol);
}

TEST(FiniteDiff, RejectsNonFiniteValues)
{
    const auto f = [](const Tensor& x) { return x[0] > 0.5 ? std::nan("") : x[0]; };
    EXPECT_THROW(finite_diff_gradient(f, Tensor::vector({0.5})), DomainError);
    EXPECT_NEAR(finite_diff_gradient(f, Tensor::vector({0.0}))[0], 1.0, 1e-9);
}

TEST(Jacobian, MatchesFiniteDifferencesOfEachOutput)
{
    Rng rng(3);
    const Tensor w = random_tensor(Shape{3, 2}, rng);
    const auto f = [&](Tape& tape, Var z) { return tanh(matmul(reshape(z, Shape{1, 3}), tape.constant(w))); };
    const Tensor z = random_tensor(Shape{3}, rng);
    const Tensor jac = jacobian(f, z);
    ASSERT_EQ(jac.shape(), (Shape{2, 3}));
    for (std::size_t out = 0; out < 2; ++out) {
        const auto component = [&](const Tensor& x) {
            Tape tape;
            return f(tape, tape.constant(x)).value()[out];
        };
        const Tensor row = finite_diff_gradient(component, z);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(jac.at(out, j), row[j], 1e-8);
    }
}

TEST(EvaluateWithGradients, SumOfSquares)
{
    const ScalarFunction f = [](Tape&, std::span<const Var> v) { return sum(square(v[0])); };
    const std::vector<Tensor> x{Tensor::vector({1.0, 2.0})};
    const ValueAndGrads r = evaluate_with_gradients(f, x);
    EXPECT_EQ(r.value, 5.0);
    EXPECT_EQ(r.grads.at(0), Tensor::vector({2.0, 4.0}));
}

TEST(EvaluateWithGradients, ReluMask)
{
    const ScalarFunction f = [](Tape&, std::span<const Var> v) { return sum(relu(v[0])); };
    const std::vector<Tensor> x{Tensor::vector({-1.0, 3.0})};
    const ValueAndGrads r = evaluate_with_gradients(f, x);
    EXPECT_EQ(r.value, 3.0);
    EXPECT_EQ(r.grads.at(0), Tensor::vector({0.0, 1.0}));
}

TEST(FiniteDiff, LinearFunctionGivesOnes)
{
    Rng rng(2);
    const Tensor x = random_tensor(Shape{6}, rng, -5, 5);
    const auto f = [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.values()) s += v;
        return s;
    };
    const Tensor g = finite_diff_gradient(f, x);
    for (double v : g.values()) EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(FiniteDiff, Bilinear)
{
    const Tensor g = finite_diff_gradient([](const Tensor& t) { return t[0] * t[1]; }, Tensor::vector({2.0, 3.0}));
    EXPECT_NEAR(g[0], 3.0, 1e-6);
    EXPECT_NEAR(g[1], 2.0, 1e-6);
}

TEST(Jacobian, LinearMapIsExact)
{
    const Tensor a = Tensor::matrix(2, 2, {2, 0, 0, 1});
    const auto f = [&](Tape& tape, Var z) { return matmul(tape.constant(a), reshape(z, Shape{2, 1})); };
    const Tensor jac = jacobian(f, Tensor::vector({0.3, -0.7}));
    EXPECT_EQ(jac, a);
}

TEST(Jacobian, Analytic)
{
    const auto f = [](Tape&, Var z) { return concat_cols(square(slice_cols(reshape(z, Shape{1, 2}), 0, 1)), slice_cols(reshape(z, Shape{1, 2}), 1, 2)); };
    const Tensor jac = jacobian(f, Tensor::vector({3.0, 1.0}));
    EXPECT_EQ(jac, Tensor::matrix(2, 2, {6, 0, 0, 1}));
}
