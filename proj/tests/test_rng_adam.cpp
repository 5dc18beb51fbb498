#include "divgan/adam.hpp"
#include "divgan/autodiff.hpp"
#include "divgan/rng.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace divgan;

TEST(Rng, SameSeedSameStream)
{
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng c(43);
    EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, StreamsAreIndependent)
{
    Rng a(7, 0);
    Rng b(7, 1);
    EXPECT_NE(a.next_u64(), b.next_u64());
    EXPECT_EQ(Rng(7).split(3).next_u64(), Rng(7).split(3).next_u64());
    EXPECT_NE(Rng(7).split(3).next_u64(), Rng(7).split(4).next_u64());
}

TEST(Rng, UniformRange)
{
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.uniform_int(5), 5u);
    }
}

TEST(Rng, NormalMoments)
{
    Rng rng(9);
    const int n = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    // 5 standard errors of the mean and of the variance estimate.
    EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, SerializeRestoresExactStream)
{
    Rng rng(123, 4);
    for (int i = 0; i < 17; ++i) rng.normal();
    Rng copy = Rng::restore(rng.serialize());
    EXPECT_EQ(copy, rng);
    EXPECT_EQ(copy.seed(), 123u);
    EXPECT_EQ(copy.stream(), 4u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(copy.normal(), rng.normal());
}

TEST(Adam, ZeroGradientsLeaveParamsUnchanged)
{
    std::vector<Tensor> params{Tensor::vector({1.0, -2.0}), Tensor::matrix(1, 2, {3.0, 4.0})};
    const std::vector<Tensor> before = params;
    AdamState state = AdamState::zeros_like(params);
    const std::vector<Tensor> grads{Tensor::vector({0.0, 0.0}), Tensor::matrix(1, 2, {0.0, 0.0})};
    adam_step(params, grads, state, AdamHyper{});
    EXPECT_EQ(params, before);
    EXPECT_EQ(state.t, 1);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    for (double g : {1e-3, -0.5, 7.0, -1e4}) {
        std::vector<Tensor> params{Tensor::scalar(0.25)};
        AdamState state = AdamState::zeros_like(params);
        const AdamHyper hyper;
        adam_step(params, {Tensor::scalar(g)}, state, hyper);
        const double update = params[0].item() - 0.25;
        EXPECT_EQ(std::signbit(update), g > 0);
        // Bias correction cancels on step 1, leaving lr * g / (|g| + eps).
        EXPECT_NEAR(std::abs(update / hyper.lr), std::abs(g) / (std::abs(g) + hyper.eps), 1e-9) << g;
    }
}

TEST(Adam, MatchesReferenceRecurrence)
{
    const AdamHyper hyper{0.01, 0.9, 0.99, 1e-8};
    std::vector<Tensor> params{Tensor::scalar(1.0)};
    AdamState state = AdamState::zeros_like(params);
    double p = 1.0;
    double m = 0.0;
    double v = 0.0;
    const double grads[] = {0.5, -0.2, 0.1, 0.3};
    for (int t = 1; t <= 4; ++t) {
        const double g = grads[t - 1];
        adam_step(params, {Tensor::scalar(g)}, state, hyper);
        m = hyper.beta1 * m + (1 - hyper.beta1) * g;
        v = hyper.beta2 * v + (1 - hyper.beta2) * g * g;
        const double m_hat = m / (1 - std::pow(hyper.beta1, t));
        const double v_hat = v / (1 - std::pow(hyper.beta2, t));
        p -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        EXPECT_NEAR(params[0].item(), p, 1e-15);
    }
    EXPECT_EQ(state.t, 4);
}

TEST(Adam, Deterministic)
{
    Rng rng(5);
    const std::vector<Tensor> init{divgan::testing::random_tensor(Shape{3, 3}, rng)};
    const std::vector<Tensor> grads{divgan::testing::random_tensor(Shape{3, 3}, rng)};
    std::vector<Tensor> a = init;
    std::vector<Tensor> b = init;
    AdamState sa = AdamState::zeros_like(a);
    AdamState sb = AdamState::zeros_like(b);
    adam_step(a, grads, sa, AdamHyper{});
    adam_step(b, grads, sb, AdamHyper{});
    EXPECT_EQ(a, b);
    EXPECT_EQ(sa, sb);
}

TEST(Adam, NonFiniteGradientIsRejectedWithoutSideEffects)
{
    std::vector<Tensor> params{Tensor::vector({1.0, 2.0})};
    AdamState state = AdamState::zeros_like(params);
    const auto before = params;
    const std::vector<Tensor> grads{Tensor::vector({0.1, std::numeric_limits<double>::quiet_NaN()})};
    EXPECT_THROW(adam_step(params, grads, state, AdamHyper{}), DomainError);
    EXPECT_EQ(params, before);
    EXPECT_EQ(state.t, 0);
}

TEST(Adam, ShapeMismatchAndBadHypers)
{
    std::vector<Tensor> params{Tensor::vector({1.0, 2.0})};
    AdamState state = AdamState::zeros_like(params);
    EXPECT_THROW(adam_step(params, {Tensor::vector({1.0})}, state, AdamHyper{}), ShapeError);
    EXPECT_THROW(adam_step(params, {}, state, AdamHyper{}), ShapeError);
    EXPECT_ANY_THROW(validate(AdamHyper{0.0, 0.5, 0.999, 1e-8}));
    EXPECT_ANY_THROW(validate(AdamHyper{1e-3, 1.0, 0.999, 1e-8}));
    EXPECT_ANY_THROW(validate(AdamHyper{1e-3, 0.5, -0.1, 1e-8}));
}
