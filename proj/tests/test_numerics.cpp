#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dynafed/numerics/expression.hpp"
#include "dynafed/numerics/finite_difference.hpp"
#include "dynafed/numerics/rng.hpp"

using namespace dynafed;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

double eval_scalar(const Expr& e, const std::string& name, const Tensor& x) {
    return evaluate(e, Bindings{{name, x}}).item();
}

}  // namespace

TEST(Evaluate, Doubling) {
    const Expr x = expr::input("x", Shape{1, 2});
    EXPECT_EQ(evaluate(x + x, {{"x", Tensor::row({1, 2})}}), Tensor::row({2, 4}));
}

TEST(Evaluate, Relu) {
    const Expr x = expr::input("x", Shape{1, 3});
    EXPECT_EQ(evaluate(expr::relu(x), {{"x", Tensor::row({-1, 0, 3})}}), Tensor::row({0, 0, 3}));
}

TEST(Evaluate, MatmulOfOnes) {
    const Expr a = expr::constant(Tensor(Shape{2, 3}, 1.0));
    const Expr b = expr::constant(Tensor(Shape{3, 2}, 1.0));
    EXPECT_EQ(evaluate(expr::matmul(a, b)), Tensor(Shape{2, 2}, 3.0));
}

TEST(Evaluate, ShapeMismatchAtConstruction) {
    const Expr a = expr::input("a", Shape{2, 3});
    const Expr b = expr::input("b", Shape{2, 2});
    EXPECT_THROW(a + b, ShapeError);
    EXPECT_THROW(expr::matmul(a, a), ShapeError);
}

TEST(Evaluate, BindingShapeMismatchNamesNode) {
    const Expr a = expr::input("a", Shape{2, 3});
    try {
        evaluate(a + a, {{"a", Tensor(Shape{3, 2})}});
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
    EXPECT_THROW(evaluate(a + a, {}), ValidationError);
}

TEST(Evaluate, NonFiniteIsNumericOverflow) {
    const Expr x = expr::input("x", Shape{1, 1});
    EXPECT_THROW(evaluate(expr::exp(x), {{"x", Tensor::scalar(1000.0)}}), NumericOverflowError);
}

TEST(Evaluate, PureFunctionBitIdentical) {
    Rng rng(3);
    const Expr x = expr::input("x", Shape{4, 5});
    const Expr w = expr::constant(random_tensor(Shape{5, 3}, rng));
    const Expr e = expr::sum(expr::log_softmax(expr::relu(expr::matmul(x, w))));
    const Bindings b{{"x", random_tensor(Shape{4, 5}, rng)}};
    EXPECT_EQ(evaluate(e, b), evaluate(e, b));
}

TEST(Evaluate, LogSoftmaxStableForLargeLogits) {
    const Expr x = expr::constant(Tensor::row({1000.0, 1000.0}));
    const Tensor y = evaluate(expr::log_softmax(x));
    EXPECT_NEAR(y[0], -std::log(2.0), 1e-12);
    EXPECT_NEAR(y[1], -std::log(2.0), 1e-12);
}

TEST(Grad, SquareAtThree) {
    const Expr x = expr::input("x", Shape{1, 1});
    const Expr g = grad(expr::sum(x * x), x);
    EXPECT_DOUBLE_EQ(evaluate(g, {{"x", Tensor::scalar(3.0)}}).item(), 6.0);
}

TEST(Grad, SecondDerivativeOfCube) {
    const Expr x = expr::input("x", Shape{1, 1});
    const Expr g = grad(expr::sum(x * x * x), x);
    const Expr gg = grad(expr::sum(g), x);
    EXPECT_DOUBLE_EQ(evaluate(gg, {{"x", Tensor::scalar(2.0)}}).item(), 12.0);
}

TEST(Grad, AbsentInputGivesZeroOfItsShape) {
    const Expr x = expr::input("x", Shape{1, 1});
    const Expr y = expr::input("y", Shape{2, 3});
    const Expr g = grad(expr::sum(x * x), y);
    EXPECT_EQ(g.op(), Op::Constant);
    EXPECT_EQ(evaluate(g), Tensor(Shape{2, 3}));
}

TEST(Grad, ReluSubgradientAtZeroIsZero) {
    const Expr x = expr::input("x", Shape{1, 3});
    const Expr g = grad(expr::sum(expr::relu(x)), x);
    EXPECT_EQ(evaluate(g, {{"x", Tensor::row({-1.0, 0.0, 2.0})}}), Tensor::row({0.0, 0.0, 1.0}));
}

TEST(Grad, RequiresScalar) {
    const Expr x = expr::input("x", Shape{1, 2});
    EXPECT_THROW(grad(x, x), ShapeError);
}

TEST(FiniteDifference, SumOfSquares) {
    auto f = [](const Tensor& t) { return t[0] * t[0] + t[1] * t[1]; };
    const Tensor g = finite_difference(f, Tensor::row({1, 2}), 1e-6);
    EXPECT_NEAR(g[0], 2.0, 1e-6);
    EXPECT_NEAR(g[1], 4.0, 1e-6);
}

TEST(FiniteDifference, ConstantIsZero) {
    const Tensor g = finite_difference([](const Tensor&) { return 7.0; }, Tensor::row({1, 2, 3}), 1e-6);
    EXPECT_EQ(g, Tensor(Shape{1, 3}));
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
    EXPECT_THROW(finite_difference([](const Tensor&) { return 0.0; }, Tensor::row({1}), 0.0), ValidationError);
}

// Every primitive, first and second order, against central differences on random inputs.
struct PrimitiveCase {
    std::string name;
    Shape shape;
    double lo, hi;
    std::function<Expr(const Expr&)> build;
    bool smooth;
};

class PrimitiveGrad : public ::testing::TestWithParam<int> {
public:
    static std::vector<PrimitiveCase> cases() {
        Rng rng(101);
        const Tensor w23 = random_tensor(Shape{2, 3}, rng);
        const Tensor w33 = random_tensor(Shape{3, 3}, rng);
        const Tensor r13 = random_tensor(Shape{1, 3}, rng);
        const Tensor c21 = random_tensor(Shape{2, 1}, rng);
        using namespace expr;
        return {
            {"matmul", {2, 3}, -1, 1, [=](const Expr& x) { return matmul(x, constant(w33)); }, true},
            {"matmul_self", {2, 3}, -1, 1, [](const Expr& x) { return matmul(x, transpose(x)); }, true},
            {"add", {2, 3}, -1, 1, [=](const Expr& x) { return add(x, mul(x, x)); }, true},
            {"subtract", {2, 3}, -1, 1, [=](const Expr& x) { return sub(constant(w23), mul(x, x)); }, true},
            {"scale", {2, 3}, -1, 1, [](const Expr& x) { return scale(mul(x, x), -2.5); }, true},
            {"mul", {2, 3}, -1, 1, [=](const Expr& x) { return mul(x, constant(w23)); }, true},
            {"div", {2, 3}, 0.5, 1.5, [=](const Expr& x) { return div(constant(w23), x); }, true},
            {"relu", {2, 3}, -1, 1, [](const Expr& x) { return relu(x); }, false},
            {"exp", {2, 3}, -1, 1, [](const Expr& x) { return exp(x); }, true},
            {"sqrt", {2, 3}, 0.5, 1.5, [](const Expr& x) { return sqrt(x); }, true},
            {"log_softmax", {2, 3}, -1, 1, [](const Expr& x) { return log_softmax(x); }, true},
            {"sum", {2, 3}, -1, 1, [](const Expr& x) { return broadcast_scalar(sum(mul(x, x)), Shape{2, 3}); }, true},
            {"sum_rows", {2, 3}, -1, 1, [](const Expr& x) { return broadcast_rows(sum_rows(mul(x, x)), 2); }, true},
            {"sum_cols", {2, 3}, -1, 1, [](const Expr& x) { return broadcast_cols(sum_cols(mul(x, x)), 3); }, true},
            {"add_row", {1, 3}, -1, 1, [=](const Expr& x) { return add_row(constant(w23), mul(x, x)); }, true},
            {"broadcast_cols", {2, 1}, -1, 1, [=](const Expr& x) { return broadcast_cols(mul(x, constant(c21)), 3); },
             true},
            {"transpose", {2, 3}, -1, 1, [=](const Expr& x) { return transpose(mul(x, x)); }, true},
            {"row_vector", {1, 3}, -1, 1, [=](const Expr& x) { return mul(exp(x), constant(r13)); }, true},
        };
    }
};

TEST_P(PrimitiveGrad, FirstOrderMatchesFiniteDifferences) {
    const auto c = cases()[static_cast<std::size_t>(GetParam())];
    Rng rng(7 + static_cast<std::uint64_t>(GetParam()));
    const Expr x = expr::input("x", c.shape);
    const Expr y = c.build(x);
    const Expr proj = expr::constant(random_tensor(y.shape(), rng));
    const Expr f = expr::sum(expr::mul(y, proj));
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor x0 = random_tensor(c.shape, rng, c.lo, c.hi);
        const Tensor analytic = evaluate(grad(f, x), {{"x", x0}});
        const Tensor numeric = finite_difference([&](const Tensor& t) { return eval_scalar(f, "x", t); }, x0, 1e-6);
        EXPECT_LT(max_relative_error(analytic, numeric), 1e-5) << c.name;
    }
}

TEST_P(PrimitiveGrad, SecondOrderMatchesFiniteDifferencesOfGradient) {
    const auto c = cases()[static_cast<std::size_t>(GetParam())];
    Rng rng(70 + static_cast<std::uint64_t>(GetParam()));
    const Expr x = expr::input("x", c.shape);
    const Expr y = c.build(x);
    const Expr f = expr::sum(expr::mul(y, expr::constant(random_tensor(y.shape(), rng))));
    const Expr g = grad(f, x);
    const Expr h = expr::sum(expr::mul(expr::mul(g, g), expr::constant(random_tensor(c.shape, rng))));
    const Expr hg = grad(h, x);
    for (int trial = 0; trial < 3; ++trial) {
        const Tensor x0 = random_tensor(c.shape, rng, c.lo, c.hi);
        const Tensor analytic = evaluate(hg, {{"x", x0}});
        const Tensor numeric = finite_difference([&](const Tensor& t) { return eval_scalar(h, "x", t); }, x0, 1e-6);
        if (c.smooth) {
            EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << c.name;
        } else {
            // relu: g = step(x) * p, so h is piecewise constant away from 0.
            EXPECT_LT(max_relative_error(analytic, numeric, 1.0), 1e-4) << c.name;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(AllOps, PrimitiveGrad,
                         ::testing::Range(0, static_cast<int>(PrimitiveGrad::cases().size())),
                         [](const auto& info) { return PrimitiveGrad::cases()[info.param].name; });

TEST(Grad, DeepGraphDoesNotRecurse) {
    // 20k chained nodes: evaluation, differentiation and destruction must all be iterative.
    const Expr x = expr::input("x", Shape{1, 1});
    Expr e = x;
    for (int i = 0; i < 20000; ++i) e = expr::scale(e + x, 0.5);
    const Expr g = grad(expr::sum(e), x);
    const double v = evaluate(g, {{"x", Tensor::scalar(1.0)}}).item();
    EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(Grad, WrtIntermediateNodeTreatsItAsFree) {
    const Expr x = expr::input("x", Shape{1, 1});
    const Expr y = x * x;
    const Expr f = expr::sum(y * y);  // df/dy = 2y
    const Expr gy = grad(f, y);
    EXPECT_DOUBLE_EQ(evaluate(gy, {{"x", Tensor::scalar(3.0)}}).item(), 18.0);
}

TEST(Rng, SameSeedAndSplitPathReproduce) {
    Rng a(42), b(42);
    Rng a1 = a.split("clients").split(3), b1 = b.split("clients").split(3);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a1(), b1());
    // Drawing from the parent does not perturb children split later.
    Rng c(42);
    for (int i = 0; i < 10; ++i) c();
    Rng c1 = c.split("clients").split(3), d1 = Rng(42).split("clients").split(3);
    EXPECT_EQ(c1(), d1());
    EXPECT_NE(Rng(42).split("a")(), Rng(42).split("b")());
}

TEST(Rng, NormalMoments) {
    Rng rng(5);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, GammaMeanMatchesShape) {
    Rng rng(9);
    for (double shape : {0.05, 0.5, 2.0, 7.5}) {
        double s = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) s += std::exp(rng.log_gamma_draw(shape));
        EXPECT_NEAR(s / n, shape, 0.03 * std::max(shape, 1.0)) << shape;
    }
}

TEST(Rng, DirichletOnSimplexEvenForTinyAlpha) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto p = rng.dirichlet(10, 0.01);
        double s = 0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Rng, SampleWithoutReplacementDistinct) {
    Rng rng(2);
    auto idx = rng.sample_without_replacement(50, 20);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
    EXPECT_LT(idx.back(), 50u);
    EXPECT_THROW(rng.sample_without_replacement(3, 4), ValidationError);
}

TEST(Tensor, DataLengthMustMatchShape) {
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(Tensor(Shape{0, 2}), ShapeError);
}
