#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/loss.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/numerics/expression.hpp"

namespace dynafed {

/// Builds a scalar training loss from the current parameter blocks.
using LossBuilder = std::function<Expr(std::span<const Expr>)>;

/// One plain gradient-descent step, as graph nodes: p - lr * dloss/dp.
inline std::vector<Expr> gradient_step(std::span<const Expr> params, const LossBuilder& loss_of, double lr) {
    const Expr l = loss_of(params);
    const auto g = grad(l, params);
    std::vector<Expr> next;
    next.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) next.push_back(expr::sub(params[i], expr::scale(g[i], lr)));
    return next;
}

/// `steps` chained gradient-descent steps. Nodes of step k are tagged with k
/// (1-based) for divergence reporting. The result stays differentiable with
/// respect to every input the loss reads.
inline std::vector<Expr> unroll(std::span<const Expr> params, const LossBuilder& loss_of, double lr, int steps) {
    if (steps < 0) throw ValidationError("unroll steps must be non-negative");
    if (!(lr > 0.0)) throw ValidationError("unroll learning rate must be positive");
    std::vector<Expr> current(params.begin(), params.end());
    for (int k = 1; k <= steps; ++k) {
        StepScope scope(k);
        current = gradient_step(current, loss_of, lr);
    }
    return current;
}

inline LossBuilder mlp_loss_builder(Expr X, Expr target) {
    return [X = std::move(X), target = std::move(target)](std::span<const Expr> p) {
        return soft_cross_entropy(mlp_logits(p, X), target);
    };
}

/// Differentiable full-batch SGD on an MLP: X and target may be any expressions.
inline std::vector<Expr> sgd_unroll_expr(std::span<const Expr> params, const Expr& X, const Expr& target, double lr,
                                         int steps) {
    return unroll(params, mlp_loss_builder(X, target), lr, steps);
}

/// Compiled loss-and-gradient evaluator for one architecture, cached per batch size.
class LossGradient {
public:
    explicit LossGradient(MlpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    struct Result {
        double loss;
        std::vector<double> grad;
    };

    Result operator()(const ParamVector& w, const Tensor& X, const Tensor& target) {
        const Program& prog = program(X.rows());
        Bindings b;
        bind_params(b, "w", w);
        b.insert_or_assign("X", X);
        b.insert_or_assign("T", target);
        auto out = prog.run(b);
        Result r{out[0].item(), {}};
        r.grad.reserve(spec_.param_count());
        for (std::size_t i = 1; i < out.size(); ++i)
            r.grad.insert(r.grad.end(), out[i].values().begin(), out[i].values().end());
        return r;
    }

private:
    const Program& program(std::size_t rows) {
        auto it = cache_.find(rows);
        if (it != cache_.end()) return *it->second;
        const auto params = param_inputs(spec_, "w");
        const Expr X = expr::input("X", Shape{rows, spec_.input_dim()});
        const Expr T = expr::input("T", Shape{rows, spec_.num_classes()});
        const Expr l = soft_cross_entropy(mlp_logits(params, X), T);
        std::vector<Expr> outputs{l};
        for (Expr& g : grad(l, params)) outputs.push_back(std::move(g));
        return *cache_.emplace(rows, std::make_unique<Program>(outputs)).first->second;
    }

    MlpSpec spec_;
    std::map<std::size_t, std::unique_ptr<Program>> cache_;
};

/// Full-batch plain gradient descent, evaluated numerically step by step.
/// Runs the same graph as sgd_unroll_expr, so both modes agree bit for bit.
inline ParamVector sgd_unroll(const ParamVector& w, const Tensor& X, const Tensor& target, double lr, int steps) {
    if (steps < 0) throw ValidationError("sgd_unroll steps must be non-negative");
    if (!(lr > 0.0)) throw ValidationError("sgd_unroll learning rate must be positive");
    const MlpSpec& spec = w.spec();
    validate_target(target, X.rows(), spec.num_classes());
    if (steps == 0) return w;

    const auto params = param_inputs(spec, "w");
    const auto next = sgd_unroll_expr(params, expr::input("X", X.shape()), expr::input("T", target.shape()), lr, 1);
    const Program prog(next);

    Bindings b;
    bind_params(b, "w", w);
    b.insert_or_assign("X", X);
    b.insert_or_assign("T", target);
    ParamVector current = w;
    for (int k = 1; k <= steps; ++k) {
        std::vector<Tensor> blocks;
        try {
            blocks = prog.run(b);
        } catch (const NumericOverflowError& e) {
            throw DivergenceError("gradient descent diverged at step " + std::to_string(k) + ": " + e.what(), k);
        }
        current = ParamVector::flatten(spec, blocks);
        bind_params(b, "w", current);
    }
    return current;
}

}  // namespace dynafed
