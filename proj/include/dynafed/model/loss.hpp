#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/numerics/expression.hpp"

namespace dynafed {

/// Mean soft-target cross entropy: -(1/n) sum_i sum_k target_ik * log_softmax(logits_i)_k.
inline Expr soft_cross_entropy(const Expr& logits, const Expr& target) {
    if (logits.shape() != target.shape()) {
        throw ShapeError("logits " + logits.shape().str() + " and target " + target.shape().str() + " differ");
    }
    const double n = static_cast<double>(logits.shape().rows);
    return expr::scale(expr::sum(expr::mul(target, expr::log_softmax(logits))), -1.0 / n);
}

/// Per-row cross entropy -sum_k target_ik log_softmax(logits_i)_k, evaluated directly.
inline std::vector<double> per_sample_cross_entropy(const Tensor& logits, const Tensor& target) {
    kernels::require_same(logits, target, "cross entropy");
    const Tensor logp = kernels::log_softmax(logits);
    std::vector<double> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < logits.cols(); ++k) s += target(i, k) * logp(i, k);
        out[i] = -s;
    }
    return out;
}

inline void validate_target(const Tensor& target, std::size_t rows, std::size_t classes) {
    if (target.rows() != rows || target.cols() != classes) {
        throw ShapeError("target has shape " + target.shape().str() + ", expected [" + std::to_string(rows) + "x" +
                         std::to_string(classes) + "]");
    }
    for (std::size_t i = 0; i < target.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < target.cols(); ++k) {
            if (target(i, k) < 0.0) throw ValidationError("target row " + std::to_string(i) + " has a negative entry");
            s += target(i, k);
        }
        if (std::abs(s - 1.0) > 1e-8) {
            throw ValidationError("target row " + std::to_string(i) + " sums to " + std::to_string(s) + ", not 1");
        }
    }
}

/// One-hot rows for hard labels.
inline Tensor one_hot(std::span<const int> labels, std::size_t classes) {
    Tensor t(Shape{labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw ValidationError("label " + std::to_string(labels[i]) + " out of range");
        }
        t(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return t;
}

/// Training loss of `params` on (X, target) as a scalar expression over constants.
inline Expr loss(const ParamVector& params, const Tensor& X, const Tensor& target) {
    validate_target(target, X.rows(), params.spec().num_classes());
    const auto blocks = param_constants(params);
    return soft_cross_entropy(mlp_logits(blocks, expr::constant(X)), expr::constant(target));
}

inline double loss_value(const ParamVector& params, const Tensor& X, const Tensor& target) {
    validate_target(target, X.rows(), params.spec().num_classes());
    const auto per = per_sample_cross_entropy(predict_logits(params, X), target);
    double s = 0.0;
    for (double v : per) s += v;
    return s / static_cast<double>(per.size());
}

}  // namespace dynafed
