#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/numerics/expression.hpp"

namespace dynafed {

enum class MetricKind { NormalizedL2, Cosine, L2 };

inline std::string to_string(MetricKind k) {
    switch (k) {
        case MetricKind::NormalizedL2: return "normalized_l2";
        case MetricKind::Cosine: return "cosine";
        case MetricKind::L2: return "l2";
    }
    return "?";
}

inline MetricKind parse_metric_kind(const std::string& s) {
    if (s == "normalized_l2") return MetricKind::NormalizedL2;
    if (s == "cosine") return MetricKind::Cosine;
    if (s == "l2") return MetricKind::L2;
    throw ConfigError("unknown distance metric '" + s + "' (expected normalized_l2, cosine or l2)");
}

/// Distance between parameter vectors.
///   l2:            |a - b|^2
///   cosine:        1 - <a, b> / (|a| |b|)
///   normalized_l2: |a - b|^2 / |w_start - w_target|^2 for a stored reference pair
class DistanceMetric {
public:
    static DistanceMetric l2() { return DistanceMetric(MetricKind::L2, 0.0); }
    static DistanceMetric cosine() { return DistanceMetric(MetricKind::Cosine, 0.0); }

    static DistanceMetric normalized_l2(const ParamVector& w_start, const ParamVector& w_target) {
        const double n = squared_distance(w_start, w_target);
        if (!(n > 0.0)) throw ValidationError("normalized_l2 needs distinct reference checkpoints");
        return DistanceMetric(MetricKind::NormalizedL2, n);
    }

    /// The metric of `kind`, taking its reference pair from (w_start, w_target) when one is needed.
    static DistanceMetric of(MetricKind kind, const ParamVector& w_start, const ParamVector& w_target) {
        switch (kind) {
            case MetricKind::L2: return l2();
            case MetricKind::Cosine: return cosine();
            case MetricKind::NormalizedL2: return normalized_l2(w_start, w_target);
        }
        throw ValidationError("unknown metric");
    }

    MetricKind kind() const noexcept { return kind_; }
    double normalizer() const noexcept { return normalizer_; }

    static double squared_distance(const ParamVector& a, const ParamVector& b) {
        require_same_spec(a, b);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    }

private:
    DistanceMetric(MetricKind kind, double normalizer) : kind_(kind), normalizer_(normalizer) {}

    MetricKind kind_;
    double normalizer_;
};

inline double distance(const ParamVector& a, const ParamVector& b, const DistanceMetric& metric) {
    require_same_spec(a, b);
    switch (metric.kind()) {
        case MetricKind::L2: return DistanceMetric::squared_distance(a, b);
        case MetricKind::NormalizedL2: return DistanceMetric::squared_distance(a, b) / metric.normalizer();
        case MetricKind::Cosine: {
            const double na = kernels::squared_norm(a.values());
            const double nb = kernels::squared_norm(b.values());
            if (!(na > 0.0) || !(nb > 0.0)) throw UndefinedMetricError("cosine distance with a zero vector");
            return 1.0 - kernels::dot(a.values(), b.values()) / (std::sqrt(na) * std::sqrt(nb));
        }
    }
    throw ValidationError("unknown metric");
}

/// Graph form of the distance between two block lists. For normalized_l2,
/// `inv_normalizer` is a 1x1 expression holding 1 / |w_start - w_target|^2.
inline Expr distance_expr(std::span<const Expr> a, std::span<const Expr> b, MetricKind kind,
                          const std::optional<Expr>& inv_normalizer = std::nullopt) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("distance_expr: block lists differ");
    auto total = [&](auto&& term) {
        Expr acc = term(0);
        for (std::size_t i = 1; i < a.size(); ++i) acc = expr::add(acc, term(i));
        return acc;
    };
    switch (kind) {
        case MetricKind::L2:
        case MetricKind::NormalizedL2: {
            const Expr sq = total([&](std::size_t i) { return expr::square_sum(expr::sub(a[i], b[i])); });
            if (kind == MetricKind::L2) return sq;
            if (!inv_normalizer) throw ValidationError("normalized_l2 needs a normalizer expression");
            return expr::mul(sq, *inv_normalizer);
        }
        case MetricKind::Cosine: {
            const Expr dot = total([&](std::size_t i) { return expr::sum(expr::mul(a[i], b[i])); });
            const Expr na = total([&](std::size_t i) { return expr::square_sum(a[i]); });
            const Expr nb = total([&](std::size_t i) { return expr::square_sum(b[i]); });
            const Expr cos = expr::div(dot, expr::mul(expr::sqrt(na), expr::sqrt(nb)));
            return expr::sub(expr::constant(Tensor::scalar(1.0)), cos);
        }
    }
    throw ValidationError("unknown metric");
}

}  // namespace dynafed
