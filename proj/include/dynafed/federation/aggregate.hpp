#pragma once

#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/mlp.hpp"

namespace dynafed {

enum class AggregationMode { Weighted, Uniform };

inline std::string to_string(AggregationMode m) { return m == AggregationMode::Weighted ? "weighted" : "uniform"; }

inline AggregationMode parse_aggregation_mode(const std::string& s) {
    if (s == "weighted") return AggregationMode::Weighted;
    if (s == "uniform") return AggregationMode::Uniform;
    throw ConfigError("unknown aggregation mode '" + s + "' (expected weighted or uniform)");
}

/// Convex combination of client models.
///
/// Weighted mode uses coefficients weights[m] / sum(weights), i.e. alpha_m / P^c;
/// uniform mode uses 1 / |list|. The sum is formed as w_0 + sum_m c_m (w_m - w_0),
/// so identical inputs come back exactly.
inline ParamVector aggregate(std::span<const ParamVector> models, std::span<const double> weights,
                             AggregationMode mode) {
    if (models.empty()) throw ValidationError("cannot aggregate an empty model list");
    for (const auto& m : models) require_same_spec(models.front(), m);

    std::vector<double> coef(models.size());
    if (mode == AggregationMode::Uniform) {
        for (auto& c : coef) c = 1.0 / static_cast<double>(models.size());
    } else {
        if (weights.size() != models.size()) throw ValidationError("aggregate: one weight per model required");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ValidationError("aggregate: negative weight");
            total += w;
        }
        if (!(total > 0.0)) throw ValidationError("aggregate: weights must have a positive sum");
        for (std::size_t i = 0; i < coef.size(); ++i) coef[i] = weights[i] / total;
    }

    const ParamVector& base = models.front();
    ParamVector out = base;
    for (std::size_t m = 1; m < models.size(); ++m) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef[m] * (models[m][i] - base[i]);
    }
    return out;
}

}  // namespace dynafed
