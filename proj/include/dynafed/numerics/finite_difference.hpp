#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "dynafed/errors.hpp"
#include "dynafed/numerics/tensor.hpp"

namespace dynafed {

/// Central-difference gradient estimate of a scalar function, one coordinate at a time.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    if (!(h > 0.0)) throw ValidationError("finite_difference step must be positive");
    Tensor g(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Norm-wise relative error max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor).
inline double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-300) {
    kernels::require_same(a, b, "max_relative_error");
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    return diff / scale;
}

}  // namespace dynafed
