#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/numerics/rng.hpp"

namespace dynafed {

struct BlobsConfig {
    std::size_t classes = 5;
    std::size_t dim = 2;
    std::size_t per_class = 200;
    double radius = 4.0;
    double stddev = 0.5;

    void validate() const {
        if (classes < 2) throw ConfigError("blobs need at least 2 classes");
        if (dim < 2) throw ConfigError("blobs need at least 2 dimensions");
        if (per_class == 0) throw ConfigError("blobs need at least one sample per class");
        if (!(radius > 0.0)) throw ConfigError("blob radius must be positive");
        if (!(stddev >= 0.0)) throw ConfigError("blob stddev must be non-negative");
    }
};

/// Isotropic Gaussian clusters. Class k is centred at radius * (cos, sin) of
/// angle 2*pi*k/K in the first two coordinates; other coordinates are centred at 0.
/// Samples are emitted class by class.
inline LabeledDataset generate_blobs(const BlobsConfig& cfg, Rng rng) {
    cfg.validate();
    const std::size_t n = cfg.classes * cfg.per_class;
    Tensor X(Shape{n, cfg.dim});
    std::vector<int> labels(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(cfg.classes);
        const double cx = cfg.radius * std::cos(angle);
        const double cy = cfg.radius * std::sin(angle);
        for (std::size_t i = 0; i < cfg.per_class; ++i, ++row) {
            for (std::size_t c = 0; c < cfg.dim; ++c) X(row, c) = cfg.stddev * rng.normal();
            X(row, 0) += cx;
            X(row, 1) += cy;
            labels[row] = static_cast<int>(k);
        }
    }
    return LabeledDataset(std::move(X), std::move(labels), cfg.classes);
}

}  // namespace dynafed
