#pragma once

#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/loss.hpp"
#include "dynafed/numerics/tensor.hpp"

namespace dynafed {

/// Rows of X with integer class labels in [0, num_classes).
struct LabeledDataset {
    Tensor X;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    LabeledDataset() = default;
    LabeledDataset(Tensor x, std::vector<int> y, std::size_t k) : X(std::move(x)), labels(std::move(y)), num_classes(k) {
        validate();
    }

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return X.cols(); }

    void validate() const {
        if (labels.empty()) throw ValidationError("dataset must contain at least one sample");
        if (X.rows() != labels.size()) throw ShapeError("dataset has " + std::to_string(X.rows()) + " rows but " +
                                                        std::to_string(labels.size()) + " labels");
        if (num_classes == 0) throw ValidationError("dataset needs at least one class");
        for (int y : labels) {
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
                throw ValidationError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
            }
        }
    }

    Tensor targets() const { return one_hot(labels, num_classes); }

    LabeledDataset subset(std::span<const std::size_t> indices) const {
        if (indices.empty()) throw ValidationError("empty subset");
        Tensor x(Shape{indices.size(), dim()});
        std::vector<int> y(indices.size());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const std::size_t i = indices[r];
            if (i >= size()) throw ValidationError("subset index out of range");
            for (std::size_t c = 0; c < dim(); ++c) x(r, c) = X(i, c);
            y[r] = labels[i];
        }
        return LabeledDataset(std::move(x), std::move(y), num_classes);
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes, 0);
        for (int y : labels) ++counts[static_cast<std::size_t>(y)];
        return counts;
    }
};

}  // namespace dynafed
