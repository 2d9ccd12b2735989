#pragma once

#include "dynafed/errors.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/numerics/tensor.hpp"

namespace dynafed {

/// Learnable synthetic set: inputs X (n x d) and label logits (n x K).
/// Training targets are softmax(Ylogits), so labels stay on the simplex.
struct SyntheticDataset {
    Tensor X;
    Tensor Ylogits;

    std::size_t size() const noexcept { return X.rows(); }
    std::size_t dim() const noexcept { return X.cols(); }
    std::size_t num_classes() const noexcept { return Ylogits.cols(); }

    Tensor targets() const { return kernels::softmax(Ylogits); }

    void validate() const {
        if (X.rows() != Ylogits.rows()) throw ShapeError("synthetic X and Ylogits row counts differ");
        if (!X.all_finite() || !Ylogits.all_finite()) throw ValidationError("synthetic dataset has non-finite entries");
    }

    friend bool operator==(const SyntheticDataset&, const SyntheticDataset&) = default;
};

/// X ~ N(0, 1) entrywise, Ylogits = 0 (uniform labels).
inline SyntheticDataset init_synthetic(std::size_t n, std::size_t d, std::size_t K, Rng rng) {
    if (n == 0 || d == 0 || K == 0) throw ValidationError("init_synthetic needs n, d, K >= 1");
    SyntheticDataset s{Tensor(Shape{n, d}), Tensor(Shape{n, K}, 0.0)};
    for (auto& v : s.X.values()) v = rng.normal();
    return s;
}

}  // namespace dynafed
