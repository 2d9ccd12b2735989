#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/numerics/expression.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/numerics/tensor.hpp"

namespace dynafed {

/// Fully connected relu network: layer_sizes = {input dim, hidden..., class count}.
/// The last layer is linear.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;

    MlpSpec() = default;
    explicit MlpSpec(std::vector<std::size_t> sizes) : layer_sizes(std::move(sizes)) { validate(); }

    void validate() const {
        if (layer_sizes.size() < 2) throw ValidationError("an MLP needs at least an input and an output layer");
        for (std::size_t s : layer_sizes)
            if (s == 0) throw ValidationError("MLP layer sizes must be positive");
    }

    std::size_t num_layers() const noexcept { return layer_sizes.size() - 1; }
    std::size_t input_dim() const noexcept { return layer_sizes.front(); }
    std::size_t num_classes() const noexcept { return layer_sizes.back(); }

    Shape weight_shape(std::size_t l) const { return Shape{layer_sizes[l], layer_sizes[l + 1]}; }
    Shape bias_shape(std::size_t l) const { return Shape{1, layer_sizes[l + 1]}; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < num_layers(); ++l) n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
        return n;
    }

    /// Shapes of the parameter blocks in flat order: W0, b0, W1, b1, ...
    std::vector<Shape> block_shapes() const {
        std::vector<Shape> shapes;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            shapes.push_back(weight_shape(l));
            shapes.push_back(bias_shape(l));
        }
        return shapes;
    }

    std::string str() const {
        std::string s;
        for (std::size_t i = 0; i < layer_sizes.size(); ++i) s += (i ? "-" : "") + std::to_string(layer_sizes[i]);
        return s;
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Flattened network parameters. Layout per layer: weight (in x out, row-major), then bias.
class ParamVector {
public:
    ParamVector() = default;

    ParamVector(MlpSpec spec, std::vector<double> values) : spec_(std::move(spec)), values_(std::move(values)) {
        if (values_.size() != spec_.param_count()) {
            throw ValidationError("parameter vector length " + std::to_string(values_.size()) + " does not match " +
                                  spec_.str() + " (" + std::to_string(spec_.param_count()) + ")");
        }
    }

    static ParamVector zeros(const MlpSpec& spec) { return ParamVector(spec, std::vector<double>(spec.param_count())); }

    const MlpSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Splits into per-block tensors W0, b0, W1, b1, ...
    std::vector<Tensor> unflatten() const {
        std::vector<Tensor> blocks;
        std::size_t offset = 0;
        for (const Shape& s : spec_.block_shapes()) {
            std::vector<double> chunk(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                                      values_.begin() + static_cast<std::ptrdiff_t>(offset + s.size()));
            blocks.emplace_back(s, std::move(chunk));
            offset += s.size();
        }
        return blocks;
    }

    static ParamVector flatten(const MlpSpec& spec, std::span<const Tensor> blocks) {
        const auto shapes = spec.block_shapes();
        if (blocks.size() != shapes.size()) throw ValidationError("wrong number of parameter blocks");
        std::vector<double> values;
        values.reserve(spec.param_count());
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (blocks[i].shape() != shapes[i]) {
                throw ShapeError("parameter block " + std::to_string(i) + " has shape " + blocks[i].shape().str() +
                                 ", expected " + shapes[i].str());
            }
            values.insert(values.end(), blocks[i].values().begin(), blocks[i].values().end());
        }
        return ParamVector(spec, std::move(values));
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    MlpSpec spec_;
    std::vector<double> values_;
};

inline void require_same_spec(const ParamVector& a, const ParamVector& b) {
    if (a.spec() != b.spec()) {
        throw ValidationError("parameter vectors have different architectures: " + a.spec().str() + " vs " +
                              b.spec().str());
    }
}

/// He initialization: weights ~ Normal(0, 2 / fan_in), biases zero.
inline ParamVector init_params(const MlpSpec& spec, Rng rng) {
    spec.validate();
    std::vector<double> values;
    values.reserve(spec.param_count());
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(spec.layer_sizes[l]));
        for (std::size_t i = 0; i < spec.weight_shape(l).size(); ++i) values.push_back(rng.normal(0.0, stddev));
        values.insert(values.end(), spec.layer_sizes[l + 1], 0.0);
    }
    return ParamVector(spec, std::move(values));
}

/// Parameter blocks as graph inputs named "<prefix>.W<l>" and "<prefix>.b<l>".
inline std::vector<Expr> param_inputs(const MlpSpec& spec, const std::string& prefix) {
    std::vector<Expr> inputs;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        inputs.push_back(expr::input(prefix + ".W" + std::to_string(l), spec.weight_shape(l)));
        inputs.push_back(expr::input(prefix + ".b" + std::to_string(l), spec.bias_shape(l)));
    }
    return inputs;
}

inline std::vector<Expr> param_constants(const ParamVector& w) {
    std::vector<Expr> blocks;
    for (Tensor& t : w.unflatten()) blocks.push_back(expr::constant(std::move(t)));
    return blocks;
}

/// Adds the blocks of `w` to `bindings` under the names used by param_inputs.
inline void bind_params(Bindings& bindings, const std::string& prefix, const ParamVector& w) {
    auto blocks = w.unflatten();
    for (std::size_t l = 0; l < w.spec().num_layers(); ++l) {
        bindings.insert_or_assign(prefix + ".W" + std::to_string(l), std::move(blocks[2 * l]));
        bindings.insert_or_assign(prefix + ".b" + std::to_string(l), std::move(blocks[2 * l + 1]));
    }
}

/// Logits of the network for a batch of inputs (rows of X).
inline Expr mlp_logits(std::span<const Expr> params, const Expr& X) {
    if (params.size() % 2 != 0 || params.empty()) throw ValidationError("parameter blocks must come in W/b pairs");
    Expr h = X;
    const std::size_t layers = params.size() / 2;
    for (std::size_t l = 0; l < layers; ++l) {
        h = expr::add_row(expr::matmul(h, params[2 * l]), params[2 * l + 1]);
        if (l + 1 < layers) h = expr::relu(h);
    }
    return h;
}

/// Numeric forward pass with the same kernels the graph uses.
inline Tensor predict_logits(const ParamVector& w, const Tensor& X) {
    const MlpSpec& spec = w.spec();
    if (X.cols() != spec.input_dim()) {
        throw ShapeError("input has " + std::to_string(X.cols()) + " features, network expects " +
                         std::to_string(spec.input_dim()));
    }
    const auto blocks = w.unflatten();
    Tensor h = X;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        h = kernels::add(kernels::matmul(h, blocks[2 * l]), kernels::broadcast_rows(blocks[2 * l + 1], h.rows()));
        if (l + 1 < spec.num_layers()) h = kernels::relu(h);
    }
    return h;
}

}  // namespace dynafed
