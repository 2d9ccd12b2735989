#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynafed/errors.hpp"

namespace dynafed {

/// Row-major matrix shape. Vectors are 1 x n, scalars are 1 x 1.
struct Shape {
    std::size_t rows = 1;
    std::size_t cols = 1;

    std::size_t size() const noexcept { return rows * cols; }
    bool is_scalar() const noexcept { return rows == 1 && cols == 1; }

    friend bool operator==(const Shape&, const Shape&) = default;

    std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

/// Dense row-major 2-D array of doubles.
class Tensor {
public:
    Tensor() : Tensor(Shape{1, 1}) {}

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(checked(shape).size(), fill) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(checked(shape)), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_.str());
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape{1, 1}, std::vector<double>{v}); }

    static Tensor row(std::initializer_list<double> values) {
        return Tensor(Shape{1, values.size()}, std::vector<double>(values));
    }

    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(Shape{1, n}, std::move(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rows() const noexcept { return shape_.rows; }
    std::size_t cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    double item() const {
        if (!shape_.is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_.str());
        return data_[0];
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static Shape checked(Shape s) {
        if (s.rows == 0 || s.cols == 0) throw ShapeError("tensor dimensions must be positive, got " + s.str());
        return s;
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Raw kernels used by the expression evaluator and by numeric fast paths.
/// Every kernel uses a fixed loop order, so results are reproducible bit for bit.
namespace kernels {

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

template <typename F>
Tensor map(const Tensor& a, F&& f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F&& f) {
    require_same(a, b, op);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "elementwise-mul", [](double x, double y) { return x * y; });
}
inline Tensor div(const Tensor& a, const Tensor& b) {
    return zip(a, b, "divide", [](double x, double y) { return x / y; });
}
inline Tensor scale(const Tensor& a, double k) {
    return map(a, [k](double x) { return x * k; });
}
inline Tensor relu(const Tensor& a) {
    return map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}
inline Tensor step(const Tensor& a) {
    return map(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}
inline Tensor exp(const Tensor& a) {
    return map(a, [](double x) { return std::exp(x); });
}
inline Tensor sqrt(const Tensor& a) {
    return map(a, [](double x) { return std::sqrt(x); });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + a.shape().str() + " x " + b.shape().str());
    }
    Tensor out(Shape{a.rows(), b.cols()});
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = &out(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            const double* brow = b.values().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    Tensor out(Shape{a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

/// Row-wise log-softmax with max subtraction.
inline Tensor log_softmax(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double mx = a(i, 0);
        for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::exp(a(i, j) - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - lse;
    }
    return out;
}

inline Tensor softmax(const Tensor& a) { return exp(log_softmax(a)); }

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return Tensor::scalar(s);
}

/// Sums over the row axis: r x c -> 1 x c.
inline Tensor sum_rows(const Tensor& a) {
    Tensor out(Shape{1, a.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
    return out;
}

/// Sums over the column axis: r x c -> r x 1.
inline Tensor sum_cols(const Tensor& a) {
    Tensor out(Shape{a.rows(), 1});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j);
        out[i] = s;
    }
    return out;
}

/// 1 x c -> rows x c.
inline Tensor broadcast_rows(const Tensor& a, std::size_t rows) {
    if (a.rows() != 1) throw ShapeError("broadcast_rows expects a 1xc operand, got " + a.shape().str());
    Tensor out(Shape{rows, a.cols()});
    for (std::size_t i = 0; i < rows; ++i)
        std::copy(a.values().begin(), a.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(i * a.cols()));
    return out;
}

/// r x 1 -> r x cols.
inline Tensor broadcast_cols(const Tensor& a, std::size_t cols) {
    if (a.cols() != 1) throw ShapeError("broadcast_cols expects an rx1 operand, got " + a.shape().str());
    Tensor out(Shape{a.rows(), cols});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = a[i];
    return out;
}

inline Tensor broadcast_scalar(const Tensor& a, Shape shape) {
    return Tensor(shape, a.item());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace kernels
}  // namespace dynafed
