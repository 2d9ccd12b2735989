#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dynafed/errors.hpp"

namespace dynafed {

/// Counter-based random stream.
///
/// A stream is identified by a 64-bit key; the i-th draw is a pure function
/// of (key, i). `split(label)` derives an independent child key from the
/// parent key and the label, so the same seed and the same split path always
/// reproduce the same sequence no matter what else was drawn in between.
/// Distributions are implemented here rather than taken from <random>,
/// whose distribution algorithms are not portable across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x5851F42D4C957F2DULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    /// Child stream for `label`; does not advance this stream.
    Rng split(std::string_view label) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
        for (unsigned char ch : label) {
            h ^= ch;
            h *= 0x100000001B3ULL;
        }
        Rng child;
        child.key_ = mix(key_ ^ mix(h));
        return child;
    }

    Rng split(std::uint64_t index) const {
        Rng child;
        child.key_ = mix(key_ + mix(index + 0x632BE59BD9B4E019ULL));
        return child;
    }

    result_type operator()() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ValidationError("Rng::below requires n > 0");
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// log of a Gamma(shape, 1) draw. Working in log space keeps tiny shapes
    /// (Dirichlet alpha ~ 0.01) from underflowing to exact zero.
    double log_gamma_draw(double shape) {
        if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
        if (shape < 1.0) {
            // Gamma(a) = Gamma(a + 1) * U^(1/a)
            return log_gamma_draw(shape + 1.0) + std::log(uniform_open()) / shape;
        }
        // Marsaglia-Tsang
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
        }
    }

    /// Symmetric Dirichlet(alpha * 1_k) draw.
    std::vector<double> dirichlet(std::size_t k, double alpha) {
        std::vector<double> logs(k);
        for (auto& l : logs) l = log_gamma_draw(alpha);
        double mx = logs[0];
        for (double l : logs) mx = std::max(mx, l);
        double total = 0.0;
        std::vector<double> p(k);
        for (std::size_t i = 0; i < k; ++i) {
            p[i] = std::exp(logs[i] - mx);
            total += p[i];
        }
        for (auto& v : p) v /= total;
        return p;
    }

    /// Fisher-Yates.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

    /// `k` distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw ValidationError("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + below(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dynafed
