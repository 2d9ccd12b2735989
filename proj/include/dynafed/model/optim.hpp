#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"

namespace dynafed {

enum class OptimizerKind { Sgd, Adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("optimizer learning rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("Adam betas must lie in [0, 1)");
        }
        if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    }
};

/// Stateful first-order optimizer over a flat parameter span.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::size_t size) : cfg_(cfg) {
        cfg_.validate();
        if (cfg_.kind == OptimizerKind::Adam) {
            m_.assign(size, 0.0);
            v_.assign(size, 0.0);
        }
    }

    const OptimizerConfig& config() const noexcept { return cfg_; }
    long steps() const noexcept { return t_; }

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != grad.size()) throw ValidationError("optimizer: gradient length mismatch");
        ++t_;
        if (cfg_.kind == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg_.lr * grad[i];
            return;
        }
        if (params.size() != m_.size()) throw ValidationError("optimizer: parameter length changed");
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

}  // namespace dynafed
