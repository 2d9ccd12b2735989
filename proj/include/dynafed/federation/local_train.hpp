#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/model/optim.hpp"
#include "dynafed/model/trainer.hpp"
#include "dynafed/numerics/rng.hpp"

namespace dynafed {

struct LocalTrainConfig {
    int epochs = 1;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer{};

    void validate() const {
        if (epochs < 1) throw ConfigError("local epochs must be at least 1");
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        optimizer.validate();
    }
};

/// (mu / 2) |w - anchor|^2
inline double proximal_penalty(std::span<const double> w, std::span<const double> anchor, double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[i] - anchor[i];
        s += d * d;
    }
    return 0.5 * mu * s;
}

/// Adds mu * (w - anchor) to `grad` in place.
inline void add_proximal_gradient(std::span<double> grad, std::span<const double> w, std::span<const double> anchor,
                                  double mu) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += mu * (w[i] - anchor[i]);
}

/// Minibatch trainer for one architecture. Keeps compiled gradient programs
/// across calls so a simulation does not rebuild graphs for every client.
class LocalTrainer {
public:
    explicit LocalTrainer(MlpSpec spec) : spec_(spec), grads_(std::move(spec)) {}

    /// `epochs` passes over a per-epoch shuffle of `shard`, one optimizer per call.
    /// With `mu_prox` set, each minibatch loss gains (mu/2)|w - w_init|^2.
    ParamVector train(const ParamVector& w, const LabeledDataset& shard, const LocalTrainConfig& cfg, Rng rng,
                      std::optional<double> mu_prox = std::nullopt) {
        cfg.validate();
        if (w.spec() != spec_) throw ValidationError("local trainer architecture mismatch");
        if (shard.size() == 0) throw ValidationError("cannot train on an empty shard");
        if (shard.dim() != spec_.input_dim()) throw ShapeError("shard feature dimension does not match the network");
        if (mu_prox && *mu_prox < 0.0) throw ConfigError("proximal coefficient must be non-negative");
        const bool proximal = mu_prox && *mu_prox > 0.0;

        ParamVector current = w;
        Optimizer opt(cfg.optimizer, current.size());
        std::vector<std::size_t> order(shard.size());
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::iota(order.begin(), order.end(), 0);
            Rng epoch_rng = rng.split(static_cast<std::uint64_t>(epoch));
            epoch_rng.shuffle(order);
            int batch = 0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const std::span<const std::size_t> idx(order.data() + start, end - start);
                const LabeledDataset b = shard.subset(idx);
                LossGradient::Result r;
                try {
                    r = grads_(current, b.X, b.targets());
                } catch (const NumericOverflowError& e) {
                    throw DivergenceError("local training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch) + ": " + e.what(),
                                          batch, epoch);
                }
                if (proximal) add_proximal_gradient(r.grad, current.values(), w.values(), *mu_prox);
                opt.step(current.values(), r.grad);
                if (!current.all_finite()) {
                    throw DivergenceError("local training produced non-finite parameters at epoch " +
                                              std::to_string(epoch) + ", batch " + std::to_string(batch),
                                          batch, epoch);
                }
            }
        }
        return current;
    }

private:
    MlpSpec spec_;
    LossGradient grads_;
};

inline ParamVector local_train(const ParamVector& w, const LabeledDataset& shard, const LocalTrainConfig& cfg, Rng rng) {
    return LocalTrainer(w.spec()).train(w, shard, cfg, rng);
}

inline ParamVector fedprox_local_train(const ParamVector& w, const LabeledDataset& shard, const LocalTrainConfig& cfg,
                                       double mu_prox, Rng rng) {
    return LocalTrainer(w.spec()).train(w, shard, cfg, rng, mu_prox);
}

}  // namespace dynafed
