#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/aggregate.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/federation/evaluation.hpp"
#include "dynafed/federation/local_train.hpp"
#include "dynafed/federation/partition.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/model/optim.hpp"
#include "dynafed/model/trainer.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/synthesis/config.hpp"
#include "dynafed/synthesis/datasyn.hpp"
#include "dynafed/synthesis/synthetic.hpp"
#include "dynafed/synthesis/trajectory.hpp"

namespace dynafed {

struct FinetuneConfig {
    int steps = 100;
    double lr = 1e-2;
    OptimizerKind optimizer = OptimizerKind::Sgd;

    void validate() const {
        if (steps < 0) throw ConfigError("finetune steps must be non-negative");
        if (!(lr > 0.0)) throw ConfigError("finetune lr must be positive");
    }
};

enum class Algorithm { FedAvg, FedProx, DynaFed };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::FedProx: return "fedprox";
        case Algorithm::DynaFed: return "dynafed";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "fedavg") return Algorithm::FedAvg;
    if (s == "fedprox") return Algorithm::FedProx;
    if (s == "dynafed") return Algorithm::DynaFed;
    throw ConfigError("unknown algorithm '" + s + "' (expected fedavg, fedprox or dynafed)");
}

struct RunConfig {
    std::vector<std::size_t> layers{784, 100, 10};  // MLP layer sizes, input to output
    int rounds = 200;                               // C
    std::size_t clients = 80;                       // M
    double participation = 0.4;
    LocalTrainConfig local{};
    int trajectory_rounds = 20;  // L
    SynthConfig synth{};
    FinetuneConfig finetune{};
    AggregationMode aggregation = AggregationMode::Weighted;
    double mu_prox = 0.0;
    std::uint64_t seed = 0;
    bool track_client_losses = false;
    bool keep_trajectory = true;

    void validate() const {
        MlpSpec(layers).validate();
        if (rounds < 1) throw ConfigError("rounds must be at least 1");
        if (clients < 1) throw ConfigError("clients must be at least 1");
        if (!(participation > 0.0 && participation <= 1.0)) throw ConfigError("participation ratio must be in (0, 1]");
        local.validate();
        if (trajectory_rounds < 1) throw ConfigError("trajectory length L must be at least 1");
        if (trajectory_rounds >= rounds) throw ConfigError("trajectory length L must be below the round count C");
        synth.validate(static_cast<std::size_t>(trajectory_rounds));
        finetune.validate();
        if (mu_prox < 0.0) throw ConfigError("mu_prox must be non-negative");
    }
};

struct RoundMetrics {
    int round = 0;
    std::string phase;  // train, collect, synth, finetune
    double test_loss = 0.0;
    double test_acc = 0.0;
    std::optional<double> pre_ft_acc;
    std::optional<double> post_ft_acc;
    std::optional<double> pre_ft_loss;
    std::vector<double> client_losses;         // after finetuning, when tracked
    std::vector<double> pre_ft_client_losses;  // finetune rounds only, when tracked
    double wall_ms = 0.0;
};

struct FederatedData {
    LabeledDataset train;
    LabeledDataset test;
};

struct RunObserver {
    std::function<void(const RoundMetrics&)> on_round;
    std::function<void(const DataSynResult&)> on_synthesis;
};

struct RunResult {
    Algorithm algorithm = Algorithm::FedAvg;
    std::vector<RoundMetrics> metrics;
    Trajectory trajectory;  // w^0 and every aggregated model, when kept
    Trajectory prefix;      // w^0..w^L handed to synthesis (DynaFed only)
    std::optional<DataSynResult> synthesis;
    ParamVector final_model;
};

/// Full-batch training on (X, softmax(Ylogits)) from w.
inline ParamVector finetune(const ParamVector& w, const SyntheticDataset& dsyn, const FinetuneConfig& ft) {
    ft.validate();
    dsyn.validate();
    if (ft.steps == 0) return w;
    const Tensor targets = dsyn.targets();
    if (ft.optimizer == OptimizerKind::Sgd) return sgd_unroll(w, dsyn.X, targets, ft.lr, ft.steps);

    LossGradient grads(w.spec());
    Optimizer opt(OptimizerConfig{OptimizerKind::Adam, ft.lr}, w.size());
    ParamVector current = w;
    for (int k = 1; k <= ft.steps; ++k) {
        LossGradient::Result r;
        try {
            r = grads(current, dsyn.X, targets);
        } catch (const NumericOverflowError& e) {
            throw DivergenceError("finetune diverged at step " + std::to_string(k) + ": " + e.what(), k);
        }
        opt.step(current.values(), r.grad);
        if (!current.all_finite()) throw DivergenceError("finetune diverged at step " + std::to_string(k), k);
    }
    return current;
}

/// Stream used by client m's local training in round c.
inline Rng client_rng(std::uint64_t seed, int round, std::size_t client) {
    return Rng(seed).split("local").split(static_cast<std::uint64_t>(round)).split(static_cast<std::uint64_t>(client));
}

inline ParamVector initial_model(const RunConfig& cfg) { return init_params(MlpSpec(cfg.layers), Rng(cfg.seed).split("init")); }

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

/// Shared round loop. FedAvg, FedProx and the first L rounds of DynaFed take
/// exactly the same path; synthesis and finetuning use their own rng streams.
inline RunResult run(Algorithm algo, const RunConfig& cfg, const FederatedData& data, const Partition& partition,
                     const RunObserver& observer) {
    cfg.validate();
    data.train.validate();
    data.test.validate();
    partition.validate(data.train.size());
    if (partition.num_clients() != cfg.clients) {
        throw ConfigError("partition has " + std::to_string(partition.num_clients()) + " clients, config expects " +
                          std::to_string(cfg.clients));
    }
    const MlpSpec spec(cfg.layers);
    if (spec.input_dim() != data.train.dim() || spec.num_classes() != data.train.num_classes) {
        throw ConfigError("network " + spec.str() + " does not fit the data (d = " + std::to_string(data.train.dim()) +
                          ", K = " + std::to_string(data.train.num_classes) + ")");
    }

    std::vector<LabeledDataset> shards;
    shards.reserve(partition.num_clients());
    for (const auto& idx : partition.client_indices) shards.push_back(data.train.subset(idx));

    RunResult res;
    res.algorithm = algo;
    Rng sampling = Rng(cfg.seed).split("sampling");
    const std::optional<double> mu =
        algo == Algorithm::FedProx ? std::optional<double>(cfg.mu_prox) : std::nullopt;
    LocalTrainer trainer(spec);
    ParamVector w = initial_model(cfg);
    if (algo == Algorithm::DynaFed) res.prefix.push_back(0, w);
    if (cfg.keep_trajectory) res.trajectory.push_back(0, w);
    const int L = cfg.trajectory_rounds;

    for (int c = 1; c <= cfg.rounds; ++c) {
        const auto start = std::chrono::steady_clock::now();
        const RoundPlan plan = sample_clients(partition, cfg.participation, c, sampling);
        std::vector<ParamVector> local;
        std::vector<double> weights;
        local.reserve(plan.active.size());
        for (std::size_t m : plan.active) {
            local.push_back(trainer.train(w, shards[m], cfg.local, client_rng(cfg.seed, c, m), mu));
            weights.push_back(partition.weights[m]);
        }
        w = aggregate(local, weights, cfg.aggregation);

        RoundMetrics rm;
        rm.round = c;
        rm.phase = "train";
        if (algo == Algorithm::DynaFed) {
            if (c < L) {
                rm.phase = "collect";
                res.prefix.push_back(c, w);
            } else if (c == L) {
                rm.phase = "synth";
                res.prefix.push_back(c, w);
                res.synthesis = datasyn(res.prefix, cfg.synth, Rng(cfg.seed).split("synthesis"));
                if (observer.on_synthesis) observer.on_synthesis(*res.synthesis);
            } else {
                rm.phase = "finetune";
                const EvalResult pre = evaluate(w, data.test);
                rm.pre_ft_acc = pre.accuracy;
                rm.pre_ft_loss = pre.loss;
                if (cfg.track_client_losses) rm.pre_ft_client_losses = per_client_losses(w, partition, data.train);
                w = finetune(w, res.synthesis->dataset, cfg.finetune);
            }
        }
        const EvalResult ev = evaluate(w, data.test);
        rm.test_loss = ev.loss;
        rm.test_acc = ev.accuracy;
        if (rm.pre_ft_acc) rm.post_ft_acc = ev.accuracy;
        if (cfg.track_client_losses) rm.client_losses = per_client_losses(w, partition, data.train);
        if (cfg.keep_trajectory) res.trajectory.push_back(c, w);
        rm.wall_ms = elapsed_ms(start);
        if (observer.on_round) observer.on_round(rm);
        res.metrics.push_back(std::move(rm));
    }
    res.final_model = std::move(w);
    return res;
}

}  // namespace detail

inline RunResult run_fedavg(const RunConfig& cfg, const FederatedData& data, const Partition& partition,
                            const RunObserver& observer = {}) {
    return detail::run(Algorithm::FedAvg, cfg, data, partition, observer);
}

inline RunResult run_fedprox(const RunConfig& cfg, const FederatedData& data, const Partition& partition,
                             double mu_prox, const RunObserver& observer = {}) {
    RunConfig c = cfg;
    c.mu_prox = mu_prox;
    return detail::run(Algorithm::FedProx, c, data, partition, observer);
}

inline RunResult run_dynafed(const RunConfig& cfg, const FederatedData& data, const Partition& partition,
                             const RunObserver& observer = {}) {
    return detail::run(Algorithm::DynaFed, cfg, data, partition, observer);
}

inline RunResult run_algorithm(Algorithm algo, const RunConfig& cfg, const FederatedData& data,
                               const Partition& partition, const RunObserver& observer = {}) {
    if (algo == Algorithm::FedProx) return run_fedprox(cfg, data, partition, cfg.mu_prox, observer);
    return detail::run(algo, cfg, data, partition, observer);
}

}  // namespace dynafed
