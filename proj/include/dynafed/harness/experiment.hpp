#pragma once

#include <string>
#include <vector>

#include "dynafed/federation/partition.hpp"
#include "dynafed/harness/blobs.hpp"
#include "dynafed/harness/config.hpp"
#include "dynafed/harness/idx.hpp"
#include "dynafed/model/loss.hpp"
#include "dynafed/orchestration/runner.hpp"
#include "dynafed/synthesis/datasyn.hpp"
#include "dynafed/synthesis/synthetic.hpp"

namespace dynafed {

inline FederatedData load_experiment_data(const ExperimentConfig& cfg) {
    if (cfg.task == TaskKind::Blobs) {
        const Rng rng = Rng(cfg.seed).split("data");
        BlobsConfig test = cfg.blobs;
        test.per_class = cfg.blobs_test_per_class;
        return {generate_blobs(cfg.blobs, rng.split("train")), generate_blobs(test, rng.split("test"))};
    }
    FederatedData data{load_idx(cfg.idx.train_images, cfg.idx.train_labels),
                       load_idx(cfg.idx.test_images, cfg.idx.test_labels)};
    const std::size_t K = std::max(data.train.num_classes, data.test.num_classes);
    data.train.num_classes = data.test.num_classes = K;
    if (data.train.dim() != data.test.dim()) throw ValidationError("IDX train and test images differ in size");
    return data;
}

/// The run config with layer sizes fitted to the data and the experiment seed.
inline RunConfig resolved_run_config(const ExperimentConfig& cfg, const FederatedData& data) {
    RunConfig run = cfg.run;
    run.layers = cfg.layers_for(data.train.dim(), data.train.num_classes);
    run.seed = cfg.seed;
    run.validate();
    return run;
}

inline Partition experiment_partition(const ExperimentConfig& cfg, const LabeledDataset& train) {
    return dirichlet_partition(train.labels, train.num_classes, cfg.run.clients, cfg.alpha,
                               Rng(cfg.seed).split("partition"));
}

/// Same-size reference sets for fidelity tables: a random subset of the real
/// training data with one-hot labels, and Gaussian noise with uniform labels.
inline std::vector<FidelityCandidate> baseline_candidates(const LabeledDataset& train, std::size_t n, Rng rng) {
    std::vector<FidelityCandidate> out;
    const std::size_t take = std::min(n, train.size());
    const auto idx = rng.split("subset").sample_without_replacement(train.size(), take);
    const LabeledDataset sub = train.subset(idx);
    out.push_back({"real_subset", sub.X, sub.targets()});
    out.push_back(as_candidate("noise", init_synthetic(n, train.dim(), train.num_classes, rng.split("noise"))));
    return out;
}

}  // namespace dynafed
