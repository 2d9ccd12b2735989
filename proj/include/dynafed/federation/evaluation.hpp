#pragma once

#include <vector>

#include "dynafed/federation/dataset.hpp"
#include "dynafed/federation/partition.hpp"
#include "dynafed/model/loss.hpp"
#include "dynafed/model/mlp.hpp"

namespace dynafed {

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Index of the largest entry in row r; ties go to the lowest index.
inline std::size_t argmax_row(const Tensor& t, std::size_t r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < t.cols(); ++k)
        if (t(r, k) > t(r, best)) best = k;
    return best;
}

inline std::vector<double> per_sample_losses(const ParamVector& w, const LabeledDataset& data) {
    return per_sample_cross_entropy(predict_logits(w, data.X), data.targets());
}

/// Mean cross entropy and argmax accuracy of `w` on `data`.
inline EvalResult evaluate(const ParamVector& w, const LabeledDataset& data) {
    const Tensor logits = predict_logits(w, data.X);
    const auto losses = per_sample_cross_entropy(logits, data.targets());
    EvalResult r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        r.loss += losses[i];
        if (argmax_row(logits, i) == static_cast<std::size_t>(data.labels[i])) ++correct;
    }
    r.loss /= static_cast<double>(data.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return r;
}

/// Mean loss of `w` on each client's shard.
inline std::vector<double> per_client_losses(const ParamVector& w, const Partition& partition,
                                             const LabeledDataset& data) {
    const auto losses = per_sample_losses(w, data);
    std::vector<double> out;
    out.reserve(partition.num_clients());
    for (const auto& idx : partition.client_indices) {
        double s = 0.0;
        for (std::size_t i : idx) s += losses[i];
        out.push_back(s / static_cast<double>(idx.size()));
    }
    return out;
}

}  // namespace dynafed
