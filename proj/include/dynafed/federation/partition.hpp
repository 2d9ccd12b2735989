#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/numerics/rng.hpp"

namespace dynafed {

/// Disjoint client shards over one dataset, with weights alpha_m = |D_m| / |D|.
struct Partition {
    std::vector<std::vector<std::size_t>> client_indices;
    std::vector<double> weights;

    std::size_t num_clients() const noexcept { return client_indices.size(); }

    /// Throws unless the shards are nonempty, disjoint and cover [0, n), and the weights match.
    void validate(std::size_t n) const {
        if (client_indices.empty()) throw ValidationError("partition has no clients");
        if (weights.size() != client_indices.size()) throw ValidationError("partition weight count mismatch");
        std::vector<char> seen(n, 0);
        std::size_t total = 0;
        double wsum = 0.0;
        for (std::size_t m = 0; m < client_indices.size(); ++m) {
            const auto& idx = client_indices[m];
            if (idx.empty()) throw ValidationError("client " + std::to_string(m) + " is empty");
            for (std::size_t i : idx) {
                if (i >= n) throw ValidationError("partition index out of range");
                if (seen[i]) throw ValidationError("sample " + std::to_string(i) + " assigned twice");
                seen[i] = 1;
            }
            total += idx.size();
            const double expected = static_cast<double>(idx.size()) / static_cast<double>(n);
            if (std::abs(weights[m] - expected) > 1e-12) throw ValidationError("client weight does not match size");
            wsum += weights[m];
        }
        if (total != n) throw ValidationError("partition does not cover the dataset");
        if (std::abs(wsum - 1.0) > 1e-12) throw ValidationError("client weights do not sum to 1");
    }
};

inline Partition make_partition(std::vector<std::vector<std::size_t>> shards, std::size_t n) {
    Partition p;
    p.client_indices = std::move(shards);
    for (auto& s : p.client_indices) std::sort(s.begin(), s.end());
    for (const auto& s : p.client_indices) p.weights.push_back(static_cast<double>(s.size()) / static_cast<double>(n));
    return p;
}

/// Splits `count` items by proportions `p` with largest-remainder rounding;
/// ties in the remainder go to the lower client index.
inline std::vector<std::size_t> largest_remainder(std::size_t count, std::span<const double> p) {
    std::vector<std::size_t> out(p.size());
    std::vector<double> frac(p.size());
    std::size_t assigned = 0;
    for (std::size_t m = 0; m < p.size(); ++m) {
        const double q = static_cast<double>(count) * p[m];
        out[m] = static_cast<std::size_t>(std::floor(q));
        frac[m] = q - std::floor(q);
        assigned += out[m];
    }
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; assigned < count; ++r, ++assigned) ++out[order[r % order.size()]];
    return out;
}

/// Per-class Dirichlet(alpha) allocation of samples to `clients` shards.
///
/// For every class a proportion vector is drawn and the (shuffled) samples of
/// that class are dealt out in contiguous chunks. Clients left empty take one
/// sample from the currently largest client.
inline Partition dirichlet_partition(std::span<const int> labels, std::size_t num_classes, std::size_t clients,
                                     double alpha, Rng rng) {
    const std::size_t n = labels.size();
    if (clients == 0) throw ValidationError("need at least one client");
    if (!(alpha > 0.0)) throw ValidationError("Dirichlet alpha must be positive");
    if (clients > n) {
        throw InfeasiblePartitionError("cannot split " + std::to_string(n) + " samples over " +
                                       std::to_string(clients) + " nonempty clients");
    }
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw ValidationError("label out of range in partition input");
        }
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (by_class[k].empty()) throw ValidationError("class " + std::to_string(k) + " has no samples");
    }

    std::vector<std::vector<std::size_t>> shards(clients);
    Rng shuffle_rng = rng.split("shuffle");
    Rng prop_rng = rng.split("proportions");
    for (std::size_t k = 0; k < num_classes; ++k) {
        auto& idx = by_class[k];
        shuffle_rng.shuffle(idx);
        const auto p = clients == 1 ? std::vector<double>{1.0} : prop_rng.dirichlet(clients, alpha);
        const auto counts = largest_remainder(idx.size(), p);
        std::size_t offset = 0;
        for (std::size_t m = 0; m < clients; ++m) {
            shards[m].insert(shards[m].end(), idx.begin() + static_cast<std::ptrdiff_t>(offset),
                             idx.begin() + static_cast<std::ptrdiff_t>(offset + counts[m]));
            offset += counts[m];
        }
    }

    for (std::size_t m = 0; m < clients; ++m) {
        if (!shards[m].empty()) continue;
        std::size_t largest = 0;
        for (std::size_t j = 1; j < clients; ++j)
            if (shards[j].size() > shards[largest].size()) largest = j;
        shards[m].push_back(shards[largest].back());
        shards[largest].pop_back();
    }
    Partition part = make_partition(std::move(shards), n);
    part.validate(n);
    return part;
}

/// Clients taking part in one communication round.
struct RoundPlan {
    int round = 0;
    std::vector<std::size_t> active;  // ascending
    double participation = 0.0;       // P^c = sum of active client weights
};

/// Uniform sampling of round(ratio * M) clients (at least one) without replacement.
inline RoundPlan sample_clients(const Partition& partition, double ratio, int round, Rng& rng) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("participation ratio must be in (0, 1]");
    const std::size_t M = partition.num_clients();
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(M))));
    RoundPlan plan;
    plan.round = round;
    plan.active = rng.sample_without_replacement(M, std::min(k, M));
    std::sort(plan.active.begin(), plan.active.end());
    for (std::size_t m : plan.active) plan.participation += partition.weights[m];
    return plan;
}

}  // namespace dynafed
