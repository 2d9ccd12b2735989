#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/federation/partition.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/model/trainer.hpp"
#include "dynafed/synthesis/synthetic.hpp"
#include "dynafed/theory/convex_task.hpp"

namespace dynafed {

struct BiasEnvelope {
    double delta = 0.0;
    double epsilon = 0.0;
    double scale = 0.0;  // median gradient norm used to weigh epsilon
    std::string method = "lp-vertex-enumeration";
};

/// Smallest (delta, epsilon) >= 0, in the sense of delta + epsilon / scale, with
/// delta * a_i + epsilon >= r_i for every probe. `a` holds the real-data gradient
/// norms, `r` the residual norms. The optimum of this two-variable LP sits on a
/// vertex: an axis point or the intersection of two tight constraints.
inline BiasEnvelope fit_bias_envelope(std::span<const double> a, std::span<const double> r) {
    if (a.size() != r.size()) throw ValidationError("envelope fit needs one residual per gradient norm");
    if (a.empty()) throw FitError("envelope fit needs at least one probe");
    std::vector<std::pair<double, double>> probes;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] >= 0.0) || !(r[i] >= 0.0)) throw ValidationError("gradient norms must be finite and non-negative");
        probes.emplace_back(a[i], r[i]);
    }
    std::sort(probes.begin(), probes.end());
    if (std::all_of(probes.begin(), probes.end(), [](const auto& p) { return p.first == 0.0; })) {
        throw FitError("all real-data gradients are zero; the bias envelope is undefined");
    }

    std::vector<double> norms;
    for (const auto& p : probes) norms.push_back(p.first);
    std::nth_element(norms.begin(), norms.begin() + static_cast<std::ptrdiff_t>(norms.size() / 2), norms.end());
    double scale = norms[norms.size() / 2];
    if (!(scale > 0.0)) scale = probes.back().first;

    double rmax = 0.0;
    for (const auto& p : probes) rmax = std::max(rmax, p.second);
    const double tol = 1e-12 * std::max(rmax, 1e-300);
    auto feasible = [&](double delta, double eps) {
        if (delta < 0.0 || eps < 0.0 || !std::isfinite(delta) || !std::isfinite(eps)) return false;
        for (const auto& [ai, ri] : probes)
            if (delta * ai + eps < ri - tol) return false;
        return true;
    };

    std::vector<std::pair<double, double>> candidates{{0.0, rmax}};
    bool zero_norm_residual = false;
    double ratio = 0.0;
    for (const auto& [ai, ri] : probes) {
        if (ai > 0.0) {
            ratio = std::max(ratio, ri / ai);
        } else if (ri > 0.0) {
            zero_norm_residual = true;
        }
    }
    if (!zero_norm_residual) candidates.emplace_back(ratio, 0.0);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        for (std::size_t j = i + 1; j < probes.size(); ++j) {
            const auto [ai, ri] = probes[i];
            const auto [aj, rj] = probes[j];
            if (ai == aj) continue;
            const double delta = (rj - ri) / (aj - ai);
            candidates.emplace_back(delta, ri - delta * ai);
        }
    }

    BiasEnvelope best;
    best.scale = scale;
    double best_obj = INFINITY;
    for (const auto& [delta, eps] : candidates) {
        if (!feasible(delta, eps)) continue;
        const double obj = delta + eps / scale;
        if (obj < best_obj) {
            best_obj = obj;
            best.delta = delta;
            best.epsilon = eps;
        }
    }
    // Absorb rounding so the envelope dominates exactly.
    for (const auto& [ai, ri] : probes) best.epsilon = std::max(best.epsilon, ri - best.delta * ai);
    return best;
}

/// Bias envelope for an MLP surrogate: residuals between full-batch gradients
/// on (syn_X, syn_targets) and on the real data, at each probe.
inline BiasEnvelope estimate_bias_constants(const Tensor& syn_X, const Tensor& syn_targets, const LabeledDataset& data,
                                            const MlpSpec& spec, std::span<const ParamVector> probes) {
    if (probes.empty()) throw ValidationError("bias estimation needs probe parameters");
    LossGradient grads(spec);
    const Tensor real_targets = data.targets();
    std::vector<double> a, r;
    for (const auto& w : probes) {
        if (w.spec() != spec) throw ValidationError("probe architecture mismatch");
        const auto g_real = grads(w, data.X, real_targets).grad;
        const auto g_syn = grads(w, syn_X, syn_targets).grad;
        double na = 0.0, nr = 0.0;
        for (std::size_t i = 0; i < g_real.size(); ++i) {
            na += g_real[i] * g_real[i];
            nr += (g_syn[i] - g_real[i]) * (g_syn[i] - g_real[i]);
        }
        a.push_back(std::sqrt(na));
        r.push_back(std::sqrt(nr));
    }
    return fit_bias_envelope(a, r);
}

inline BiasEnvelope estimate_bias_constants(const SyntheticDataset& dsyn, const LabeledDataset& data,
                                            const MlpSpec& spec, std::span<const ParamVector> probes) {
    return estimate_bias_constants(dsyn.X, dsyn.targets(), data, spec, probes);
}

/// Same constants for a convex task's surrogate objective.
inline BiasEnvelope estimate_bias_constants(const ConvexTask& task, std::span<const Eigen::VectorXd> probes) {
    std::vector<double> a, r;
    for (const auto& w : probes) {
        const Eigen::VectorXd g = task.grad(w);
        a.push_back(g.norm());
        r.push_back((task.syn_grad(w) - g).norm());
    }
    return fit_bias_envelope(a, r);
}

/// Probes spread around the optimum at several radii, for envelope fitting.
inline std::vector<Eigen::VectorXd> convex_probes(const ConvexTask& task, std::size_t count, Rng rng) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t k = 0; k < count; ++k) {
        Eigen::VectorXd dir(task.w_star.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
        const double radius = std::pow(10.0, -3.0 + 4.0 * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(count - 1, 1)));
        out.push_back(task.w_star + radius * dir.normalized());
    }
    return out;
}

struct AssumptionEstimates {
    std::vector<double> sigma;  // per client, sqrt of the gradient variance bound
    double G = 0.0;             // sqrt of the bound on the expected squared stochastic gradient norm
    double delta = 0.0;
    double epsilon = 0.0;
};

/// sigma_m and G as the largest values over `probes`, each expectation taken
/// exactly over a uniform draw of one sample from client m's shard.
inline AssumptionEstimates estimate_assumptions(const LabeledDataset& data, const Partition& partition,
                                                const MlpSpec& spec, std::span<const ParamVector> probes) {
    if (probes.empty()) throw ValidationError("assumption estimation needs probe parameters");
    LossGradient grads(spec);
    AssumptionEstimates est;
    est.sigma.assign(partition.num_clients(), 0.0);
    double g2 = 0.0;
    for (const auto& w : probes) {
        for (std::size_t m = 0; m < partition.num_clients(); ++m) {
            const LabeledDataset shard = data.subset(partition.client_indices[m]);
            const auto full = grads(w, shard.X, shard.targets()).grad;
            double var = 0.0, sq = 0.0;
            for (std::size_t i = 0; i < shard.size(); ++i) {
                const std::size_t one[] = {i};
                const LabeledDataset s = shard.subset(one);
                const auto g = grads(w, s.X, s.targets()).grad;
                for (std::size_t k = 0; k < g.size(); ++k) {
                    var += (g[k] - full[k]) * (g[k] - full[k]);
                    sq += g[k] * g[k];
                }
            }
            var /= static_cast<double>(shard.size());
            sq /= static_cast<double>(shard.size());
            est.sigma[m] = std::max(est.sigma[m], std::sqrt(var));
            g2 = std::max(g2, sq);
        }
    }
    est.G = std::sqrt(g2);
    return est;
}

/// Monte-Carlo version for a convex task with `draws` stochastic gradients per probe and client.
inline AssumptionEstimates estimate_assumptions(const ConvexTask& task, std::span<const Eigen::VectorXd> probes,
                                                int draws, Rng rng) {
    if (draws < 2) throw ValidationError("need at least two draws per probe");
    AssumptionEstimates est;
    est.sigma.assign(task.num_clients(), 0.0);
    double g2 = 0.0;
    for (const auto& w : probes) {
        for (std::size_t m = 0; m < task.num_clients(); ++m) {
            const Eigen::VectorXd full = task.client_grad(m, w);
            double var = 0.0, sq = 0.0;
            for (int k = 0; k < draws; ++k) {
                const Eigen::VectorXd g = task.stochastic_client_grad(m, w, rng);
                var += (g - full).squaredNorm();
                sq += g.squaredNorm();
            }
            est.sigma[m] = std::max(est.sigma[m], std::sqrt(var / draws));
            g2 = std::max(g2, sq / draws);
        }
    }
    est.G = std::sqrt(g2);
    const BiasEnvelope env = estimate_bias_constants(task, probes);
    est.delta = env.delta;
    est.epsilon = env.epsilon;
    return est;
}

}  // namespace dynafed
