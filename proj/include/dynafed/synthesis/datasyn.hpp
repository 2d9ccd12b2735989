#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/optim.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/synthesis/config.hpp"
#include "dynafed/synthesis/meta.hpp"
#include "dynafed/synthesis/synthetic.hpp"
#include "dynafed/synthesis/trajectory.hpp"

namespace dynafed {

struct SynthLogEntry {
    int iteration = 0;
    std::size_t segment_t = 0;
    double loss = 0.0;
};

struct DataSynResult {
    SyntheticDataset dataset;
    std::vector<SynthLogEntry> log;
    int skipped = 0;
    std::vector<std::string> warnings;
};

/// Learns a synthetic dataset whose s'-step training matches segments of `traj`.
///
/// Each outer iteration samples a segment, evaluates the matching loss and its
/// gradients, and takes one Adam step on (X, Ylogits). Degenerate segments are
/// redrawn; if skips outnumber the N accepted segments the trajectory is
/// rejected. Only the trajectory and config are read.
inline DataSynResult datasyn(const Trajectory& traj, const SynthConfig& cfg, Rng rng) {
    traj.validate();
    cfg.validate(traj.last_index());
    const MlpSpec& spec = traj.spec();
    const std::size_t d = spec.input_dim();
    const std::size_t K = spec.num_classes();

    DataSynResult res;
    if (cfg.n < K) {
        res.warnings.push_back("synthetic size n = " + std::to_string(cfg.n) + " is below the class count " +
                               std::to_string(K));
    }
    res.dataset = init_synthetic(cfg.n, d, K, rng.split("init"));
    Rng t_rng = rng.split("segment");
    Rng avg_rng = rng.split("average");

    const MetaObjective objective(spec, cfg.n, cfg);
    const std::size_t nx = res.dataset.X.size();
    const std::size_t ny = res.dataset.Ylogits.size();
    Optimizer opt(OptimizerConfig{OptimizerKind::Adam, cfg.eta_outer}, nx + ny);
    std::vector<double> params(nx + ny);
    std::vector<double> grads(nx + ny);
    std::copy(res.dataset.X.values().begin(), res.dataset.X.values().end(), params.begin());
    std::copy(res.dataset.Ylogits.values().begin(), res.dataset.Ylogits.values().end(), params.begin() + nx);

    for (int it = 0; it < cfg.N; ++it) {
        std::optional<MetaResult> r;
        Segment seg;
        for (;;) {
            seg = sample_segment(traj, cfg, t_rng, avg_rng);
            r = objective(res.dataset, seg.w_start, seg.w_target);
            if (r) break;
            if (++res.skipped > cfg.N) {
                throw DegenerateTrajectoryError("more than half of the sampled segments were degenerate (" +
                                                std::to_string(res.skipped) + " skipped)");
            }
        }
        res.log.push_back({it, seg.t, r->loss});
        std::copy(r->gX.values().begin(), r->gX.values().end(), grads.begin());
        std::copy(r->gY.values().begin(), r->gY.values().end(), grads.begin() + nx);
        opt.step(params, grads);
        std::copy(params.begin(), params.begin() + nx, res.dataset.X.values().begin());
        std::copy(params.begin() + nx, params.end(), res.dataset.Ylogits.values().begin());
        if (!res.dataset.X.all_finite() || !res.dataset.Ylogits.all_finite()) {
            throw DivergenceError("synthetic data became non-finite at outer iteration " + std::to_string(it), it);
        }
    }
    return res;
}

/// A dataset scored by trajectory_fidelity; targets are probability rows.
struct FidelityCandidate {
    std::string name;
    Tensor X;
    Tensor targets;
};

struct FidelityRow {
    std::string name;
    double mean = 0.0;
    std::vector<std::size_t> segments;  // t of each scored segment
    std::vector<double> distances;
};

/// For every t in {0, ..., L - s}, unrolls s' steps from w^t on each candidate
/// and records d(w~, w^{t+s}). Segments that are degenerate for the metric are left out.
inline std::vector<FidelityRow> trajectory_fidelity(const Trajectory& traj, const SynthConfig& cfg,
                                                    const std::vector<FidelityCandidate>& candidates) {
    traj.validate();
    cfg.validate(traj.last_index());
    const MlpSpec& spec = traj.spec();
    for (const auto& c : candidates) {
        if (c.X.cols() != spec.input_dim() || c.targets.cols() != spec.num_classes()) {
            throw ShapeError("fidelity candidate '" + c.name + "' does not match the network");
        }
    }
    const auto s = static_cast<std::size_t>(cfg.s);
    std::vector<FidelityRow> rows;
    for (const auto& c : candidates) {
        FidelityRow row{c.name, 0.0, {}, {}};
        for (std::size_t t = 0; t + s <= traj.last_index(); ++t) {
            const ParamVector& ws = traj[t];
            const ParamVector& wt = traj[t + s];
            if (cfg.metric == MetricKind::NormalizedL2 && !(DistanceMetric::squared_distance(ws, wt) > 0.0)) continue;
            row.segments.push_back(t);
            row.distances.push_back(unroll_distance(c.X, c.targets, ws, wt, cfg));
        }
        if (row.distances.empty()) throw DegenerateTrajectoryError("no scorable segment in the trajectory");
        for (double v : row.distances) row.mean += v;
        row.mean /= static_cast<double>(row.distances.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline FidelityCandidate as_candidate(std::string name, const SyntheticDataset& d) {
    return {std::move(name), d.X, d.targets()};
}

}  // namespace dynafed
