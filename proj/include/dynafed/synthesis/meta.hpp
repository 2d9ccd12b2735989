#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/distance.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/model/trainer.hpp"
#include "dynafed/numerics/expression.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/synthesis/config.hpp"
#include "dynafed/synthesis/synthetic.hpp"
#include "dynafed/synthesis/trajectory.hpp"

namespace dynafed {

struct Segment {
    std::size_t t = 0;
    std::vector<std::size_t> averaged;  // intermediate indices in draw order
    ParamVector w_start;
    ParamVector w_target;
};

/// Draws t uniformly from {0, ..., L - s} using `t_rng`, then target_avg_count
/// distinct intermediate checkpoints from (t, t + s) using `avg_rng`. The target
/// is the mean of w^{t+s} and the drawn checkpoints.
inline Segment sample_segment(const Trajectory& traj, const SynthConfig& cfg, Rng& t_rng, Rng& avg_rng) {
    const std::size_t L = traj.last_index();
    cfg.validate(L);
    const auto s = static_cast<std::size_t>(cfg.s);
    Segment seg;
    seg.t = static_cast<std::size_t>(t_rng.below(L - s + 1));
    seg.w_start = traj[seg.t];
    seg.w_target = traj[seg.t + s];
    if (cfg.target_avg_count == 0) return seg;

    for (std::size_t j : avg_rng.sample_without_replacement(s - 1, static_cast<std::size_t>(cfg.target_avg_count)))
        seg.averaged.push_back(seg.t + 1 + j);
    const double inv = 1.0 / static_cast<double>(seg.averaged.size() + 1);
    auto out = seg.w_target.values();
    for (std::size_t i : seg.averaged) {
        const auto v = traj[i].values();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
    }
    for (double& v : out) v *= inv;
    return seg;
}

inline Segment sample_segment(const Trajectory& traj, const SynthConfig& cfg, Rng& rng) {
    return sample_segment(traj, cfg, rng, rng);
}

struct MetaResult {
    double loss = 0.0;
    Tensor gX;
    Tensor gY;
};

/// Matching loss d(w~, w_target), where w~ is s' steps of full-batch SGD from
/// w_start on (X, softmax(Ylogits)), with exact gradients with respect to X and
/// Ylogits through the whole unroll. The graph is built once per (spec, n).
class MetaObjective {
public:
    MetaObjective(MlpSpec spec, std::size_t n, const SynthConfig& cfg) : spec_(std::move(spec)), n_(n), cfg_(cfg) {
        cfg_.validate();
        spec_.validate();
        const Expr X = expr::input("X", Shape{n_, spec_.input_dim()});
        const Expr Y = expr::input("Y", Shape{n_, spec_.num_classes()});
        const auto ws = param_inputs(spec_, "ws");
        const auto wt = param_inputs(spec_, "wt");
        const auto unrolled = sgd_unroll_expr(ws, X, expr::softmax(Y), cfg_.eta_inner, cfg_.s_prime);
        std::optional<Expr> inv;
        if (cfg_.metric == MetricKind::NormalizedL2) inv = expr::input("inv_norm", Shape{1, 1});
        const Expr loss = distance_expr(unrolled, wt, cfg_.metric, inv);
        const std::vector<Expr> wrt{X, Y};
        auto g = grad(loss, wrt);
        const std::vector<Expr> outputs{loss, g[0], g[1]};
        program_ = std::make_unique<Program>(outputs);
    }

    const SynthConfig& config() const noexcept { return cfg_; }

    /// Empty when the segment is degenerate for the metric (w_start == w_target
    /// under normalized_l2).
    std::optional<MetaResult> operator()(const SyntheticDataset& dsyn, const ParamVector& w_start,
                                         const ParamVector& w_target) const {
        require_same_spec(w_start, w_target);
        if (w_start.spec() != spec_) throw ValidationError("meta objective architecture mismatch");
        if (dsyn.X.shape() != Shape{n_, spec_.input_dim()} || dsyn.Ylogits.shape() != Shape{n_, spec_.num_classes()}) {
            throw ShapeError("synthetic dataset shape does not match the meta objective");
        }
        Bindings b;
        b.insert_or_assign("X", dsyn.X);
        b.insert_or_assign("Y", dsyn.Ylogits);
        bind_params(b, "ws", w_start);
        bind_params(b, "wt", w_target);
        if (cfg_.metric == MetricKind::NormalizedL2) {
            const double norm = DistanceMetric::squared_distance(w_start, w_target);
            if (!(norm > 0.0)) return std::nullopt;
            b.insert_or_assign("inv_norm", Tensor::scalar(1.0 / norm));
        }
        std::vector<Tensor> out;
        try {
            out = program_->run(b);
        } catch (const NumericOverflowError& e) {
            if (e.step() > 0) {
                throw DivergenceError("inner unroll diverged at step " + std::to_string(e.step()) + ": " + e.what(),
                                      e.step());
            }
            throw DivergenceError(std::string("meta objective is not finite: ") + e.what(), e.step());
        }
        return MetaResult{out[0].item(), std::move(out[1]), std::move(out[2])};
    }

private:
    MlpSpec spec_;
    std::size_t n_;
    SynthConfig cfg_;
    std::unique_ptr<Program> program_;
};

inline std::optional<MetaResult> meta_loss_and_grads(const SyntheticDataset& dsyn, const ParamVector& w_start,
                                                     const ParamVector& w_target, const SynthConfig& cfg) {
    return MetaObjective(w_start.spec(), dsyn.size(), cfg)(dsyn, w_start, w_target);
}

/// Distance after s' numeric SGD steps on (X, targets); no gradients.
inline double unroll_distance(const Tensor& X, const Tensor& targets, const ParamVector& w_start,
                              const ParamVector& w_target, const SynthConfig& cfg) {
    const ParamVector w = sgd_unroll(w_start, X, targets, cfg.eta_inner, cfg.s_prime);
    return distance(w, w_target, DistanceMetric::of(cfg.metric, w_start, w_target));
}

}  // namespace dynafed
