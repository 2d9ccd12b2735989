#pragma once

#include <algorithm>
#include <vector>

#include "dynafed/model/distance.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/numerics/finite_difference.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/synthesis/meta.hpp"

namespace dynafed {

struct SelftestCase {
    MetricKind metric = MetricKind::L2;
    int s_prime = 0;
    double error_x = 0.0;  // norm-wise relative error of dL/dX
    double error_y = 0.0;  // same for dL/dYlogits
};

/// Meta-gradients of a 4-2-3 network with 3 synthetic points against central
/// differences (h = 1e-5) of the numeric unroll, for every metric and s' in {1, 2, 4}.
inline std::vector<SelftestCase> meta_gradient_selftest(std::uint64_t seed = 0) {
    const MlpSpec spec({4, 2, 3});
    std::vector<SelftestCase> out;
    for (MetricKind metric : {MetricKind::L2, MetricKind::NormalizedL2, MetricKind::Cosine}) {
        for (int s_prime : {1, 2, 4}) {
            const Rng rng = Rng(seed).split("selftest").split(static_cast<std::uint64_t>(s_prime));
            const ParamVector ws = init_params(spec, rng.split("start"));
            const ParamVector wt = init_params(spec, rng.split("target"));
            SyntheticDataset d = init_synthetic(3, 4, 3, rng.split("data"));
            Rng yr = rng.split("logits");
            for (auto& v : d.Ylogits.values()) v = yr.normal();
            SynthConfig cfg;
            cfg.s_prime = s_prime;
            cfg.eta_inner = 0.5;
            cfg.metric = metric;
            const auto r = meta_loss_and_grads(d, ws, wt, cfg);
            if (!r) throw UndefinedMetricError("selftest instance is degenerate");
            const Tensor fx = finite_difference(
                [&](const Tensor& x) { return unroll_distance(x, d.targets(), ws, wt, cfg); }, d.X, 1e-5);
            const Tensor fy = finite_difference(
                [&](const Tensor& y) { return unroll_distance(d.X, kernels::softmax(y), ws, wt, cfg); }, d.Ylogits,
                1e-5);
            out.push_back({metric, s_prime, max_relative_error(r->gX, fx), max_relative_error(r->gY, fy)});
        }
    }
    return out;
}

}  // namespace dynafed
