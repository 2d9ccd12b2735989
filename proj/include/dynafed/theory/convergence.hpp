#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/numerics/rng.hpp"
#include "dynafed/theory/bias.hpp"
#include "dynafed/theory/convex_task.hpp"

namespace dynafed {

/// eta_t = c / (t + gamma) with t counted from 1; tau1 local steps then tau2
/// finetune steps per round.
struct ScheduleConfig {
    double c = 4.0;
    double gamma = 200.0;
    int tau1 = 5;
    int tau2 = 2;

    double eta(long t) const { return c / (static_cast<double>(t) + gamma); }

    void validate() const {
        if (!(c > 0.0)) throw ConfigError("schedule c must be positive");
        if (!(gamma >= 0.0)) throw ConfigError("schedule gamma must be non-negative");
        if (tau1 < 1) throw ConfigError("tau1 must be at least 1");
        if (tau2 < 0) throw ConfigError("tau2 must be non-negative");
    }
};

/// mu~ = 0.9 (mu - delta * L); meaningful only when delta * L < mu.
inline double effective_mu(double mu, double delta, double L_smooth) { return 0.9 * (mu - delta * L_smooth); }

struct ConvergenceOptions {
    long T = 10000;
    int seeds = 5;
    std::uint64_t base_seed = 0;
    bool stochastic = true;
    std::optional<double> delta;  // measured on the task when absent
};

struct ConvergenceResult {
    std::vector<double> mean;  // E[L(w_bar_t) - L(w*)] for t = 1..T
    std::vector<double> stddev;
    double delta = 0.0;
    double epsilon = 0.0;
    double mu_tilde = 0.0;
    bool hypothesis_holds = true;  // delta * L_smooth < mu
    bool schedule_checked = true;  // c * mu~ > 1 verified
};

/// Simulates the analysed process: steps with (t mod (tau1 + tau2)) < tau1 are
/// stochastic local steps on every client; the averaged model is formed after
/// the last local step of a round; the remaining tau2 steps move the shared
/// model with stochastic surrogate gradients. Suboptimality of the weighted
/// client average is recorded after every step and averaged over seeds.
inline ConvergenceResult run_convex_convergence(const ConvexTask& task, const ScheduleConfig& schedule,
                                                const ConvergenceOptions& opts) {
    schedule.validate();
    if (opts.T < 1) throw ConfigError("T must be at least 1");
    if (opts.seeds < 1) throw ConfigError("need at least one seed");

    ConvergenceResult res;
    if (opts.delta) {
        res.delta = *opts.delta;
    } else {
        const auto probes = convex_probes(task, 32, Rng(opts.base_seed).split("probes"));
        const BiasEnvelope env = estimate_bias_constants(task, probes);
        res.delta = env.delta;
        res.epsilon = env.epsilon;
    }
    res.hypothesis_holds = schedule.tau2 == 0 || res.delta * task.L_smooth < task.mu;
    res.mu_tilde = schedule.tau2 == 0 ? 0.9 * task.mu : effective_mu(task.mu, res.delta, task.L_smooth);
    res.schedule_checked = res.hypothesis_holds;
    if (res.hypothesis_holds && !(schedule.c * res.mu_tilde > 1.0)) {
        throw ConfigError("schedule violates c * mu~ > 1 (c = " + std::to_string(schedule.c) +
                          ", mu~ = " + std::to_string(res.mu_tilde) + ")");
    }

    const auto T = static_cast<std::size_t>(opts.T);
    const std::size_t M = task.num_clients();
    const long period = schedule.tau1 + schedule.tau2;
    std::vector<double> sum(T, 0.0), sumsq(T, 0.0);
    for (int seed = 0; seed < opts.seeds; ++seed) {
        Rng rng = Rng(opts.base_seed).split("run").split(static_cast<std::uint64_t>(seed));
        std::vector<Eigen::VectorXd> w(M, Eigen::VectorXd::Zero(task.w_star.size()));
        Eigen::VectorXd shared = Eigen::VectorXd::Zero(task.w_star.size());
        for (long t = 0; t < opts.T; ++t) {
            const double eta = schedule.eta(t + 1);
            const long phase = t % period;
            if (phase < schedule.tau1) {
                for (std::size_t m = 0; m < M; ++m) {
                    const Eigen::VectorXd g =
                        opts.stochastic ? task.stochastic_client_grad(m, w[m], rng) : task.client_grad(m, w[m]);
                    w[m] -= eta * g;
                }
                if (phase == schedule.tau1 - 1) {
                    shared.setZero();
                    for (std::size_t m = 0; m < M; ++m) shared += task.weights[m] * w[m];
                    for (auto& wm : w) wm = shared;
                }
            } else {
                const Eigen::VectorXd g = opts.stochastic ? task.stochastic_syn_grad(shared, rng) : task.syn_grad(shared);
                shared -= eta * g;
                for (auto& wm : w) wm = shared;
            }
            Eigen::VectorXd avg = Eigen::VectorXd::Zero(task.w_star.size());
            for (std::size_t m = 0; m < M; ++m) avg += task.weights[m] * w[m];
            const double sub = task.suboptimality(avg);
            if (!std::isfinite(sub)) {
                throw DivergenceError("convex process diverged at step " + std::to_string(t + 1),
                                      static_cast<int>(t + 1));
            }
            sum[static_cast<std::size_t>(t)] += sub;
            sumsq[static_cast<std::size_t>(t)] += sub * sub;
        }
    }
    res.mean.resize(T);
    res.stddev.resize(T);
    const double k = static_cast<double>(opts.seeds);
    for (std::size_t t = 0; t < T; ++t) {
        res.mean[t] = sum[t] / k;
        res.stddev[t] = opts.seeds > 1 ? std::sqrt(std::max(0.0, (sumsq[t] - k * res.mean[t] * res.mean[t]) / (k - 1.0))) : 0.0;
    }
    return res;
}

/// OLS slope of log(series[i]) against log(i + 1) over the last `window` fraction.
inline double fit_loglog_slope(std::span<const double> series, double window = 0.5) {
    if (!(window > 0.0 && window <= 1.0)) throw ValidationError("slope window must be in (0, 1]");
    const std::size_t n = series.size();
    const auto count = static_cast<std::size_t>(std::ceil(window * static_cast<double>(n)));
    if (count < 2) throw FitError("need at least two points in the tail window");
    const std::size_t start = n - count;
    double sx = 0.0, sy = 0.0;
    std::vector<double> xs, ys;
    for (std::size_t i = start; i < n; ++i) {
        if (!(series[i] > 0.0)) {
            throw FitError("series value " + std::to_string(series[i]) + " at index " + std::to_string(i) +
                           " is not positive");
        }
        xs.push_back(std::log(static_cast<double>(i + 1)));
        ys.push_back(std::log(series[i]));
        sx += xs.back();
        sy += ys.back();
    }
    const double mx = sx / static_cast<double>(count), my = sy / static_cast<double>(count);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace dynafed
