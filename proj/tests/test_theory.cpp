#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynafed/harness/blobs.hpp"
#include "dynafed/model/trainer.hpp"
#include "dynafed/theory/bias.hpp"
#include "dynafed/theory/convergence.hpp"
#include "dynafed/theory/convex_task.hpp"

using namespace dynafed;

namespace {

QuadraticTaskConfig small_quadratic(std::size_t clients = 4) {
    QuadraticTaskConfig cfg;
    cfg.dim = 8;
    cfg.clients = clients;
    cfg.condition = 10.0;
    return cfg;
}

}  // namespace

TEST(QuadraticTask, ClosedFormMinimizer) {
    const ConvexTask task = make_quadratic_task(QuadraticTaskConfig{}, Rng(1));
    EXPECT_LT(task.grad(task.w_star).norm(), 1e-10);
    EXPECT_NEAR(task.mu, 1.0, 1e-9);
    EXPECT_NEAR(task.L_smooth, 50.0, 1e-9);
    EXPECT_EQ(task.dim(), 20u);
}

TEST(QuadraticTask, SurrogateSharesMinimizer) {
    const ConvexTask task = make_quadratic_task(small_quadratic(), Rng(2));
    EXPECT_LT(task.syn_grad(task.w_star).norm(), 1e-10);
    EXPECT_THROW(make_quadratic_task(QuadraticTaskConfig{.bias_norm = 2.0}, Rng(1)), ConfigError);
}

TEST(LogisticTask, NewtonMinimizer) {
    const ConvexTask task = make_logistic_task(LogisticTaskConfig{}, Rng(3));
    EXPECT_LT(task.grad(task.w_star).norm(), 1e-10);
    EXPECT_GE(task.L_smooth, task.mu);
    Eigen::VectorXd away = task.w_star;
    away[0] += 0.5;
    EXPECT_GT(task.suboptimality(away), 0.0);
}

TEST(Convergence, SingleClientExactGradientsFollowGdRecursion) {
    const ConvexTask task = make_quadratic_task(small_quadratic(1), Rng(4));
    ScheduleConfig sched;
    sched.c = 2.0;
    sched.gamma = 40.0;
    sched.tau1 = 3;
    sched.tau2 = 0;
    ConvergenceOptions opts;
    opts.T = 200;
    opts.seeds = 1;
    opts.stochastic = false;
    const ConvergenceResult r = run_convex_convergence(task, sched, opts);

    // e_{t+1} = (I - eta_t A) e_t with e = w - w*.
    const Eigen::MatrixXd& A = task.A[0];
    Eigen::VectorXd e = -task.w_star;
    for (long t = 1; t <= opts.T; ++t) {
        e = e - sched.c / (double(t) + sched.gamma) * (A * e);
        const double expected = 0.5 * e.dot(A * e);
        ASSERT_NEAR(r.mean[static_cast<std::size_t>(t - 1)], expected, 1e-10 * std::max(1.0, expected)) << "t=" << t;
    }
}

TEST(Convergence, SuboptimalityNonNegativeAndShrinks) {
    QuadraticTaskConfig qc = small_quadratic();
    const ConvexTask task = make_quadratic_task(qc, Rng(5));
    ScheduleConfig sched;
    sched.c = 4.0;
    sched.gamma = 100.0;
    ConvergenceOptions opts;
    opts.T = 10000;
    opts.seeds = 2;
    const ConvergenceResult r = run_convex_convergence(task, sched, opts);
    EXPECT_TRUE(r.hypothesis_holds);
    for (double v : r.mean) ASSERT_GE(v, 0.0);
    const double initial = task.suboptimality(Eigen::VectorXd::Zero(task.dim()));
    EXPECT_LT(r.mean.back() * 100.0, initial);
}

TEST(Convergence, LogisticProcessConverges) {
    const ConvexTask task = make_logistic_task(LogisticTaskConfig{.dim = 5, .samples_per_client = 100}, Rng(6));
    ScheduleConfig sched;
    sched.c = 2.0 / (0.9 * task.mu);
    sched.gamma = 4.0 * sched.c * task.L_smooth;
    ConvergenceOptions opts;
    opts.T = 4000;
    opts.seeds = 2;
    opts.delta = 0.0;
    const ConvergenceResult r = run_convex_convergence(task, sched, opts);
    const double initial = task.suboptimality(Eigen::VectorXd::Zero(task.dim()));
    EXPECT_LT(r.mean.back(), initial);
}

TEST(Convergence, ScheduleCheckEnforced) {
    const ConvexTask task = make_quadratic_task(small_quadratic(), Rng(7));
    ScheduleConfig sched;
    sched.c = 0.5;
    ConvergenceOptions opts;
    opts.T = 10;
    EXPECT_THROW(run_convex_convergence(task, sched, opts), ConfigError);
    sched.tau1 = 0;
    EXPECT_THROW(run_convex_convergence(task, sched, opts), ConfigError);
}

TEST(Convergence, ViolatedHypothesisIsFlaggedNotRejected) {
    const ConvexTask task = make_quadratic_task(small_quadratic(), Rng(8));
    ScheduleConfig sched;
    ConvergenceOptions opts;
    opts.T = 50;
    opts.seeds = 1;
    opts.delta = 1.0;  // delta * L = 10 > mu
    const ConvergenceResult r = run_convex_convergence(task, sched, opts);
    EXPECT_FALSE(r.hypothesis_holds);
    EXPECT_FALSE(r.schedule_checked);
    EXPECT_EQ(r.mean.size(), 50u);
}

TEST(Convergence, DivergenceNamesStep) {
    const ConvexTask task = make_quadratic_task(small_quadratic(), Rng(9));
    ScheduleConfig sched;
    sched.c = 1e3;
    sched.gamma = 1.0;
    ConvergenceOptions opts;
    opts.T = 5000;
    opts.seeds = 1;
    try {
        run_convex_convergence(task, sched, opts);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.step(), 0);
    }
}

TEST(LogLogSlope, ExactPowerLaws) {
    std::vector<double> inv, inv_sqrt;
    for (int t = 1; t <= 1000; ++t) {
        inv.push_back(3.0 / t);
        inv_sqrt.push_back(2.0 / std::sqrt(double(t)));
    }
    EXPECT_NEAR(fit_loglog_slope(inv), -1.0, 1e-6);
    EXPECT_NEAR(fit_loglog_slope(inv_sqrt), -0.5, 1e-6);
    EXPECT_NEAR(fit_loglog_slope(inv, 0.1), -1.0, 1e-6);
}

TEST(LogLogSlope, RejectsNonPositiveTail) {
    std::vector<double> s{1.0, 0.5, 0.25, 0.0};
    EXPECT_THROW(fit_loglog_slope(s), FitError);
    s[3] = -1.0;
    EXPECT_THROW(fit_loglog_slope(s), FitError);
    const std::vector<double> one{1.0};
    EXPECT_THROW(fit_loglog_slope(one), FitError);
    EXPECT_NO_THROW(fit_loglog_slope(std::vector<double>{1.0, -1.0, 0.5, 0.25}));
}

TEST(BiasEnvelope, DominatesEveryProbe) {
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a, r;
        const int n = 10 + static_cast<int>(rng.below(20));
        for (int i = 0; i < n; ++i) {
            a.push_back(rng.uniform(0.0, 5.0));
            r.push_back(rng.uniform(0.0, 1.0) * (0.2 * a.back() + rng.uniform(0.0, 0.3)));
        }
        const BiasEnvelope env = fit_bias_envelope(a, r);
        EXPECT_GE(env.delta, 0.0);
        EXPECT_GE(env.epsilon, 0.0);
        for (int i = 0; i < n; ++i) EXPECT_GE(env.delta * a[i] + env.epsilon, r[i]);
    }
}

TEST(BiasEnvelope, RecoversExactLine) {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> r{0.35, 0.45, 0.55, 0.65};
    const BiasEnvelope env = fit_bias_envelope(a, r);
    EXPECT_NEAR(env.delta, 0.1, 1e-12);
    EXPECT_NEAR(env.epsilon, 0.25, 1e-12);
}

TEST(BiasEnvelope, PermutationInvariant) {
    Rng rng(11);
    std::vector<double> a, r;
    for (int i = 0; i < 15; ++i) {
        a.push_back(rng.uniform(0.1, 3.0));
        r.push_back(rng.uniform(0.0, 1.0));
    }
    const BiasEnvelope base = fit_bias_envelope(a, r);
    std::vector<std::size_t> order(a.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int k = 0; k < 10; ++k) {
        rng.shuffle(order);
        std::vector<double> pa, pr;
        for (std::size_t i : order) {
            pa.push_back(a[i]);
            pr.push_back(r[i]);
        }
        const BiasEnvelope p = fit_bias_envelope(pa, pr);
        EXPECT_EQ(p.delta, base.delta);
        EXPECT_EQ(p.epsilon, base.epsilon);
    }
}

TEST(BiasEnvelope, ZeroGradientsUndefined) {
    const std::vector<double> a{0.0, 0.0};
    const std::vector<double> r{0.1, 0.0};
    EXPECT_THROW(fit_bias_envelope(a, r), FitError);
}

TEST(BiasEnvelope, ZeroGradientWithResidualForcesEpsilon) {
    const std::vector<double> a{0.0, 1.0};
    const std::vector<double> r{0.3, 0.1};
    const BiasEnvelope env = fit_bias_envelope(a, r);
    EXPECT_GE(env.epsilon, 0.3);
}

class MlpBias : public ::testing::Test {
protected:
    void SetUp() override {
        BlobsConfig b;
        b.classes = 3;
        b.per_class = 20;
        data = generate_blobs(b, Rng(12));
        Rng rng(13);
        const ParamVector w0 = init_params(spec, rng.split("init"));
        // Trajectory points, a near-converged point, and random perturbations.
        ParamVector w = w0;
        for (int k = 0; k < 8; ++k) {
            probes.push_back(w);
            w = sgd_unroll(w, data.X, data.targets(), 0.2, 25);
        }
        probes.push_back(sgd_unroll(w, data.X, data.targets(), 0.5, 2000));
        for (int k = 0; k < 4; ++k) {
            ParamVector p = probes[static_cast<std::size_t>(k)];
            for (auto& v : p.values()) v += 0.1 * rng.normal();
            probes.push_back(p);
        }
    }

    MlpSpec spec{{2, 5, 3}};
    LabeledDataset data;
    std::vector<ParamVector> probes;
};

TEST_F(MlpBias, IdenticalDataGivesZero) {
    const BiasEnvelope env = estimate_bias_constants(data.X, data.targets(), data, spec, probes);
    EXPECT_EQ(env.delta, 0.0);
    EXPECT_EQ(env.epsilon, 0.0);
}

TEST_F(MlpBias, PermutedLabelsNeedEpsilon) {
    LabeledDataset shuffled = data;
    Rng(14).shuffle(shuffled.labels);
    const BiasEnvelope env = estimate_bias_constants(shuffled.X, shuffled.targets(), data, spec, probes);
    EXPECT_GT(env.epsilon, 0.0);
}

TEST_F(MlpBias, ProbeOrderDoesNotMatter) {
    const SyntheticDataset syn = init_synthetic(6, 2, 3, Rng(15));
    const BiasEnvelope a = estimate_bias_constants(syn, data, spec, probes);
    std::vector<ParamVector> reversed(probes.rbegin(), probes.rend());
    const BiasEnvelope b = estimate_bias_constants(syn, data, spec, reversed);
    EXPECT_EQ(a.delta, b.delta);
    EXPECT_EQ(a.epsilon, b.epsilon);
}

TEST_F(MlpBias, AssumptionEstimatesNonNegative) {
    const Partition p = dirichlet_partition(data.labels, 3, 3, 1.0, Rng(16));
    const std::vector<ParamVector> few(probes.begin(), probes.begin() + 3);
    const AssumptionEstimates est = estimate_assumptions(data, p, spec, few);
    ASSERT_EQ(est.sigma.size(), 3u);
    for (double s : est.sigma) EXPECT_GE(s, 0.0);
    EXPECT_GT(est.G, 0.0);
}

TEST(ConvexAssumptions, NoiseLevelRecovered) {
    QuadraticTaskConfig qc = small_quadratic();
    qc.noise_std = 0.5;
    const ConvexTask task = make_quadratic_task(qc, Rng(17));
    const auto probes = convex_probes(task, 5, Rng(18));
    const AssumptionEstimates est = estimate_assumptions(task, probes, 2000, Rng(19));
    for (double s : est.sigma) EXPECT_NEAR(s, 0.5 * std::sqrt(8.0), 0.15);
    EXPECT_GE(est.G, est.sigma[0]);
    EXPECT_GT(est.delta, 0.0);
    EXPECT_LE(est.delta, qc.bias_norm / task.mu + 1e-12);
}
