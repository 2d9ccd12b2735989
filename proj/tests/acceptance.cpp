// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dynafed/federation/evaluation.hpp"
#include "dynafed/harness/checkpoint.hpp"
#include "dynafed/harness/config.hpp"
#include "dynafed/harness/experiment.hpp"
#include "dynafed/harness/idx.hpp"
#include "dynafed/orchestration/runner.hpp"
#include "dynafed/synthesis/datasyn.hpp"
#include "dynafed/synthesis/meta.hpp"
#include "dynafed/theory/bias.hpp"
#include "dynafed/theory/convergence.hpp"

using namespace dynafed;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = DYNAFED_CONFIG_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

ExperimentConfig config_for(const std::string& name, std::uint64_t seed) {
    ExperimentConfig cfg = load_config(kConfigDir / name);
    override_seed(cfg, seed);
    return cfg;
}

// ---- criterion 1: meta-gradient against central differences of a hand-written unroll

// Plain 4-2-3 relu network with row-major weights, written without the library.
struct TinyNet {
    std::vector<double> W0, b0, W1, b1;  // 4x2, 2, 2x3, 3
};

TinyNet tiny_from(const ParamVector& w) {
    const auto v = w.values();
    TinyNet n;
    n.W0.assign(v.begin(), v.begin() + 8);
    n.b0.assign(v.begin() + 8, v.begin() + 10);
    n.W1.assign(v.begin() + 10, v.begin() + 16);
    n.b1.assign(v.begin() + 16, v.begin() + 19);
    return n;
}

std::vector<double> flat(const TinyNet& n) {
    std::vector<double> v = n.W0;
    v.insert(v.end(), n.b0.begin(), n.b0.end());
    v.insert(v.end(), n.W1.begin(), n.W1.end());
    v.insert(v.end(), n.b1.begin(), n.b1.end());
    return v;
}

// One full-batch gradient step on mean soft cross entropy.
TinyNet tiny_step(const TinyNet& n, const std::vector<double>& X, const std::vector<double>& T, std::size_t rows,
                  double lr) {
    TinyNet g{std::vector<double>(8, 0.0), std::vector<double>(2, 0.0), std::vector<double>(6, 0.0),
              std::vector<double>(3, 0.0)};
    for (std::size_t i = 0; i < rows; ++i) {
        double pre[2], h[2], z[3];
        for (int j = 0; j < 2; ++j) {
            pre[j] = n.b0[j];
            for (int k = 0; k < 4; ++k) pre[j] += X[i * 4 + k] * n.W0[k * 2 + j];
            h[j] = pre[j] > 0.0 ? pre[j] : 0.0;
        }
        double zmax = -INFINITY;
        for (int c = 0; c < 3; ++c) {
            z[c] = n.b1[c] + h[0] * n.W1[c] + h[1] * n.W1[3 + c];
            zmax = std::max(zmax, z[c]);
        }
        double denom = 0.0;
        for (double zc : z) denom += std::exp(zc - zmax);
        double dz[3], tsum = 0.0;
        for (int c = 0; c < 3; ++c) tsum += T[i * 3 + c];
        for (int c = 0; c < 3; ++c) dz[c] = (tsum * std::exp(z[c] - zmax) / denom - T[i * 3 + c]) / double(rows);
        double dh[2] = {0.0, 0.0};
        for (int c = 0; c < 3; ++c) {
            g.b1[c] += dz[c];
            for (int j = 0; j < 2; ++j) {
                g.W1[j * 3 + c] += h[j] * dz[c];
                dh[j] += n.W1[j * 3 + c] * dz[c];
            }
        }
        for (int j = 0; j < 2; ++j) {
            const double dpre = pre[j] > 0.0 ? dh[j] : 0.0;
            g.b0[j] += dpre;
            for (int k = 0; k < 4; ++k) g.W0[k * 2 + j] += X[i * 4 + k] * dpre;
        }
    }
    TinyNet out = n;
    auto upd = [lr](std::vector<double>& p, const std::vector<double>& d) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
    };
    upd(out.W0, g.W0);
    upd(out.b0, g.b0);
    upd(out.W1, g.W1);
    upd(out.b1, g.b1);
    return out;
}

double tiny_objective(const std::vector<double>& X, const std::vector<double>& Ylogits, std::size_t rows,
                      const TinyNet& start, const std::vector<double>& target, MetricKind metric, double lr,
                      int steps) {
    std::vector<double> T(Ylogits.size());
    for (std::size_t i = 0; i < rows; ++i) {
        double m = -INFINITY, s = 0.0;
        for (int c = 0; c < 3; ++c) m = std::max(m, Ylogits[i * 3 + c]);
        for (int c = 0; c < 3; ++c) s += std::exp(Ylogits[i * 3 + c] - m);
        for (int c = 0; c < 3; ++c) T[i * 3 + c] = std::exp(Ylogits[i * 3 + c] - m) / s;
    }
    TinyNet w = start;
    for (int k = 0; k < steps; ++k) w = tiny_step(w, X, T, rows, lr);
    const auto a = flat(w);
    const auto s0 = flat(start);
    double sq = 0.0, ref = 0.0, dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sq += (a[i] - target[i]) * (a[i] - target[i]);
        ref += (s0[i] - target[i]) * (s0[i] - target[i]);
        dot += a[i] * target[i];
        na += a[i] * a[i];
        nb += target[i] * target[i];
    }
    switch (metric) {
        case MetricKind::L2: return sq;
        case MetricKind::NormalizedL2: return sq / ref;
        case MetricKind::Cosine: return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    }
    return NAN;
}

double relative_error(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

Outcome criterion_meta_gradient() {
    const MlpSpec spec({4, 2, 3});
    const double h = 1e-5;
    double worst = 0.0;
    std::ostringstream detail;
    for (MetricKind metric : {MetricKind::L2, MetricKind::NormalizedL2, MetricKind::Cosine}) {
        Rng rng = Rng(11).split(to_string(metric));
        const ParamVector ws = init_params(spec, rng.split("start"));
        ParamVector wt = ws;
        Rng move = rng.split("target");
        for (std::size_t i = 0; i < wt.size(); ++i) wt[i] += move.normal(0.0, 0.3);
        SyntheticDataset d = init_synthetic(3, 4, 3, rng.split("data"));
        Rng ylog = rng.split("ylogits");
        for (double& v : d.Ylogits.values()) v = ylog.normal();

        SynthConfig cfg;
        cfg.s_prime = 2;
        cfg.eta_inner = 0.5;
        cfg.n = 3;
        cfg.metric = metric;
        const auto res = meta_loss_and_grads(d, ws, wt, cfg);
        if (!res) return {false, "meta objective unexpectedly degenerate"};

        std::vector<double> X(d.X.values().begin(), d.X.values().end());
        std::vector<double> Y(d.Ylogits.values().begin(), d.Ylogits.values().end());
        const TinyNet start = tiny_from(ws);
        const std::vector<double> target(wt.values().begin(), wt.values().end());
        auto f = [&] { return tiny_objective(X, Y, 3, start, target, metric, cfg.eta_inner, cfg.s_prime); };
        auto central = [&](std::vector<double>& v) {
            std::vector<double> g(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double keep = v[i];
                v[i] = keep + h;
                const double up = f();
                v[i] = keep - h;
                const double down = f();
                v[i] = keep;
                g[i] = (up - down) / (2.0 * h);
            }
            return g;
        };
        if (std::abs(f() - res->loss) > 1e-10 * std::max(1.0, std::abs(f()))) {
            return {false, to_string(metric) + " loss disagrees with the hand-written unroll"};
        }
        const double ex = relative_error({res->gX.values().begin(), res->gX.values().end()}, central(X));
        const double ey = relative_error({res->gY.values().begin(), res->gY.values().end()}, central(Y));
        worst = std::max({worst, ex, ey});
        detail << to_string(metric) << " " << fmt("%.2e", std::max(ex, ey)) << "  ";
    }
    detail << "max " << fmt("%.2e", worst) << " (< 1e-4)";
    return {worst < 1e-4, detail.str()};
}

// ---- criteria 2 and 3: synthesis on the reference run

struct SynthesisRun {
    std::vector<double> losses;
    std::vector<double> syn_distances;
    std::vector<double> noise_distances;
};

std::vector<SynthesisRun> synthesis_runs() {
    std::vector<SynthesisRun> out;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const ExperimentConfig cfg = config_for("acceptance_synthesis.cfg", seed);
        const FederatedData data = load_experiment_data(cfg);
        const RunConfig run = resolved_run_config(cfg, data);
        const RunResult r = run_dynafed(run, data, experiment_partition(cfg, data.train));
        SynthesisRun s;
        for (const auto& e : r.synthesis->log) s.losses.push_back(e.loss);
        const SyntheticDataset noise =
            init_synthetic(run.synth.n, data.train.dim(), data.train.num_classes, Rng(seed).split("noise"));
        const auto rows =
            trajectory_fidelity(r.prefix, run.synth, {as_candidate("synthetic", r.synthesis->dataset), as_candidate("noise", noise)});
        s.syn_distances = rows[0].distances;
        s.noise_distances = rows[1].distances;
        out.push_back(std::move(s));
    }
    return out;
}

Outcome criterion_synthesis_loss(const std::vector<SynthesisRun>& runs) {
    bool ok = true;
    std::ostringstream detail;
    for (const auto& r : runs) {
        if (r.losses.size() < 60) return {false, "synthesis log shorter than 60 iterations"};
        const double first = std::accumulate(r.losses.begin(), r.losses.begin() + 30, 0.0) / 30.0;
        const double last = std::accumulate(r.losses.end() - 30, r.losses.end(), 0.0) / 30.0;
        ok = ok && last <= 0.5 * first;
        detail << fmt("%.3g", last / first) << " ";
    }
    detail << "last30/first30 per seed (<= 0.5)";
    return {ok, detail.str()};
}

Outcome criterion_fidelity(const std::vector<SynthesisRun>& runs) {
    std::size_t wins = 0, total = 0;
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < r.syn_distances.size(); ++i) wins += r.syn_distances[i] < r.noise_distances[i];
        total += r.syn_distances.size();
    }
    const double frac = total ? double(wins) / double(total) : 0.0;
    return {total > 0 && frac >= 0.9,
            std::to_string(wins) + "/" + std::to_string(total) + " segments closer than noise (>= 90%)"};
}

// ---- criteria 4, 5, 7, 8: the heterogeneous federation

double accuracy_std_last(const RunResult& r, std::size_t k) {
    const std::size_t n = r.metrics.size();
    const std::size_t from = n > k ? n - k : 0;
    double mean = 0.0;
    for (std::size_t i = from; i < n; ++i) mean += r.metrics[i].test_acc;
    mean /= double(n - from);
    double var = 0.0;
    for (std::size_t i = from; i < n; ++i) var += (r.metrics[i].test_acc - mean) * (r.metrics[i].test_acc - mean);
    return std::sqrt(var / double(n - from));
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

struct HeterogeneityRuns {
    std::vector<RunResult> fedavg, dynafed;
    std::vector<FederatedData> data;
};

HeterogeneityRuns heterogeneity_runs() {
    HeterogeneityRuns out;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const ExperimentConfig cfg = config_for("acceptance_heterogeneity.cfg", seed);
        out.data.push_back(load_experiment_data(cfg));
        const FederatedData& data = out.data.back();
        const RunConfig run = resolved_run_config(cfg, data);
        const Partition p = experiment_partition(cfg, data.train);
        out.fedavg.push_back(run_fedavg(run, data, p));
        out.dynafed.push_back(run_dynafed(run, data, p));
    }
    return out;
}

Outcome criterion_accuracy(const HeterogeneityRuns& h) {
    std::vector<double> fa, df, fa_sd, df_sd;
    for (std::size_t i = 0; i < h.fedavg.size(); ++i) {
        fa.push_back(h.fedavg[i].metrics.back().test_acc);
        df.push_back(h.dynafed[i].metrics.back().test_acc);
        fa_sd.push_back(accuracy_std_last(h.fedavg[i], 20));
        df_sd.push_back(accuracy_std_last(h.dynafed[i], 20));
    }
    const bool ok = mean_of(df) >= mean_of(fa) + 0.05 && mean_of(df_sd) < mean_of(fa_sd);
    return {ok, "final acc DynaFed " + fmt("%.3f", mean_of(df)) + " vs FedAvg " + fmt("%.3f", mean_of(fa)) +
                    " (need +0.05); last-20 std " + fmt("%.4f", mean_of(df_sd)) + " vs " + fmt("%.4f", mean_of(fa_sd))};
}

Outcome criterion_client_loss(const HeterogeneityRuns& h) {
    bool ok = true;
    std::ostringstream detail;
    for (const auto& r : h.dynafed) {
        std::size_t rounds = 0, better = 0;
        for (const auto& m : r.metrics) {
            if (m.phase != "finetune") continue;
            ++rounds;
            better += mean_of(m.client_losses) < mean_of(m.pre_ft_client_losses);
        }
        const double frac = rounds ? double(better) / double(rounds) : 0.0;
        ok = ok && rounds > 0 && frac >= 0.8;
        detail << better << "/" << rounds << " ";
    }
    detail << "finetune rounds lower mean client loss per seed (>= 80%)";
    return {ok, detail.str()};
}

Outcome criterion_zero_finetune() {
    ExperimentConfig cfg = config_for("acceptance_heterogeneity.cfg", 0);
    cfg.run.finetune.steps = 0;
    const FederatedData data = load_experiment_data(cfg);
    const RunConfig run = resolved_run_config(cfg, data);
    const Partition p = experiment_partition(cfg, data.train);
    const RunResult fa = run_fedavg(run, data, p);
    const RunResult df = run_dynafed(run, data, p);
    bool same = fa.final_model == df.final_model && fa.metrics.size() == df.metrics.size();
    for (std::size_t i = 0; same && i < fa.metrics.size(); ++i) {
        same = std::bit_cast<std::uint64_t>(fa.metrics[i].test_acc) == std::bit_cast<std::uint64_t>(df.metrics[i].test_acc) &&
               std::bit_cast<std::uint64_t>(fa.metrics[i].test_loss) == std::bit_cast<std::uint64_t>(df.metrics[i].test_loss);
    }
    for (std::size_t i = 0; same && i < fa.trajectory.size(); ++i) same = fa.trajectory[i] == df.trajectory[i];
    return {same, same ? "final model, trajectory and per-round metrics bitwise equal" : "DynaFed with zero finetune steps diverges from FedAvg"};
}

Outcome criterion_envelope(const HeterogeneityRuns& h) {
    const RunResult& r = h.dynafed.front();
    const LabeledDataset& train = h.data.front().train;
    const MlpSpec& spec = r.final_model.spec();
    std::vector<ParamVector> probes(r.trajectory.checkpoints.begin(), r.trajectory.checkpoints.end());

    const BiasEnvelope same = estimate_bias_constants(train.X, train.targets(), train, spec, probes);
    const bool zero = same.delta == 0.0 && same.epsilon == 0.0;

    const SyntheticDataset& dsyn = r.synthesis->dataset;
    const BiasEnvelope env = estimate_bias_constants(dsyn, train, spec, probes);
    LossGradient grads(spec);
    bool dominates = env.delta >= 0.0 && env.epsilon >= 0.0;
    for (const auto& w : probes) {
        const auto gr = grads(w, train.X, train.targets()).grad;
        const auto gs = grads(w, dsyn.X, dsyn.targets()).grad;
        double a = 0.0, res = 0.0;
        for (std::size_t i = 0; i < gr.size(); ++i) {
            a += gr[i] * gr[i];
            res += (gs[i] - gr[i]) * (gs[i] - gr[i]);
        }
        dominates = dominates && env.delta * std::sqrt(a) + env.epsilon >= std::sqrt(res) * (1.0 - 1e-12);
    }
    return {zero && dominates, "identical data gives (" + fmt("%g", same.delta) + ", " + fmt("%g", same.epsilon) +
                                   "); learned data (" + fmt("%.3g", env.delta) + ", " + fmt("%.3g", env.epsilon) +
                                   ") dominates " + std::to_string(probes.size()) + " probes"};
}

// ---- criterion 6: convex convergence rate

Outcome criterion_convergence() {
    const ExperimentConfig cfg = config_for("theory.cfg", 0);
    const TheoryConfig& th = cfg.theory;
    const ConvexTask task = make_quadratic_task(th.quadratic, Rng(cfg.seed).split("theory-task"));
    ConvergenceOptions opts;
    opts.T = th.T;
    opts.seeds = th.seeds;
    opts.base_seed = cfg.seed;
    opts.stochastic = th.stochastic;
    const ConvergenceResult res = run_convex_convergence(task, th.schedule, opts);
    const double slope = fit_loglog_slope(res.mean, th.slope_window);
    const bool premise = res.delta * task.L_smooth < task.mu && th.schedule.c * res.mu_tilde > 1.0;
    return {premise && slope >= -1.3 && slope <= -0.7,
            "slope " + fmt("%.3f", slope) + " in [-1.3, -0.7]; delta*L " + fmt("%.3g", res.delta * task.L_smooth) +
                " < mu " + fmt("%g", task.mu) + "; c*mu~ " + fmt("%.3g", th.schedule.c * res.mu_tilde)};
}

// ---- criterion 9: partition invariants, IDX fixture, checkpoint round trip, determinism

bool partition_ok(const Partition& p, std::size_t n, std::size_t M) {
    if (p.client_indices.size() != M || p.weights.size() != M) return false;
    std::set<std::size_t> seen;
    double wsum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        if (p.client_indices[m].empty()) return false;
        for (std::size_t i : p.client_indices[m])
            if (i >= n || !seen.insert(i).second) return false;
        if (std::abs(p.weights[m] - double(p.client_indices[m].size()) / double(n)) > 1e-12) return false;
        wsum += p.weights[m];
    }
    return seen.size() == n && std::abs(wsum - 1.0) < 1e-9;
}

std::vector<std::uint8_t> be32(std::vector<std::uint32_t> words) {
    std::vector<std::uint8_t> out;
    for (auto w : words)
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(w >> s));
    return out;
}

Outcome criterion_reproducibility() {
    std::vector<std::string> failures;

    Rng draws(2024);
    int partitions = 0;
    for (int k = 0; k < 100; ++k) {
        const double alpha = std::pow(10.0, draws.uniform(-2.0, 2.0));
        const std::size_t M = 1 + draws.below(30);
        const std::size_t K = 2 + draws.below(8);
        std::vector<int> labels;
        for (std::size_t i = 0; i < 200; ++i) labels.push_back(static_cast<int>(i % K));
        const Partition p = dirichlet_partition(labels, K, M, alpha, draws.split(static_cast<std::uint64_t>(k)));
        partitions += partition_ok(p, labels.size(), M);
    }
    if (partitions != 100) failures.push_back("partition invariants " + std::to_string(partitions) + "/100");

    auto img = be32({0x803, 2, 2, 2});
    for (std::uint8_t v : {0, 255, 51, 102, 7, 8, 9, 10}) img.push_back(v);
    auto lab = be32({0x801, 2});
    lab.push_back(4);
    lab.push_back(1);
    const LabeledDataset idx = idx_dataset(parse_idx_images(img), parse_idx_labels(lab));
    if (idx.size() != 2 || idx.dim() != 4 || idx.num_classes != 5 || idx.labels != std::vector<int>{4, 1} ||
        idx.X(0, 1) != 1.0 || std::abs(idx.X(0, 2) - 51.0 / 255.0) > 1e-15) {
        failures.push_back("IDX fixture");
    }

    const ExperimentConfig cfg = config_for("quick.cfg", 5);
    const FederatedData data = load_experiment_data(cfg);
    const RunConfig run = resolved_run_config(cfg, data);
    const Partition part = experiment_partition(cfg, data.train);
    const RunResult a = run_dynafed(run, data, part);
    const RunResult b = run_dynafed(run, data, experiment_partition(cfg, load_experiment_data(cfg).train));

    const fs::path dir = fs::temp_directory_path() / "dynafed_acceptance";
    fs::create_directories(dir);
    save_checkpoint(a.final_model, dir / "model.dyna");
    save_checkpoint(a.synthesis->dataset, dir / "synthetic.dyna");
    save_checkpoint(a.trajectory, dir / "trajectory.dyna");
    const SyntheticDataset syn = load_synthetic(dir / "synthetic.dyna");
    const Trajectory traj = load_trajectory(dir / "trajectory.dyna");
    if (!(load_params(dir / "model.dyna") == a.final_model) || syn.X != a.synthesis->dataset.X ||
        syn.Ylogits != a.synthesis->dataset.Ylogits || traj.rounds != a.trajectory.rounds ||
        traj.checkpoints != a.trajectory.checkpoints) {
        failures.push_back("checkpoint round trip");
    }
    fs::remove_all(dir);

    bool same = a.final_model == b.final_model && a.metrics.size() == b.metrics.size() &&
                a.synthesis->dataset.X == b.synthesis->dataset.X;
    for (std::size_t i = 0; same && i < a.metrics.size(); ++i) {
        const auto& x = a.metrics[i];
        const auto& y = b.metrics[i];
        same = x.phase == y.phase && x.test_acc == y.test_acc && x.test_loss == y.test_loss &&
               x.pre_ft_acc == y.pre_ft_acc && x.post_ft_acc == y.post_ft_acc;
    }
    if (!same) failures.push_back("double-run determinism");

    std::string detail = "100/100 partitions, IDX fixture, checkpoint round trip, double-run determinism";
    if (!failures.empty()) {
        detail = "failed:";
        for (const auto& f : failures) detail += " [" + f + "]";
    }
    return {failures.empty(), detail};
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "meta-gradient matches finite differences", criterion_meta_gradient);

    std::vector<SynthesisRun> synth;
    std::string synth_error;
    try {
        synth = synthesis_runs();
    } catch (const std::exception& e) {
        synth_error = e.what();
    }
    auto need_synth = [&](auto f) {
        return [&, f] {
            if (!synth_error.empty()) throw Error(synth_error);
            return f(synth);
        };
    };
    report(2, "synthesis loss decreases", need_synth(criterion_synthesis_loss));
    report(3, "synthetic data beats noise on trajectory fidelity", need_synth(criterion_fidelity));

    HeterogeneityRuns het;
    std::string het_error;
    try {
        het = heterogeneity_runs();
    } catch (const std::exception& e) {
        het_error = e.what();
    }
    auto need_het = [&](auto f) {
        return [&, f] {
            if (!het_error.empty()) throw Error(het_error);
            return f(het);
        };
    };
    report(4, "DynaFed beats FedAvg under heterogeneity", need_het(criterion_accuracy));
    report(5, "finetuning lowers client losses", need_het(criterion_client_loss));
    report(6, "convex convergence rate", criterion_convergence);
    report(7, "zero finetune steps reduce DynaFed to FedAvg", criterion_zero_finetune);
    report(8, "bias envelope", need_het(criterion_envelope));
    report(9, "partitions, IDX, checkpoints, determinism", criterion_reproducibility);

    std::printf("%d of 9 criteria passed\n", 9 - failed);
    return failed == 0 ? 0 : 1;
}
