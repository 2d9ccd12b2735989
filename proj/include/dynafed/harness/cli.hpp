#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/harness/checkpoint.hpp"
#include "dynafed/harness/config.hpp"
#include "dynafed/harness/experiment.hpp"
#include "dynafed/harness/output.hpp"
#include "dynafed/harness/selftest.hpp"
#include "dynafed/orchestration/runner.hpp"
#include "dynafed/synthesis/datasyn.hpp"
#include "dynafed/theory/bias.hpp"
#include "dynafed/theory/convergence.hpp"
#include "dynafed/theory/convex_task.hpp"

namespace dynafed {

namespace cli_detail {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
    std::string algo = "fedavg";
    std::string trajectory;
    std::string synthetic;
    bool verbose = false;
};

inline ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
    if (o.seed_given) override_seed(cfg, o.seed);
    if (!o.out.empty()) cfg.output_dir = o.out;
    return cfg;
}

inline fs::path output_dir(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

template <class Writer>
void write_text(const fs::path& path, Writer&& writer) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    writer(f);
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

inline void write_json(const fs::path& path, const json& j) {
    write_text(path, [&](std::ostream& f) { f << j.dump(2) << '\n'; });
}

/// The first L + 1 checkpoints, the part of a run that synthesis reads.
inline Trajectory synthesis_prefix(const Trajectory& traj, int L) {
    if (traj.size() < static_cast<std::size_t>(L) + 1) return traj;
    Trajectory out;
    for (std::size_t i = 0; i <= static_cast<std::size_t>(L); ++i) out.push_back(traj.rounds[i], traj[i]);
    return out;
}

inline int cmd_partition(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const FederatedData data = load_experiment_data(cfg);
    const Partition p = experiment_partition(cfg, data.train);
    json j;
    j["seed"] = cfg.seed;
    j["alpha"] = cfg.alpha;
    j["clients"] = p.num_clients();
    j["samples"] = data.train.size();
    json sizes = json::array(), counts = json::array();
    std::size_t lo = data.train.size(), hi = 0;
    for (const auto& idx : p.client_indices) {
        sizes.push_back(idx.size());
        lo = std::min(lo, idx.size());
        hi = std::max(hi, idx.size());
        counts.push_back(data.train.subset(idx).class_counts());
    }
    j["min_size"] = lo;
    j["max_size"] = hi;
    j["sizes"] = sizes;
    j["weights"] = p.weights;
    j["class_counts"] = counts;
    write_json(output_dir(cfg) / "partition.json", j);
    out << j.dump(2) << '\n';
    return 0;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const Algorithm algo = parse_algorithm(o.algo);
    const ExperimentConfig cfg = resolve(o);
    const FederatedData data = load_experiment_data(cfg);
    const RunConfig run = resolved_run_config(cfg, data);
    const Partition partition = experiment_partition(cfg, data.train);
    const fs::path dir = output_dir(cfg);
    write_text(dir / "config.cfg", [&](std::ostream& f) { f << dump_config(cfg); });

    RunObserver observer;
    if (o.verbose) {
        observer.on_round = [&err](const RoundMetrics& m) {
            err << "round " << m.round << " [" << m.phase << "] acc " << std::fixed << std::setprecision(4)
                << m.test_acc << " loss " << m.test_loss << std::defaultfloat << '\n';
        };
    }
    const RunResult res = run_algorithm(algo, run, data, partition, observer);

    write_text(dir / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, res.metrics); });
    if (run.track_client_losses) {
        write_text(dir / "client_losses.csv", [&](std::ostream& f) { write_client_loss_csv(f, res.metrics); });
    }
    save_checkpoint(res.final_model, dir / "final_model.dyna");
    if (run.keep_trajectory) save_checkpoint(res.trajectory, dir / "trajectory.dyna");

    json j;
    j["algo"] = to_string(algo);
    j["seed"] = cfg.seed;
    j["final_acc"] = res.metrics.back().test_acc;
    j["final_loss"] = res.metrics.back().test_loss;
    j["rounds"] = run.rounds;
    j["clients"] = run.clients;
    j["layers"] = run.layers;
    if (res.synthesis) {
        save_checkpoint(res.synthesis->dataset, dir / "synthetic.dyna");
        write_text(dir / "synth_log.csv", [&](std::ostream& f) { write_synth_log_csv(f, res.synthesis->log); });
        const BiasEnvelope env = estimate_bias_constants(res.synthesis->dataset, data.train, MlpSpec(run.layers),
                                                         res.prefix.checkpoints);
        j["delta"] = env.delta;
        j["epsilon"] = env.epsilon;
        j["synthesis_skipped"] = res.synthesis->skipped;
        j["warnings"] = res.synthesis->warnings;
        for (const auto& w : res.synthesis->warnings) err << "warning: " << w << '\n';
    }
    write_json(dir / "summary.json", j);
    out << to_string(algo) << " seed " << cfg.seed << " final_acc " << res.metrics.back().test_acc << '\n';
    return 0;
}

inline int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path traj_path = o.trajectory.empty() ? fs::path(cfg.output_dir) / "trajectory.dyna" : fs::path(o.trajectory);
    const Trajectory traj = synthesis_prefix(load_trajectory(traj_path), cfg.run.trajectory_rounds);
    const DataSynResult res = datasyn(traj, cfg.run.synth, Rng(cfg.seed).split("synthesis"));
    const fs::path dir = output_dir(cfg);
    save_checkpoint(res.dataset, dir / "synthetic.dyna");
    write_text(dir / "synth_log.csv", [&](std::ostream& f) { write_synth_log_csv(f, res.log); });
    for (const auto& w : res.warnings) err << "warning: " << w << '\n';
    json j;
    j["algo"] = "datasyn";
    j["seed"] = cfg.seed;
    j["iterations"] = res.log.size();
    j["final_loss"] = res.log.back().loss;
    j["skipped"] = res.skipped;
    j["warnings"] = res.warnings;
    write_json(dir / "synth_summary.json", j);
    out << "datasyn " << res.log.size() << " iterations, final matching loss " << res.log.back().loss << '\n';
    return 0;
}

inline int cmd_fidelity(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path base(cfg.output_dir);
    const fs::path traj_path = o.trajectory.empty() ? base / "trajectory.dyna" : fs::path(o.trajectory);
    const fs::path syn_path = o.synthetic.empty() ? base / "synthetic.dyna" : fs::path(o.synthetic);
    const Trajectory traj = synthesis_prefix(load_trajectory(traj_path), cfg.run.trajectory_rounds);
    const FederatedData data = load_experiment_data(cfg);

    std::vector<FidelityCandidate> candidates;
    const bool have_syn = !o.synthetic.empty() || fs::exists(syn_path);
    if (have_syn) candidates.push_back(as_candidate("synthetic", load_synthetic(syn_path)));
    const std::size_t n = have_syn ? candidates.front().X.rows() : cfg.run.synth.n;
    for (auto& c : baseline_candidates(data.train, n, Rng(cfg.seed).split("fidelity"))) candidates.push_back(std::move(c));
    const auto rows = trajectory_fidelity(traj, cfg.run.synth, candidates);

    const fs::path dir = output_dir(cfg);
    write_text(dir / "fidelity.csv", [&](std::ostream& f) { write_fidelity_csv(f, rows); });
    json j;
    j["algo"] = "fidelity";
    j["seed"] = cfg.seed;
    for (const auto& r : rows) {
        j["mean"][r.name] = r.mean;
        out << std::left << std::setw(12) << r.name << " mean distance " << r.mean << " over " << r.segments.size()
            << " segments\n";
    }
    if (have_syn) {
        const auto& syn = rows.front().distances;
        const auto& noise = rows.back().distances;
        std::size_t wins = 0;
        for (std::size_t i = 0; i < syn.size(); ++i) wins += syn[i] < noise[i] ? 1 : 0;
        j["synthetic_beats_noise"] = static_cast<double>(wins) / static_cast<double>(syn.size());
    }
    write_json(dir / "fidelity_summary.json", j);
    return 0;
}

inline ConvexTask theory_task(const ExperimentConfig& cfg) {
    const Rng rng = Rng(cfg.seed).split("theory-task");
    return cfg.theory.task == ConvexKind::Quadratic ? make_quadratic_task(cfg.theory.quadratic, rng)
                                                    : make_logistic_task(cfg.theory.logistic, rng);
}

inline int cmd_theory(const Options& o, std::ostream& out) {
    const ExperimentConfig cfg = resolve(o);
    const TheoryConfig& t = cfg.theory;
    const ConvexTask task = theory_task(cfg);
    const Rng rng = Rng(cfg.seed).split("theory-probes");
    const auto probes = convex_probes(task, static_cast<std::size_t>(t.probes), rng.split("points"));
    const AssumptionEstimates est = estimate_assumptions(task, probes, t.draws, rng.split("draws"));

    ConvergenceOptions opts;
    opts.T = t.T;
    opts.seeds = t.seeds;
    opts.base_seed = cfg.seed;
    opts.stochastic = t.stochastic;
    opts.delta = est.delta;
    const ConvergenceResult res = run_convex_convergence(task, t.schedule, opts);
    const double slope = fit_loglog_slope(res.mean, t.slope_window);

    const fs::path dir = output_dir(cfg);
    write_text(dir / "theory.csv", [&](std::ostream& f) { write_theory_csv(f, res.mean, res.stddev); });
    json j;
    j["algo"] = "theory-" + to_string(task.kind);
    j["seed"] = cfg.seed;
    j["slope"] = slope;
    j["delta"] = est.delta;
    j["epsilon"] = est.epsilon;
    j["mu"] = task.mu;
    j["L_smooth"] = task.L_smooth;
    j["mu_tilde"] = res.mu_tilde;
    j["sigma"] = est.sigma;
    j["G"] = est.G;
    j["hypothesis_holds"] = res.hypothesis_holds;
    j["schedule_checked"] = res.schedule_checked;
    j["final_suboptimality"] = res.mean.back();
    write_json(dir / "theory_summary.json", j);
    out << "slope " << slope << " delta " << est.delta << " epsilon " << est.epsilon
        << (res.hypothesis_holds ? "" : " (delta * L >= mu: rate not guaranteed)") << '\n';
    return 0;
}

inline int cmd_selftest(const Options& o, std::ostream& out) {
    const std::uint64_t seed = o.seed_given ? o.seed : (o.config.empty() ? 0 : load_config(o.config).seed);
    double worst = 0.0;
    for (const auto& c : meta_gradient_selftest(seed)) {
        out << std::left << std::setw(14) << to_string(c.metric) << " s'=" << c.s_prime << "  dX " << std::scientific
            << std::setprecision(3) << c.error_x << "  dY " << c.error_y << std::defaultfloat << '\n';
        worst = std::max({worst, c.error_x, c.error_y});
    }
    out << "max relative meta-gradient error " << std::scientific << std::setprecision(3) << worst
        << std::defaultfloat << '\n';
    if (!(worst < 1e-4)) throw Error("meta-gradient selftest failed: error above 1e-4");
    return 0;
}

}  // namespace cli_detail

/// Entry point of the `dynafed` tool. Returns 0 on success, 1 for invalid
/// input (arguments, config, files), 2 for failures during computation.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    cli_detail::Options o;
    CLI::App app{"Federated learning simulator with server-side synthetic-data finetuning", "dynafed"};
    app.require_subcommand(1);
    auto* partition = app.add_subcommand("partition", "Emit Dirichlet partition statistics as JSON");
    auto* train = app.add_subcommand("train", "Run a federated training experiment");
    auto* synth = app.add_subcommand("synth", "Learn a synthetic dataset from a saved trajectory");
    auto* fidelity = app.add_subcommand("fidelity", "Score datasets by trajectory-matching distance");
    auto* theory = app.add_subcommand("theory", "Convergence experiment on a convex task");
    auto* selftest = app.add_subcommand("selftest", "Check meta-gradients against finite differences");
    for (auto* sub : {partition, train, synth, fidelity, theory, selftest}) {
        sub->add_option("--config", o.config, "Experiment config file");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&o](const std::uint64_t& s) { o.seed = s, o.seed_given = true; }, "Override the config seed");
        if (sub != selftest) sub->add_option("--out", o.out, "Override experiment.output_dir");
    }
    train->add_option("--algo", o.algo, "fedavg, fedprox or dynafed")
        ->check(CLI::IsMember({"fedavg", "fedprox", "dynafed"}));
    train->add_flag("--verbose", o.verbose, "Print per-round progress on stderr");
    synth->add_option("--trajectory", o.trajectory, "Trajectory checkpoint (default <out>/trajectory.dyna)");
    fidelity->add_option("--trajectory", o.trajectory, "Trajectory checkpoint (default <out>/trajectory.dyna)");
    fidelity->add_option("--synthetic", o.synthetic, "Synthetic dataset (default <out>/synthetic.dyna if present)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    try {
        if (partition->parsed()) return cli_detail::cmd_partition(o, out);
        if (train->parsed()) return cli_detail::cmd_train(o, out, err);
        if (synth->parsed()) return cli_detail::cmd_synth(o, out, err);
        if (fidelity->parsed()) return cli_detail::cmd_fidelity(o, out);
        if (theory->parsed()) return cli_detail::cmd_theory(o, out);
        return cli_detail::cmd_selftest(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace dynafed
