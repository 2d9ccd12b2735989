#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/harness/blobs.hpp"
#include "dynafed/orchestration/runner.hpp"
#include "dynafed/theory/convergence.hpp"
#include "dynafed/theory/convex_task.hpp"

namespace dynafed {

enum class TaskKind { Blobs, Idx };

inline std::string to_string(TaskKind k) { return k == TaskKind::Blobs ? "blobs" : "idx"; }

inline TaskKind parse_task_kind(const std::string& s) {
    if (s == "blobs") return TaskKind::Blobs;
    if (s == "idx") return TaskKind::Idx;
    throw ConfigError("unknown task '" + s + "' (expected blobs or idx)");
}

inline ConvexKind parse_convex_kind(const std::string& s) {
    if (s == "quadratic") return ConvexKind::Quadratic;
    if (s == "logistic") return ConvexKind::Logistic;
    throw ConfigError("unknown theory task '" + s + "' (expected quadratic or logistic)");
}

struct IdxPaths {
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

struct TheoryConfig {
    ConvexKind task = ConvexKind::Quadratic;
    QuadraticTaskConfig quadratic{};
    LogisticTaskConfig logistic{};
    ScheduleConfig schedule{};
    long T = 10000;
    int seeds = 5;
    bool stochastic = true;
    int probes = 32;  // envelope probe points
    int draws = 64;   // stochastic gradients per probe for sigma and G
    double slope_window = 0.5;
};

/// Everything one CLI invocation needs. Network input and output widths come
/// from the data; only hidden widths are configured.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    TaskKind task = TaskKind::Blobs;
    BlobsConfig blobs{};
    std::size_t blobs_test_per_class = 100;
    IdxPaths idx{};
    double alpha = 0.05;  // Dirichlet concentration
    std::vector<std::size_t> hidden{100};
    RunConfig run{};
    TheoryConfig theory{};

    /// Layer sizes for data of dimension d with K classes.
    std::vector<std::size_t> layers_for(std::size_t d, std::size_t K) const {
        std::vector<std::size_t> l{d};
        l.insert(l.end(), hidden.begin(), hidden.end());
        l.push_back(K);
        return l;
    }

    void validate() const {
        if (output_dir.empty()) throw ConfigError("experiment.output_dir must not be empty");
        if (task == TaskKind::Blobs) {
            blobs.validate();
            if (blobs_test_per_class == 0) throw ConfigError("blobs.test_per_class must be positive");
        } else if (idx.train_images.empty() || idx.train_labels.empty() || idx.test_images.empty() ||
                   idx.test_labels.empty()) {
            throw ConfigError("task = idx needs all four idx.* paths");
        }
        if (!(alpha > 0.0)) throw ConfigError("partition.alpha must be positive");
        for (std::size_t h : hidden)
            if (h == 0) throw ConfigError("model.hidden widths must be positive");
        RunConfig r = run;
        r.layers = task == TaskKind::Blobs ? layers_for(blobs.dim, blobs.classes) : layers_for(1, 2);
        r.validate();
        theory.schedule.validate();
        if (theory.T < 1) throw ConfigError("theory.T must be at least 1");
        if (theory.seeds < 1) throw ConfigError("theory.seeds must be at least 1");
        if (theory.probes < 2) throw ConfigError("theory.probes must be at least 2");
        if (theory.draws < 2) throw ConfigError("theory.draws must be at least 2");
        if (!(theory.slope_window > 0.0 && theory.slope_window <= 1.0)) {
            throw ConfigError("theory.slope_window must lie in (0, 1]");
        }
    }
};

namespace config_detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + raw + "' as a number");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + raw + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& raw) {
    std::vector<std::size_t> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, item));
    if (trim(raw).empty()) return {};
    return out;
}

struct Entry {
    std::function<std::string()> get;
    std::function<void(const std::string& key, const std::string& value)> set;
};

template <class T>
Entry number(T& field) {
    if constexpr (std::is_floating_point_v<T>) {
        return {[&field] { return format_double(field); },
                [&field](const std::string& k, const std::string& v) { field = parse_number<T>(k, v); }};
    } else {
        return {[&field] { return std::to_string(field); },
                [&field](const std::string& k, const std::string& v) { field = parse_number<T>(k, v); }};
    }
}

inline Entry boolean(bool& field) {
    return {[&field] { return std::string(field ? "true" : "false"); },
            [&field](const std::string& k, const std::string& v) { field = parse_bool(k, v); }};
}

inline Entry text(std::string& field) {
    return {[&field] { return field; }, [&field](const std::string&, const std::string& v) { field = trim(v); }};
}

template <class E, class Parse>
Entry enumeration(E& field, Parse parse) {
    return {[&field] { return to_string(field); },
            [&field, parse](const std::string&, const std::string& v) { field = parse(trim(v)); }};
}

inline Entry size_list(std::vector<std::size_t>& field) {
    return {[&field] {
                std::string s;
                for (std::size_t i = 0; i < field.size(); ++i) s += (i ? "," : "") + std::to_string(field[i]);
                return s;
            },
            [&field](const std::string& k, const std::string& v) { field = parse_size_list(k, v); }};
}

}  // namespace config_detail

/// Schema as "section.key" -> accessor, bound to the fields of `cfg`.
inline std::map<std::string, config_detail::Entry> config_schema(ExperimentConfig& cfg) {
    using namespace config_detail;
    RunConfig& r = cfg.run;
    TheoryConfig& t = cfg.theory;
    return {
        {"experiment.seed", number(cfg.seed)},
        {"experiment.output_dir", text(cfg.output_dir)},
        {"experiment.task", enumeration(cfg.task, parse_task_kind)},
        {"blobs.classes", number(cfg.blobs.classes)},
        {"blobs.dim", number(cfg.blobs.dim)},
        {"blobs.per_class", number(cfg.blobs.per_class)},
        {"blobs.test_per_class", number(cfg.blobs_test_per_class)},
        {"blobs.radius", number(cfg.blobs.radius)},
        {"blobs.stddev", number(cfg.blobs.stddev)},
        {"idx.train_images", text(cfg.idx.train_images)},
        {"idx.train_labels", text(cfg.idx.train_labels)},
        {"idx.test_images", text(cfg.idx.test_images)},
        {"idx.test_labels", text(cfg.idx.test_labels)},
        {"partition.alpha", number(cfg.alpha)},
        {"model.hidden", size_list(cfg.hidden)},
        {"federation.rounds", number(r.rounds)},
        {"federation.clients", number(r.clients)},
        {"federation.participation", number(r.participation)},
        {"federation.trajectory_rounds", number(r.trajectory_rounds)},
        {"federation.aggregation", enumeration(r.aggregation, parse_aggregation_mode)},
        {"federation.mu_prox", number(r.mu_prox)},
        {"federation.track_client_losses", boolean(r.track_client_losses)},
        {"local.epochs", number(r.local.epochs)},
        {"local.batch_size", number(r.local.batch_size)},
        {"local.optimizer", enumeration(r.local.optimizer.kind, parse_optimizer_kind)},
        {"local.lr", number(r.local.optimizer.lr)},
        {"synth.s", number(r.synth.s)},
        {"synth.s_prime", number(r.synth.s_prime)},
        {"synth.N", number(r.synth.N)},
        {"synth.n", number(r.synth.n)},
        {"synth.eta_outer", number(r.synth.eta_outer)},
        {"synth.eta_inner", number(r.synth.eta_inner)},
        {"synth.target_avg_count", number(r.synth.target_avg_count)},
        {"synth.metric", enumeration(r.synth.metric, parse_metric_kind)},
        {"finetune.steps", number(r.finetune.steps)},
        {"finetune.lr", number(r.finetune.lr)},
        {"finetune.optimizer", enumeration(r.finetune.optimizer, parse_optimizer_kind)},
        {"theory.task", enumeration(t.task, parse_convex_kind)},
        {"quadratic.dim", number(t.quadratic.dim)},
        {"quadratic.clients", number(t.quadratic.clients)},
        {"quadratic.mu", number(t.quadratic.mu)},
        {"quadratic.condition", number(t.quadratic.condition)},
        {"quadratic.heterogeneity", number(t.quadratic.heterogeneity)},
        {"quadratic.noise_std", number(t.quadratic.noise_std)},
        {"quadratic.bias_norm", number(t.quadratic.bias_norm)},
        {"logistic.dim", number(t.logistic.dim)},
        {"logistic.clients", number(t.logistic.clients)},
        {"logistic.samples_per_client", number(t.logistic.samples_per_client)},
        {"logistic.reg", number(t.logistic.reg)},
        {"logistic.heterogeneity", number(t.logistic.heterogeneity)},
        {"logistic.syn_fraction", number(t.logistic.syn_fraction)},
        {"theory.c", number(t.schedule.c)},
        {"theory.gamma", number(t.schedule.gamma)},
        {"theory.tau1", number(t.schedule.tau1)},
        {"theory.tau2", number(t.schedule.tau2)},
        {"theory.T", number(t.T)},
        {"theory.seeds", number(t.seeds)},
        {"theory.stochastic", boolean(t.stochastic)},
        {"theory.probes", number(t.probes)},
        {"theory.draws", number(t.draws)},
        {"theory.slope_window", number(t.slope_window)},
    };
}

/// Parses INI-style text: `[section]` headers, `key = value` lines, `;` comments.
/// Unknown sections or keys, keys outside a section and duplicates are errors.
/// Keys not given keep their defaults; the result is validated.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig cfg;
    auto schema = config_schema(cfg);
    // Empty sections never reach the tree, so headers are checked on the raw text.
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        line = config_detail::trim(line);
        if (line.size() < 2 || line.front() != '[' || line.back() != ']') continue;
        const std::string name = line.substr(1, line.size() - 2) + ".";
        bool known = false;
        for (const auto& entry : schema) known = known || entry.first.rfind(name, 0) == 0;
        if (!known) throw ConfigError(source + ": unknown config section [" + name.substr(0, name.size() - 1) + "]");
    }
    for (const auto& [section, node] : tree) {
        if (node.empty() && !node.data().empty()) {
            throw ConfigError(source + ": key '" + section + "' is outside any [section]");
        }
        for (const auto& [key, leaf] : node) {
            const std::string full = section + "." + key;
            const auto it = schema.find(full);
            if (it == schema.end()) throw ConfigError(source + ": unknown config key '" + full + "'");
            it->second.set(full, leaf.data());
        }
    }
    cfg.run.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

inline void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.run.seed = seed;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

/// Every key with its current value, in the format parse_config reads.
inline std::string dump_config(ExperimentConfig cfg) {
    std::string out, section;
    for (const auto& [full, entry] : config_schema(cfg)) {
        const auto dot = full.find('.');
        const std::string s = full.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "[" : "\n[") + s + "]\n";
            section = s;
        }
        out += full.substr(dot + 1) + " = " + entry.get() + "\n";
    }
    return out;
}

}  // namespace dynafed
