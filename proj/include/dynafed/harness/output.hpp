#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "dynafed/orchestration/runner.hpp"
#include "dynafed/synthesis/datasyn.hpp"

namespace dynafed {

inline constexpr const char* kMetricsHeader = "round,phase,test_loss,test_acc,pre_ft_acc,post_ft_acc,wall_ms";

/// Shortest round-tripping decimal form.
inline std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

inline void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics) {
    out << kMetricsHeader << '\n';
    for (const auto& m : metrics) {
        out << m.round << ',' << m.phase << ',' << csv_number(m.test_loss) << ',' << csv_number(m.test_acc) << ','
            << csv_number(m.pre_ft_acc) << ',' << csv_number(m.post_ft_acc) << ',' << csv_number(m.wall_ms) << '\n';
    }
}

/// Mean per-client training loss before and after finetuning, for rounds that track them.
inline void write_client_loss_csv(std::ostream& out, std::span<const RoundMetrics> metrics) {
    out << "round,phase,pre_ft_client_loss,client_loss\n";
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    for (const auto& m : metrics) {
        if (m.client_losses.empty()) continue;
        out << m.round << ',' << m.phase << ',' << csv_number(mean(m.pre_ft_client_losses)) << ','
            << csv_number(mean(m.client_losses)) << '\n';
    }
}

inline void write_synth_log_csv(std::ostream& out, std::span<const SynthLogEntry> log) {
    out << "iteration,segment_t,loss\n";
    for (const auto& e : log) out << e.iteration << ',' << e.segment_t << ',' << csv_number(e.loss) << '\n';
}

inline void write_fidelity_csv(std::ostream& out, std::span<const FidelityRow> rows) {
    out << "name,segment_t,distance\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.segments.size(); ++i)
            out << r.name << ',' << r.segments[i] << ',' << csv_number(r.distances[i]) << '\n';
}

inline void write_theory_csv(std::ostream& out, std::span<const double> mean, std::span<const double> stddev) {
    out << "step,mean,std\n";
    for (std::size_t t = 0; t < mean.size(); ++t)
        out << t + 1 << ',' << csv_number(mean[t]) << ',' << csv_number(stddev[t]) << '\n';
}

}  // namespace dynafed
