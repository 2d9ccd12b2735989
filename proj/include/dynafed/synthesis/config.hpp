#pragma once

#include <cstddef>
#include <string>

#include "dynafed/errors.hpp"
#include "dynafed/model/distance.hpp"

namespace dynafed {

struct SynthConfig {
    int s = 5;                   // segment span in rounds
    int s_prime = 10;            // inner unroll steps
    int N = 1000;                // outer iterations
    std::size_t n = 150;         // synthetic sample count
    double eta_outer = 5e-2;     // Adam lr on X and Ylogits
    double eta_inner = 1e-5;     // inner SGD lr
    int target_avg_count = 2;    // intermediate checkpoints averaged into the target
    MetricKind metric = MetricKind::NormalizedL2;

    /// Checks the config alone.
    void validate() const {
        if (s < 1) throw ConfigError("synthesis s must be at least 1");
        if (s_prime < 1) throw ConfigError("synthesis s_prime must be at least 1");
        if (N < 1) throw ConfigError("synthesis N must be at least 1");
        if (n < 1) throw ConfigError("synthetic size n must be at least 1");
        if (!(eta_outer > 0.0)) throw ConfigError("eta_outer must be positive");
        if (!(eta_inner > 0.0)) throw ConfigError("eta_inner must be positive");
        if (target_avg_count < 0 || target_avg_count > s - 1) {
            throw ConfigError("target_avg_count must lie in [0, s-1], got " + std::to_string(target_avg_count) +
                              " with s = " + std::to_string(s));
        }
    }

    /// Checks the config against a trajectory whose last checkpoint index is L.
    void validate(std::size_t L) const {
        validate();
        if (static_cast<std::size_t>(s) > L) {
            throw ConfigError("segment span s = " + std::to_string(s) + " exceeds trajectory length L = " +
                              std::to_string(L));
        }
    }
};

}  // namespace dynafed
