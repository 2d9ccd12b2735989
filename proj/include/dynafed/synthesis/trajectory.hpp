#pragma once

#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/model/mlp.hpp"

namespace dynafed {

/// Global checkpoints w^0..w^L of a federated run; w^0 is the initialization.
struct Trajectory {
    std::vector<ParamVector> checkpoints;
    std::vector<int> rounds;

    std::size_t size() const noexcept { return checkpoints.size(); }
    /// L, the index of the last checkpoint.
    std::size_t last_index() const {
        if (checkpoints.empty()) throw ValidationError("empty trajectory");
        return checkpoints.size() - 1;
    }
    const MlpSpec& spec() const {
        if (checkpoints.empty()) throw ValidationError("empty trajectory");
        return checkpoints.front().spec();
    }
    const ParamVector& operator[](std::size_t i) const { return checkpoints.at(i); }

    void push_back(int round, ParamVector w) {
        if (!rounds.empty() && round <= rounds.back()) throw ValidationError("trajectory rounds must increase");
        if (!checkpoints.empty()) require_same_spec(checkpoints.front(), w);
        rounds.push_back(round);
        checkpoints.push_back(std::move(w));
    }

    void validate() const {
        if (checkpoints.empty()) throw ValidationError("empty trajectory");
        if (rounds.size() != checkpoints.size()) throw ValidationError("trajectory round count mismatch");
        for (std::size_t i = 1; i < checkpoints.size(); ++i) {
            if (rounds[i] <= rounds[i - 1]) throw ValidationError("trajectory rounds must increase");
            require_same_spec(checkpoints.front(), checkpoints[i]);
        }
    }
};

}  // namespace dynafed
