#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ompo {

/// One environment interaction (s, a, s', r, done).
struct TransitionRecord {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> next_state;
    double reward = 1.0;
    bool terminal = false;

    /// Rewards must be strictly positive because the learner consumes ln r.
    void validate() const {
        if (!(reward > 0.0) || !std::isfinite(reward))
            throw std::domain_error("TransitionRecord: reward must be finite and strictly positive");
        for (const auto* v : {&state, &action, &next_state})
            for (double x : *v)
                if (!std::isfinite(x)) throw std::domain_error("TransitionRecord: non-finite entry");
    }

    bool operator==(const TransitionRecord&) const = default;
};

/// Discriminator features [s; a; s'].
inline std::vector<double> transition_features(const TransitionRecord& r) {
    std::vector<double> f;
    f.reserve(r.state.size() + r.action.size() + r.next_state.size());
    f.insert(f.end(), r.state.begin(), r.state.end());
    f.insert(f.end(), r.action.begin(), r.action.end());
    f.insert(f.end(), r.next_state.begin(), r.next_state.end());
    return f;
}

}  // namespace ompo
