#pragma once

#include "ompo/nn/mlp.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ompo::nn {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double lr) : m(n, 0.0), v(n, 0.0), learning_rate(lr) {}

    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step (descent direction). A non-finite gradient
/// aborts before anything is modified.
inline void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size())
        throw std::invalid_argument("adam_step: length mismatch");
    if (!grad.all_finite()) throw std::domain_error("adam_step: non-finite gradient");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace ompo::nn
