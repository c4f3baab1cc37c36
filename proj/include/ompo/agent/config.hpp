#pragma once

#include "ompo/agent/buffers.hpp"
#include "ompo/agent/conjugate.hpp"
#include "ompo/nn/mlp.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::agent {

enum class Ablation { none, no_discriminator, raw_reward };

inline std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_discriminator: return "no_discriminator";
        case Ablation::raw_reward: return "raw_reward";
    }
    return "?";
}

inline Ablation ablation_from_string(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "no_discriminator" || s == "no-discriminator") return Ablation::no_discriminator;
    if (s == "raw_reward" || s == "raw-reward") return Ablation::raw_reward;
    throw std::invalid_argument("unknown ablation '" + s + "'");
}

/// What the actor ascends.
///   derivative: (1-gamma) E[Q(s0, a0)] + alpha E[f*'(psi / alpha)]
///   dual:       (1-gamma) E[Q(s0, a0)] + alpha E[f*(psi / alpha)]
enum class ActorObjective { derivative, dual };

inline std::string to_string(ActorObjective o) { return o == ActorObjective::dual ? "dual" : "derivative"; }

inline ActorObjective actor_objective_from_string(const std::string& s) {
    if (s == "derivative") return ActorObjective::derivative;
    if (s == "dual") return ActorObjective::dual;
    throw std::invalid_argument("unknown actor objective '" + s + "'");
}

/// Arithmetic precision of the critic/actor updates. Parameters, Adam state and
/// gradients are always stored in double.
enum class Precision { single, double_ };

inline std::string to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

inline Precision precision_from_string(const std::string& s) {
    if (s == "single" || s == "float") return Precision::single;
    if (s == "double") return Precision::double_;
    throw std::invalid_argument("unknown precision '" + s + "'");
}

struct AgentConfig {
    double gamma = 0.99;
    double alpha = 0.001;
    double q_order = 1.5;
    std::size_t batch = 256;
    std::size_t initial_batch = 256;
    double critic_lr = 3e-4;
    double actor_lr = 1e-4;
    double discriminator_lr = 3e-4;
    std::size_t critic_steps_per_actor_step = 5;
    std::size_t updates_per_refresh = 150;
    std::size_t discriminator_steps = 0;  // 0 selects ceil(|D_L| / batch) * 4
    std::size_t local_capacity = kLocalCapacity;
    std::size_t global_capacity = kGlobalCapacity;
    std::vector<std::size_t> critic_hidden{256, 256};
    std::vector<std::size_t> actor_hidden{256, 256};
    std::vector<std::size_t> discriminator_hidden{256, 256};
    nn::Activation critic_activation = nn::Activation::elu;
    nn::Activation actor_activation = nn::Activation::elu;
    nn::Activation discriminator_activation = nn::Activation::tanh;
    ActorObjective actor_objective = ActorObjective::derivative;
    ConjugateExtension conjugate_extension = ConjugateExtension::symmetric;
    Ablation ablation = Ablation::none;
    Precision precision = Precision::single;

    /// 1/p + 1/q = 1.
    double p_order() const { return q_order / (q_order - 1.0); }

    std::size_t resolved_discriminator_steps() const {
        if (discriminator_steps > 0) return discriminator_steps;
        return ((local_capacity + batch - 1) / batch) * 4;
    }

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("AgentConfig: gamma must lie in (0,1)");
        if (!(alpha > 0.0)) throw std::invalid_argument("AgentConfig: alpha must be > 0");
        if (!(q_order > 1.0)) throw std::invalid_argument("AgentConfig: q_order must be > 1");
        if (batch == 0 || initial_batch == 0) throw std::invalid_argument("AgentConfig: batch sizes must be > 0");
        if (!(critic_lr > 0.0 && actor_lr > 0.0 && discriminator_lr > 0.0))
            throw std::invalid_argument("AgentConfig: learning rates must be > 0");
        if (critic_steps_per_actor_step == 0)
            throw std::invalid_argument("AgentConfig: critic_steps_per_actor_step must be > 0");
        if (local_capacity == 0 || global_capacity < local_capacity)
            throw std::invalid_argument("AgentConfig: need 0 < local_capacity <= global_capacity");
        for (const auto* h : {&critic_hidden, &actor_hidden, &discriminator_hidden}) {
            if (h->empty()) throw std::invalid_argument("AgentConfig: hidden layer list must be non-empty");
            for (auto w : *h)
                if (w == 0) throw std::invalid_argument("AgentConfig: hidden widths must be > 0");
        }
    }

    bool operator==(const AgentConfig&) const = default;
};

}  // namespace ompo::agent
