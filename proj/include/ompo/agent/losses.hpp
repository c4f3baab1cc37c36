#pragma once

// Critic and actor objectives of the conjugate-dual min-max problem:
//
//   L(Q, pi) = (1 - gamma) E_{s0 ~ D_0, a0 ~ pi}[Q(s0, a0)]
//            + alpha E_{(s,a,s') ~ D_G}[f*(psi(s,a,s') / alpha)]
//   psi = ln r - alpha R + gamma (1 - done) Q(s', a' ~ pi) - Q(s, a)
//
// The critic minimizes L. The actor ascends the objective selected by
// ActorObjective; the returned actor loss is its negation so that gradient
// descent performs the ascent. Both gradients are exact for fixed noise.

#include "ompo/agent/config.hpp"
#include "ompo/agent/conjugate.hpp"
#include "ompo/nn/gaussian_policy.hpp"
#include "ompo/nn/mlp.hpp"
#include "ompo/transition.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ompo::agent {

/// Read-only view of the critic and actor.
struct NetworkView {
    const nn::MlpSpec& critic_spec;
    const nn::ParamVector& critic;
    const nn::MlpSpec& actor_spec;
    const nn::ParamVector& actor;
};

/// Everything a loss evaluation consumes, with all randomness drawn up front.
struct LossBatch {
    nn::Matrix states;          // B x ds
    nn::Matrix actions;         // B x da
    nn::Matrix next_states;     // B x ds
    std::vector<double> reward_term;   // ln r (or r under the raw-reward ablation)
    std::vector<double> ratio;         // R = ln(rho_on-policy / rho_buffer)
    std::vector<double> continuation;  // 1 - terminal
    nn::Matrix next_noise;      // B x da, noise for a' ~ pi(s')
    nn::Matrix initial_states;  // N0 x ds
    nn::Matrix initial_noise;   // N0 x da

    std::size_t size() const { return static_cast<std::size_t>(states.rows()); }

    void validate() const {
        const auto b = states.rows();
        if (b == 0) throw std::invalid_argument("LossBatch: empty batch");
        if (initial_states.rows() == 0) throw std::invalid_argument("LossBatch: empty initial-state batch");
        if (actions.rows() != b || next_states.rows() != b || next_noise.rows() != b ||
            reward_term.size() != static_cast<std::size_t>(b) || ratio.size() != static_cast<std::size_t>(b) ||
            continuation.size() != static_cast<std::size_t>(b))
            throw std::invalid_argument("LossBatch: inconsistent batch sizes");
        if (initial_noise.rows() != initial_states.rows()) throw std::invalid_argument("LossBatch: initial noise size");
    }
};

/// ln r, or r itself under the raw-reward ablation.
inline double reward_term(double reward, Ablation ablation) {
    if (!(reward > 0.0)) throw std::domain_error("reward must be strictly positive");
    return ablation == Ablation::raw_reward ? reward : std::log(reward);
}

struct LossResult {
    double loss = 0.0;
    nn::ParamVector grad;
    std::vector<double> psi;
};

namespace detail {

template <class S>
nn::MatrixT<S> concat_columns(const nn::MatrixT<S>& a, const nn::MatrixT<S>& b) {
    nn::MatrixT<S> out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

/// Critic evaluation on the stacked input [s0, a0; s', a'; s, a].
template <class S>
struct StackedCritic {
    nn::MatrixT<S> input;
    nn::BasicMlpCache<S> cache;
    nn::MatrixT<S> q;
    Eigen::Index n0 = 0;
    Eigen::Index b = 0;

    double q_init(Eigen::Index i) const { return q(i, 0); }
    double q_next(Eigen::Index j) const { return q(n0 + j, 0); }
    double q_now(Eigen::Index j) const { return q(n0 + b + j, 0); }
};

template <class S>
struct PolicyActions {
    nn::BasicMlpCache<S> init_cache, next_cache;
    nn::BasicBatchSample<S> init, next;
};

template <class S>
PolicyActions<S> sample_policy_actions(const LossBatch& batch, const NetworkView& nets) {
    PolicyActions<S> out;
    const nn::MatrixT<S> s0 = batch.initial_states.cast<S>();
    const nn::MatrixT<S> s1 = batch.next_states.cast<S>();
    const nn::MatrixT<S> raw0 = nn::mlp_forward<S>(nets.actor_spec, nets.actor, s0, &out.init_cache);
    const nn::MatrixT<S> raw1 = nn::mlp_forward<S>(nets.actor_spec, nets.actor, s1, &out.next_cache);
    out.init = nn::sample_batch<S>(raw0, batch.initial_noise.cast<S>());
    out.next = nn::sample_batch<S>(raw1, batch.next_noise.cast<S>());
    return out;
}

template <class S>
StackedCritic<S> evaluate_critic(const LossBatch& batch, const NetworkView& nets, const PolicyActions<S>& pa) {
    StackedCritic<S> c;
    c.n0 = batch.initial_states.rows();
    c.b = batch.states.rows();
    const auto ds = batch.states.cols();
    const auto da = batch.actions.cols();
    c.input.resize(c.n0 + 2 * c.b, ds + da);
    c.input.topRows(c.n0).leftCols(ds) = batch.initial_states.cast<S>();
    c.input.topRows(c.n0).rightCols(da) = pa.init.action;
    c.input.middleRows(c.n0, c.b).leftCols(ds) = batch.next_states.cast<S>();
    c.input.middleRows(c.n0, c.b).rightCols(da) = pa.next.action;
    c.input.bottomRows(c.b).leftCols(ds) = batch.states.cast<S>();
    c.input.bottomRows(c.b).rightCols(da) = batch.actions.cast<S>();
    c.q = nn::mlp_forward<S>(nets.critic_spec, nets.critic, c.input, &c.cache);
    return c;
}

template <class S>
std::vector<double> residuals(const LossBatch& batch, const StackedCritic<S>& c, const AgentConfig& cfg) {
    std::vector<double> psi(static_cast<std::size_t>(c.b));
    for (Eigen::Index j = 0; j < c.b; ++j) {
        const auto k = static_cast<std::size_t>(j);
        psi[k] = batch.reward_term[k] - cfg.alpha * batch.ratio[k] +
                 cfg.gamma * batch.continuation[k] * c.q_next(j) - c.q_now(j);
    }
    return psi;
}

}  // namespace detail

/// psi for a single record with a single-sample backup a' = tanh(mean(s') + std(s') noise).
inline double residual_psi(const TransitionRecord& record, double ratio, const NetworkView& nets,
                           const AgentConfig& cfg, std::span<const double> noise) {
    const double rt = reward_term(record.reward, cfg.ablation);
    std::vector<double> sa = record.state;
    sa.insert(sa.end(), record.action.begin(), record.action.end());
    const double q_now = nn::mlp_forward(nets.critic_spec, nets.critic, sa)[0];
    double bootstrap = 0.0;
    if (!record.terminal) {
        const auto raw = nn::mlp_forward(nets.actor_spec, nets.actor, record.next_state);
        const auto next_action = nn::policy_sample(nn::gaussian_head(raw), noise).action;
        std::vector<double> sa2 = record.next_state;
        sa2.insert(sa2.end(), next_action.begin(), next_action.end());
        bootstrap = nn::mlp_forward(nets.critic_spec, nets.critic, sa2)[0];
    }
    return rt - cfg.alpha * ratio + cfg.gamma * bootstrap - q_now;
}

/// Critic loss and its gradient with respect to the critic parameters only.
/// S is the arithmetic precision; parameters and gradients stay double.
template <class S = double>
LossResult critic_loss_and_grad(const LossBatch& batch, const NetworkView& nets, const AgentConfig& cfg) {
    batch.validate();
    const auto pa = detail::sample_policy_actions<S>(batch, nets);
    const auto c = detail::evaluate_critic<S>(batch, nets, pa);
    LossResult out;
    out.psi = detail::residuals(batch, c, cfg);

    const double w0 = (1.0 - cfg.gamma) / static_cast<double>(c.n0);
    const double wb = 1.0 / static_cast<double>(c.b);
    nn::MatrixT<S> dq(c.q.rows(), 1);
    double init_term = 0.0, conj_term = 0.0;
    for (Eigen::Index i = 0; i < c.n0; ++i) {
        init_term += c.q_init(i);
        dq(i, 0) = static_cast<S>(w0);
    }
    for (Eigen::Index j = 0; j < c.b; ++j) {
        const auto k = static_cast<std::size_t>(j);
        const double x = out.psi[k] / cfg.alpha;
        conj_term += fenchel_star(x, cfg.q_order, cfg.conjugate_extension);
        const double slope = fenchel_star_deriv(x, cfg.q_order, cfg.conjugate_extension);  // d(alpha f*(psi/alpha))/d psi
        dq(c.n0 + j, 0) = static_cast<S>(wb * slope * cfg.gamma * batch.continuation[k]);
        dq(c.n0 + c.b + j, 0) = static_cast<S>(-wb * slope);
    }
    out.loss = w0 * init_term + cfg.alpha * wb * conj_term;
    if (!std::isfinite(out.loss)) throw std::domain_error("critic loss is not finite");
    out.grad = nn::mlp_backward<S>(nets.critic_spec, nets.critic, c.cache, dq).params;
    return out;
}

/// Actor loss (negated ascent objective) and its gradient with respect to the
/// actor parameters, through the reparameterized initial and next actions.
template <class S = double>
LossResult actor_loss_and_grad(const LossBatch& batch, const NetworkView& nets, const AgentConfig& cfg) {
    batch.validate();
    const auto pa = detail::sample_policy_actions<S>(batch, nets);
    const auto c = detail::evaluate_critic<S>(batch, nets, pa);
    LossResult out;
    out.psi = detail::residuals(batch, c, cfg);

    const double w0 = (1.0 - cfg.gamma) / static_cast<double>(c.n0);
    const double wb = 1.0 / static_cast<double>(c.b);
    nn::MatrixT<S> dq = nn::MatrixT<S>::Zero(c.q.rows(), 1);
    double init_term = 0.0, conj_term = 0.0;
    for (Eigen::Index i = 0; i < c.n0; ++i) {
        init_term += c.q_init(i);
        dq(i, 0) = static_cast<S>(-w0);
    }
    for (Eigen::Index j = 0; j < c.b; ++j) {
        const auto k = static_cast<std::size_t>(j);
        const double x = out.psi[k] / cfg.alpha;
        double slope;
        if (cfg.actor_objective == ActorObjective::derivative) {
            conj_term += fenchel_star_deriv(x, cfg.q_order, cfg.conjugate_extension);
            slope = fenchel_star_second_deriv(x, cfg.q_order, cfg.conjugate_extension);  // d(alpha f*'(psi/alpha))/d psi
        } else {
            conj_term += fenchel_star(x, cfg.q_order, cfg.conjugate_extension);
            slope = fenchel_star_deriv(x, cfg.q_order, cfg.conjugate_extension);
        }
        dq(c.n0 + j, 0) = static_cast<S>(-wb * slope * cfg.gamma * batch.continuation[k]);
    }
    out.loss = -(w0 * init_term + cfg.alpha * wb * conj_term);
    if (!std::isfinite(out.loss)) throw std::domain_error("actor loss is not finite");

    // Critic frozen: only the input gradient is needed.
    const auto back = nn::mlp_backward<S>(nets.critic_spec, nets.critic, c.cache, dq, false);
    const auto da = batch.actions.cols();
    const nn::MatrixT<S> d_a0 = back.input.topRows(c.n0).rightCols(da);
    const nn::MatrixT<S> d_a1 = back.input.middleRows(c.n0, c.b).rightCols(da);

    nn::ParamVector grad(nets.actor.size());
    const auto g0 = nn::mlp_backward<S>(nets.actor_spec, nets.actor, pa.init_cache, nn::sample_batch_backward<S>(pa.init, d_a0));
    const auto g1 = nn::mlp_backward<S>(nets.actor_spec, nets.actor, pa.next_cache, nn::sample_batch_backward<S>(pa.next, d_a1));
    grad.map() = g0.params.map() + g1.params.map();
    out.grad = std::move(grad);
    return out;
}

}  // namespace ompo::agent
