#pragma once

// Exact occupancy distributions over small tabular MDPs.
//
// Index conventions: state-action pairs are flattened as s * n_actions + a and
// triples as (s * n_actions + a) * n_states + s'.

#include "ompo/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::oracle {

inline constexpr std::size_t kMaxStateActions = 4096;

struct TabularMDP {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transition;  // [s][a][s'], rows over s' sum to 1
    std::vector<double> reward;      // [s][a], strictly positive
    std::vector<double> mu0;         // [s]
    double gamma = 0.99;

    std::size_t sa(std::size_t s, std::size_t a) const { return s * n_actions + a; }
    std::size_t sas(std::size_t s, std::size_t a, std::size_t s2) const {
        return sa(s, a) * n_states + s2;
    }
    double T(std::size_t s, std::size_t a, std::size_t s2) const { return transition[sas(s, a, s2)]; }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const {
        if (n_states == 0 || n_actions == 0) throw std::invalid_argument("TabularMDP: empty state or action set");
        if (n_states * n_actions > kMaxStateActions)
            throw std::invalid_argument("TabularMDP: |S||A| exceeds " + std::to_string(kMaxStateActions));
        if (transition.size() != n_states * n_actions * n_states)
            throw std::invalid_argument("TabularMDP: transition has wrong size");
        if (reward.size() != n_states * n_actions) throw std::invalid_argument("TabularMDP: reward has wrong size");
        if (mu0.size() != n_states) throw std::invalid_argument("TabularMDP: mu0 has wrong size");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma outside (0,1)");
        for (std::size_t i = 0; i < n_states * n_actions; ++i) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                double p = transition[i * n_states + s2];
                if (!(p >= 0.0)) throw std::invalid_argument("TabularMDP: negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
            if (!(reward[i] > 0.0)) throw std::invalid_argument("TabularMDP: rewards must be strictly positive");
        }
        double m = 0.0;
        for (double p : mu0) {
            if (!(p >= 0.0)) throw std::invalid_argument("TabularMDP: negative mu0 entry");
            m += p;
        }
        if (std::abs(m - 1.0) > 1e-12) throw std::invalid_argument("TabularMDP: mu0 does not sum to 1");
    }
};

struct PolicyTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;  // [s][a]

    double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }

    void validate() const {
        if (probs.size() != n_states * n_actions) throw std::invalid_argument("PolicyTable: wrong size");
        for (std::size_t s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (std::size_t a = 0; a < n_actions; ++a) {
                double p = probs[s * n_actions + a];
                if (!(p >= 0.0)) throw std::invalid_argument("PolicyTable: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("PolicyTable: row does not sum to 1");
        }
    }

    static PolicyTable uniform(std::size_t n_states, std::size_t n_actions) {
        return {n_states, n_actions,
                std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions))};
    }
};

/// Normalized discounted occupancy over (s,a) and (s,a,s').
struct OccupancyTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> rho_sa;
    std::vector<double> rho_sas;

    double total_mass() const {
        double m = 0.0;
        for (double v : rho_sa) m += v;
        return m;
    }

    /// max over (s,a) of |sum_{s'} rho_sas - rho_sa|.
    double marginal_defect() const {
        double worst = 0.0;
        for (std::size_t i = 0; i < rho_sa.size(); ++i) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) sum += rho_sas[i * n_states + s2];
            worst = std::max(worst, std::abs(sum - rho_sa[i]));
        }
        return worst;
    }
};

inline void check_shapes(const TabularMDP& mdp, const PolicyTable& policy) {
    if (mdp.n_states != policy.n_states || mdp.n_actions != policy.n_actions)
        throw std::invalid_argument("MDP and policy dimensions disagree");
}

inline void check_shapes(const TabularMDP& mdp, const OccupancyTable& occ) {
    if (mdp.n_states != occ.n_states || mdp.n_actions != occ.n_actions ||
        occ.rho_sa.size() != mdp.n_states * mdp.n_actions ||
        occ.rho_sas.size() != mdp.n_states * mdp.n_actions * mdp.n_states)
        throw std::invalid_argument("MDP and occupancy dimensions disagree");
}

/// rho_sas(s,a,s') = rho_sa(s,a) T(s'|s,a).
inline void fill_transition_occupancy(const TabularMDP& mdp, OccupancyTable& occ) {
    occ.rho_sas.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    for (std::size_t i = 0; i < mdp.n_states * mdp.n_actions; ++i)
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
            occ.rho_sas[i * mdp.n_states + s2] = occ.rho_sa[i] * mdp.transition[i * mdp.n_states + s2];
}

/// Solves the Bellman flow fixed point
///   rho(s,a) = (1-gamma) mu0(s) pi(a|s) + gamma pi(a|s) sum_{s^,a^} rho(s^,a^) T(s|s^,a^)
/// with a dense LU factorization.
inline OccupancyTable solve_state_action_occupancy(const TabularMDP& mdp, const PolicyTable& policy) {
    check_shapes(mdp, policy);
    mdp.validate();
    policy.validate();
    const std::size_t nS = mdp.n_states, nA = mdp.n_actions, n = nS * nA;

    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (std::size_t s = 0; s < nS; ++s) {
        for (std::size_t a = 0; a < nA; ++a) {
            const auto row = static_cast<Eigen::Index>(mdp.sa(s, a));
            rhs(row) = (1.0 - mdp.gamma) * mdp.mu0[s] * policy(s, a);
            for (std::size_t sp = 0; sp < nS; ++sp)
                for (std::size_t ap = 0; ap < nA; ++ap)
                    system(row, static_cast<Eigen::Index>(mdp.sa(sp, ap))) -=
                        mdp.gamma * policy(s, a) * mdp.T(sp, ap, s);
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    if (std::abs(lu.determinant()) < 1e-300) throw std::logic_error("occupancy system is singular");
    Eigen::VectorXd rho = lu.solve(rhs);

    OccupancyTable occ{nS, nA, std::vector<double>(rho.data(), rho.data() + n), {}};
    fill_transition_occupancy(mdp, occ);
    return occ;
}

/// Unbiased sampled occupancy: each sample rolls out from mu0 and stops after
/// every step with probability 1-gamma, recording the final (s,a,s').
inline OccupancyTable monte_carlo_occupancy(const TabularMDP& mdp, const PolicyTable& policy,
                                            std::size_t n_samples, std::uint64_t seed) {
    check_shapes(mdp, policy);
    mdp.validate();
    policy.validate();
    if (n_samples == 0) throw std::invalid_argument("monte_carlo_occupancy: n_samples must be >= 1");
    const std::size_t nS = mdp.n_states, nA = mdp.n_actions;
    Rng rng(seed);
    std::vector<std::size_t> counts(nS * nA * nS, 0);
    for (std::size_t k = 0; k < n_samples; ++k) {
        std::size_t s = rng.categorical(mdp.mu0);
        for (;;) {
            std::size_t a = rng.categorical({policy.probs.data() + s * nA, nA});
            std::size_t s2 = rng.categorical({mdp.transition.data() + mdp.sa(s, a) * nS, nS});
            if (rng.uniform() >= mdp.gamma) {
                ++counts[mdp.sas(s, a, s2)];
                break;
            }
            s = s2;
        }
    }
    OccupancyTable occ{nS, nA, std::vector<double>(nS * nA, 0.0), std::vector<double>(nS * nA * nS, 0.0)};
    const double inv = 1.0 / static_cast<double>(n_samples);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        occ.rho_sas[i] = static_cast<double>(counts[i]) * inv;
        occ.rho_sa[i / nS] += occ.rho_sas[i];
    }
    return occ;
}

/// max over (s,a) of |rho(s,a) - (1-gamma) mu0(s) pi(a|s) - gamma pi(a|s) sum_{s^,a^} rho(s^,a^,s)|.
inline double bellman_flow_residual(const TabularMDP& mdp, const PolicyTable& policy, const OccupancyTable& occ) {
    check_shapes(mdp, policy);
    check_shapes(mdp, occ);
    const std::size_t nS = mdp.n_states, nA = mdp.n_actions;
    std::vector<double> inflow(nS, 0.0);
    for (std::size_t i = 0; i < nS * nA; ++i)
        for (std::size_t s2 = 0; s2 < nS; ++s2) inflow[s2] += occ.rho_sas[i * nS + s2];
    double worst = 0.0;
    for (std::size_t s = 0; s < nS; ++s)
        for (std::size_t a = 0; a < nA; ++a) {
            double r = occ.rho_sa[mdp.sa(s, a)] - (1.0 - mdp.gamma) * mdp.mu0[s] * policy(s, a) -
                       mdp.gamma * policy(s, a) * inflow[s];
            worst = std::max(worst, std::abs(r));
        }
    return worst;
}

/// (1-gamma) E_{mu0,pi}[Q] + E_{rho(s,a,s')}[gamma V_Q(s') - Q(s,a)], V_Q(s') = sum_a' pi(a'|s') Q(s',a').
/// Vanishes for every Q exactly when occ satisfies the Bellman flow constraint.
inline double lagrangian_annihilation(const TabularMDP& mdp, const PolicyTable& policy, const OccupancyTable& occ,
                                      const std::vector<double>& q_values) {
    check_shapes(mdp, policy);
    check_shapes(mdp, occ);
    const std::size_t nS = mdp.n_states, nA = mdp.n_actions;
    if (q_values.size() != nS * nA) throw std::invalid_argument("lagrangian_annihilation: Q has wrong size");
    std::vector<double> v(nS, 0.0);
    for (std::size_t s = 0; s < nS; ++s)
        for (std::size_t a = 0; a < nA; ++a) v[s] += policy(s, a) * q_values[mdp.sa(s, a)];
    double initial = 0.0;
    for (std::size_t s = 0; s < nS; ++s) initial += mdp.mu0[s] * v[s];
    double flow = 0.0;
    for (std::size_t i = 0; i < nS * nA; ++i)
        for (std::size_t s2 = 0; s2 < nS; ++s2)
            flow += occ.rho_sas[i * nS + s2] * (mdp.gamma * v[s2] - q_values[i]);
    return (1.0 - mdp.gamma) * initial + flow;
}

/// Random MDP fixture: Dirichlet(1) transition rows, rewards in [0.1, 1], Dirichlet(1) mu0.
inline TabularMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
    auto simplex = [&rng](std::size_t n) {
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& x : p) {
            x = -std::log(1.0 - rng.uniform());
            sum += x;
        }
        for (auto& x : p) x /= sum;
        return p;
    };
    TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    for (std::size_t i = 0; i < n_states * n_actions; ++i) {
        auto row = simplex(n_states);
        mdp.transition.insert(mdp.transition.end(), row.begin(), row.end());
        mdp.reward.push_back(rng.uniform(0.1, 1.0));
    }
    mdp.mu0 = simplex(n_states);
    return mdp;
}

inline PolicyTable random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
    PolicyTable pi{n_states, n_actions, std::vector<double>(n_states * n_actions)};
    for (std::size_t s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) sum += (pi.probs[s * n_actions + a] = 0.05 + rng.uniform());
        for (std::size_t a = 0; a < n_actions; ++a) pi.probs[s * n_actions + a] /= sum;
    }
    return pi;
}

}  // namespace ompo::oracle
