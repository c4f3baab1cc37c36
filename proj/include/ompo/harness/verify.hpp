#pragma once

// Self-check suite behind `ompo verify`: tabular occupancy identities,
// conjugate-pair consistency and finite-difference gradient checks.

#include "ompo/agent/conjugate.hpp"
#include "ompo/agent/losses.hpp"
#include "ompo/nn/gaussian_policy.hpp"
#include "ompo/nn/mlp.hpp"
#include "ompo/oracle/divergence.hpp"
#include "ompo/oracle/tabular.hpp"
#include "ompo/random.hpp"
#include "ompo/ratio/discriminator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace ompo::harness {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Worst relative error between analytic partials and central differences at
/// `n_coords` random coordinates. `loss` reads the current contents of `params`.
inline double coordinate_gradient_check(nn::ParamVector& params, const nn::ParamVector& analytic,
                                        const std::function<double()>& loss, std::size_t n_coords, Rng& rng,
                                        double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t k = 0; k < n_coords; ++k) {
        const std::size_t i = rng.index(params.size());
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss();
        params[i] = keep - h;
        const double down = loss();
        params[i] = keep;
        worst = std::max(worst, relative_error((up - down) / (2.0 * h), analytic[i]));
    }
    return worst;
}

/// Random loss batch with strictly positive rewards and some terminal records.
inline agent::LossBatch random_loss_batch(std::size_t ds, std::size_t da, std::size_t b, std::size_t n0, Rng& rng) {
    const auto B = static_cast<Eigen::Index>(b), N0 = static_cast<Eigen::Index>(n0);
    const auto DS = static_cast<Eigen::Index>(ds), DA = static_cast<Eigen::Index>(da);
    auto normal = [&](Eigen::Index r, Eigen::Index c) {
        nn::Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
        return m;
    };
    agent::LossBatch batch;
    batch.states = normal(B, DS);
    batch.actions.resize(B, DA);
    for (Eigen::Index i = 0; i < batch.actions.size(); ++i) batch.actions.data()[i] = rng.uniform(-0.95, 0.95);
    batch.next_states = normal(B, DS);
    for (std::size_t i = 0; i < b; ++i) {
        batch.reward_term.push_back(std::log(rng.uniform(0.01, 1.0)));
        batch.ratio.push_back(rng.uniform(-2.0, 2.0));
        batch.continuation.push_back(i % 7 == 3 ? 0.0 : 1.0);
    }
    batch.next_noise = normal(B, DA);
    batch.initial_states = normal(N0, DS);
    batch.initial_noise = normal(N0, DA);
    return batch;
}

namespace detail {

inline std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

template <class F>
CheckResult timed(std::string name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{std::move(name), false, {}, 0.0};
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace detail

inline std::vector<CheckResult> run_verify_suite(std::uint64_t seed = 2024) {
    using detail::sci;
    using detail::timed;
    std::vector<CheckResult> out;
    Rng rng(seed);
    const double gammas[] = {0.5, 0.9, 0.99};

    out.push_back(timed("occupancy: Bellman flow residual on 50 random MDPs", [&](CheckResult& r) {
        double worst = 0.0, worst_marginal = 0.0, worst_mass = 0.0;
        for (int k = 0; k < 50; ++k) {
            const auto mdp = oracle::random_mdp(1 + rng.index(10), 1 + rng.index(4), gammas[k % 3], rng);
            const auto pi = oracle::random_policy(mdp.n_states, mdp.n_actions, rng);
            const auto occ = oracle::solve_state_action_occupancy(mdp, pi);
            worst = std::max(worst, oracle::bellman_flow_residual(mdp, pi, occ));
            worst_marginal = std::max(worst_marginal, occ.marginal_defect());
            worst_mass = std::max(worst_mass, std::abs(occ.total_mass() - 1.0));
        }
        r.passed = worst < 1e-10 && worst_marginal < 1e-12 && worst_mass < 1e-9;
        r.detail = "max residual " + sci(worst) + ", marginal " + sci(worst_marginal) + ", mass " + sci(worst_mass);
    }));

    out.push_back(timed("occupancy: Monte-Carlo estimate at n=1e6", [&](CheckResult& r) {
        double worst = 0.0;
        for (int k = 0; k < 3; ++k) {
            const auto mdp = oracle::random_mdp(2 + rng.index(3), 2, gammas[k], rng);
            const auto pi = oracle::random_policy(mdp.n_states, mdp.n_actions, rng);
            const auto exact = oracle::solve_state_action_occupancy(mdp, pi);
            const auto mc = oracle::monte_carlo_occupancy(mdp, pi, 1'000'000, rng.split());
            double l1 = 0.0;
            for (std::size_t i = 0; i < exact.rho_sas.size(); ++i) l1 += std::abs(exact.rho_sas[i] - mc.rho_sas[i]);
            worst = std::max(worst, l1);
        }
        r.passed = worst < 0.02;
        r.detail = "max L1 " + sci(worst);
    }));

    out.push_back(timed("occupancy: Lagrangian annihilation, 100 Q tables x 10 MDPs", [&](CheckResult& r) {
        double worst = 0.0;
        std::size_t detected = 0;
        for (int m = 0; m < 10; ++m) {
            const auto mdp = oracle::random_mdp(2 + rng.index(8), 1 + rng.index(4), gammas[m % 3], rng);
            const auto pi = oracle::random_policy(mdp.n_states, mdp.n_actions, rng);
            const auto occ = oracle::solve_state_action_occupancy(mdp, pi);
            auto bad = occ;
            bad.rho_sa[0] += 0.01;
            for (auto& v : bad.rho_sa) v /= 1.01;
            oracle::fill_transition_occupancy(mdp, bad);
            double best_defect = 0.0;
            for (int k = 0; k < 100; ++k) {
                std::vector<double> q(mdp.n_states * mdp.n_actions);
                for (auto& v : q) v = rng.uniform(-10.0, 10.0);
                worst = std::max(worst, std::abs(oracle::lagrangian_annihilation(mdp, pi, occ, q)));
                best_defect = std::max(best_defect, std::abs(oracle::lagrangian_annihilation(mdp, pi, bad, q)));
            }
            if (best_defect > 1e-4) ++detected;
        }
        r.passed = worst < 1e-9 && detected == 10;
        r.detail = "max |value| " + sci(worst) + ", perturbations detected " + std::to_string(detected) + "/10";
    }));

    out.push_back(timed("divergence: decomposition identity and chi-square dominance", [&](CheckResult& r) {
        auto simplex = [&](std::size_t n) {
            std::vector<double> p(n);
            double s = 0.0;
            for (auto& x : p) s += (x = 1e-3 + rng.uniform());
            for (auto& x : p) x /= s;
            return p;
        };
        double worst = 0.0;
        std::size_t violations = 0;
        for (int k = 0; k < 1000; ++k) {
            const std::size_t n = 2 + rng.index(8);
            worst = std::max(worst, oracle::decomposition_identity_check(simplex(n), simplex(n), simplex(n)));
            oracle::CategoricalPair pair{simplex(n), simplex(n)};
            // renormalization leaves sums within a few ulps of 1
            if (oracle::f_divergence(pair, oracle::chi_square) < oracle::kl_divergence(pair)) ++violations;
        }
        r.passed = worst < 1e-12 && violations == 0;
        r.detail = "max identity defect " + sci(worst) + ", dominance violations " + std::to_string(violations);
    }));

    out.push_back(timed("divergence: chi-square variational optimum", [&](CheckResult& r) {
        const oracle::CategoricalPair pair{{0.5, 0.5}, {0.25, 0.75}};
        std::vector<std::vector<double>> grid;
        for (double a = -2.0; a <= 4.0; a += 0.25)
            for (double b = -2.0; b <= 4.0; b += 0.25) grid.push_back({a, b});
        const std::vector<double> y_star{oracle::chi_square_derivative(2.0), oracle::chi_square_derivative(2.0 / 3.0)};
        grid.push_back(y_star);
        const auto rep = oracle::fenchel_gap_check(pair, oracle::chi_square, oracle::chi_square_conjugate, grid);
        const double gap = std::abs(rep.sup_estimate - rep.closed_form);
        r.passed = gap < 1e-6 && std::abs(rep.closed_form - 1.0 / 3.0) < 1e-12;
        r.detail = "closed form " + sci(rep.closed_form) + ", gap " + sci(gap);
    }));

    out.push_back(timed("conjugate: closed form against grid supremum", [&](CheckResult& r) {
        const double q = 1.5, p = 3.0;
        double worst = 0.0;
        for (double x : {0.5, 1.0, 2.0, 5.0}) {
            double sup = -1e300;
            for (double y = 1.0; y <= 10.0; y += 1e-5) sup = std::max(sup, x * y - std::pow(y - 1.0, p) / p);
            worst = std::max(worst, std::abs(sup - agent::fenchel_star(x, q)));
        }
        r.passed = worst < 1e-3;
        r.detail = "max |sup - f*| " + sci(worst);
    }));

    out.push_back(timed("conjugate: derivative against central differences on (0, 50]", [&](CheckResult& r) {
        double worst = 0.0;
        for (auto ext : {agent::ConjugateExtension::symmetric, agent::ConjugateExtension::rectified})
            for (int k = 1; k <= 500; ++k) {
                const double x = 0.1 * k, h = 1e-6 * std::max(1.0, x);
                const double fd =
                    (agent::fenchel_star(x + h, 1.5, ext) - agent::fenchel_star(x - h, 1.5, ext)) / (2.0 * h);
                worst = std::max(worst, relative_error(fd, agent::fenchel_star_deriv(x, 1.5, ext)));
            }
        r.passed = worst < 1e-6;
        r.detail = "max rel err " + sci(worst);
    }));

    out.push_back(timed("mlp: directional derivative, 20 points per activation", [&](CheckResult& r) {
        double worst = 0.0;
        for (auto act : {nn::Activation::elu, nn::Activation::tanh, nn::Activation::relu}) {
            const nn::MlpSpec spec{5, 3, {8, 6}, act};
            for (int k = 0; k < 20; ++k) {
                auto params = nn::init_params(spec, rng);
                nn::Matrix x(4, 5), w(4, 3);
                for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
                for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
                nn::MlpCache cache;
                nn::mlp_forward(spec, params, x, &cache);
                const auto grad = nn::mlp_backward(spec, params, cache, w).params;
                nn::ParamVector dir(params.size());
                for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
                auto f = [&](double t) {
                    nn::ParamVector moved = params;
                    moved.map() += t * dir.map();
                    return (nn::mlp_forward(spec, moved, x).array() * w.array()).sum();
                };
                const double h = 1e-5;
                const double fd = (f(h) - f(-h)) / (2.0 * h);
                worst = std::max(worst, relative_error(fd, grad.map().dot(dir.map())));
            }
        }
        r.passed = worst < 1e-6;
        r.detail = "max rel err " + sci(worst);
    }));

    out.push_back(timed("losses: critic and actor gradients, 20 coords x 5 nets", [&](CheckResult& r) {
        double worst_c = 0.0, worst_a = 0.0;
        for (auto objective : {agent::ActorObjective::derivative, agent::ActorObjective::dual})
            for (int k = 0; k < 5; ++k) {
                agent::AgentConfig cfg;
                cfg.actor_objective = objective;
                cfg.alpha = 0.05;
                const nn::MlpSpec cs{6, 1, {16, 16}, nn::Activation::elu}, as{4, 4, {16, 16}, nn::Activation::elu};
                auto critic = nn::init_params(cs, rng), actor = nn::init_params(as, rng);
                const auto batch = random_loss_batch(4, 2, 32, 16, rng);
                const agent::NetworkView nets{cs, critic, as, actor};
                const auto cg = agent::critic_loss_and_grad(batch, nets, cfg).grad;
                worst_c = std::max(worst_c, coordinate_gradient_check(critic, cg, [&] {
                    return agent::critic_loss_and_grad(batch, nets, cfg).loss;
                }, 20, rng));
                const auto ag = agent::actor_loss_and_grad(batch, nets, cfg).grad;
                worst_a = std::max(worst_a, coordinate_gradient_check(actor, ag, [&] {
                    return agent::actor_loss_and_grad(batch, nets, cfg).loss;
                }, 20, rng));
            }
        r.passed = worst_c < 1e-4 && worst_a < 1e-4;
        r.detail = "critic " + sci(worst_c) + ", actor " + sci(worst_a);
    }));

    out.push_back(timed("discriminator: objective gradient", [&](CheckResult& r) {
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const nn::MlpSpec spec{5, 1, {12, 12}, nn::Activation::tanh};
            auto params = nn::init_params(spec, rng);
            ratio::DiscriminatorBatch batch{nn::Matrix(10, 5), nn::Matrix(10, 5)};
            for (Eigen::Index i = 0; i < batch.global.size(); ++i) {
                batch.global.data()[i] = rng.normal() + 0.5;
                batch.local.data()[i] = rng.normal();
            }
            const auto g = ratio::discriminator_loss_and_grad(spec, params, batch).grad;
            worst = std::max(worst, coordinate_gradient_check(params, g, [&] {
                return ratio::discriminator_loss_and_grad(spec, params, batch).objective;
            }, 20, rng));
        }
        r.passed = worst < 1e-6;
        r.detail = "max rel err " + sci(worst);
    }));

    out.push_back(timed("policy: sample / log-prob round trip", [&](CheckResult& r) {
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const nn::GaussianHeadOutput head{{rng.normal(), rng.normal()}, {rng.uniform(-2.0, 0.5), rng.uniform(-2.0, 0.5)}};
            const std::vector<double> noise{rng.normal(), rng.normal()};
            const auto s = nn::policy_sample(head, noise);
            worst = std::max(worst, std::abs(s.log_prob - nn::policy_log_prob(head, s.action)));
        }
        r.passed = worst < 1e-9;
        r.detail = "max discrepancy " + sci(worst);
    }));

    return out;
}

}  // namespace ompo::harness
