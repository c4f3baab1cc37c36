#pragma once

// Desk-scale continuous-control tasks.
//
// point_mass: a unit mass on an inclined plane, state (x, y, vx, vy), goal at
//   the origin. Acceleration = a_max * u + drag * (wind * e_x - v)
//   - gravity * incline * e_y, integrated with semi-implicit Euler.
//   mu0: position uniform in [-1, 1]^2 scaled by the arena scale, zero velocity.
//   The arena is walled at |x|, |y| <= arena_limit; episodes end only at the
//   horizon. A terminal exit would pay the agent for leaving early, since
//   ln r <= 0.
//   reward = r_min + (r_max - r_min) exp(-kappa |p|).
//
// pendulum: a point mass on a rigid link, angle theta measured from hanging
//   (theta = 0) and observation (cos theta, sin theta, omega).
//   theta'' = -(g/L) sin theta - damping * omega + u * max_torque / L^2
//             + drag * (wind - L omega cos theta) cos theta / L.
//   mu0: theta ~ U(-0.1, 0.1), omega = 0.
//   reward = r_min + (r_max - r_min) (1 + cos(theta - pi)) / 2.

#include "ompo/env/dynamics.hpp"
#include "ompo/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ompo::env {

inline constexpr double kRewardMin = 0.01;
inline constexpr double kRewardMax = 1.0;

struct EnvState {
    std::vector<double> x;
    std::size_t episode = 0;
    std::size_t step = 0;
};

struct StepResult {
    EnvState next;
    double reward = kRewardMin;
    bool terminal = false;   // absorbing failure; bootstrap must be masked
    bool truncated = false;  // horizon reached
};

inline void check_action(std::span<const double> action, std::size_t dim) {
    if (action.size() != dim) throw std::invalid_argument("env_step: action has wrong dimension");
    for (double a : action) {
        if (!std::isfinite(a)) throw std::domain_error("env_step: non-finite action");
        if (a < -1.0 || a > 1.0) throw std::invalid_argument("env_step: action outside [-1, 1]");
    }
}

class PointMass {
public:
    struct Options {
        double dt = 0.05;
        std::size_t horizon = 200;
        double max_accel = 10.0;
        double drag = 5.0;
        double incline = 0.1;  // sine of the plane's tilt; 0 gives a flat arena
        double kappa = 1.0;
        double arena_limit = 4.0;
    };

    PointMass() = default;
    explicit PointMass(Options o) : opt_(o) {}

    std::string name() const { return "point_mass"; }
    std::size_t obs_dim() const { return 4; }
    std::size_t action_dim() const { return 2; }
    std::size_t horizon() const { return opt_.horizon; }
    const Options& options() const { return opt_; }

    EnvState reset(const DynamicsParams& p, Rng& rng) const {
        const double s = p.link_length;
        return {{rng.uniform(-s, s), rng.uniform(-s, s), 0.0, 0.0}, 0, 0};
    }

    std::vector<double> observe(const EnvState& st) const { return st.x; }

    double reward(const std::vector<double>& x) const {
        const double dist = std::hypot(x[0], x[1]);
        return kRewardMin + (kRewardMax - kRewardMin) * std::exp(-opt_.kappa * dist);
    }

    StepResult step(const EnvState& st, std::span<const double> action, const DynamicsParams& p) const {
        check_action(action, 2);
        const auto& x = st.x;
        const double ax = opt_.max_accel * action[0] + opt_.drag * (p.wind - x[2]);
        const double ay = opt_.max_accel * action[1] - opt_.drag * x[3] - p.gravity * opt_.incline;
        StepResult r;
        r.next.episode = st.episode;
        r.next.step = st.step + 1;
        const double vx = x[2] + opt_.dt * ax;
        const double vy = x[3] + opt_.dt * ay;
        r.next.x = {x[0] + opt_.dt * vx, x[1] + opt_.dt * vy, vx, vy};
        // Inelastic walls: the mass stops against the arena boundary.
        for (std::size_t k = 0; k < 2; ++k) {
            if (std::abs(r.next.x[k]) > opt_.arena_limit) {
                r.next.x[k] = std::copysign(opt_.arena_limit, r.next.x[k]);
                r.next.x[k + 2] = 0.0;
            }
        }
        r.reward = reward(r.next.x);
        r.truncated = r.next.step >= opt_.horizon;
        return r;
    }

    /// Straight-to-goal PD controller with exact compensation of wind and
    /// gravity; the reference for learned returns.
    std::vector<double> scripted_action(const EnvState& st, const DynamicsParams& p) const {
        const auto& x = st.x;
        const double kp = 6.0, kd = 4.0;
        double ux = (-kp * x[0] - kd * x[2] - opt_.drag * (p.wind - x[2])) / opt_.max_accel;
        double uy = (-kp * x[1] - kd * x[3] + opt_.drag * x[3] + p.gravity * opt_.incline) / opt_.max_accel;
        return {std::clamp(ux, -1.0, 1.0), std::clamp(uy, -1.0, 1.0)};
    }

private:
    Options opt_;
};

class Pendulum {
public:
    struct Options {
        double dt = 0.05;
        std::size_t horizon = 200;
        double max_torque = 2.0;
        double damping = 0.1;
        double drag = 1.0;
    };

    Pendulum() = default;
    explicit Pendulum(Options o) : opt_(o) {}

    std::string name() const { return "pendulum"; }
    std::size_t obs_dim() const { return 3; }
    std::size_t action_dim() const { return 1; }
    std::size_t horizon() const { return opt_.horizon; }
    const Options& options() const { return opt_; }

    EnvState reset(const DynamicsParams&, Rng& rng) const { return {{rng.uniform(-0.1, 0.1), 0.0}, 0, 0}; }

    std::vector<double> observe(const EnvState& st) const {
        return {std::cos(st.x[0]), std::sin(st.x[0]), st.x[1]};
    }

    double reward(const std::vector<double>& x) const {
        return kRewardMin + (kRewardMax - kRewardMin) * 0.5 * (1.0 + std::cos(x[0] - std::numbers::pi));
    }

    StepResult step(const EnvState& st, std::span<const double> action, const DynamicsParams& p) const {
        check_action(action, 1);
        const double theta = st.x[0], omega = st.x[1], L = p.link_length;
        const double wind_force = opt_.drag * (p.wind - L * omega * std::cos(theta));
        const double alpha = -(p.gravity / L) * std::sin(theta) - opt_.damping * omega +
                             action[0] * opt_.max_torque / (L * L) + wind_force * std::cos(theta) / L;
        StepResult r;
        r.next.episode = st.episode;
        r.next.step = st.step + 1;
        const double omega2 = omega + opt_.dt * alpha;
        double theta2 = theta + opt_.dt * omega2;
        theta2 = std::remainder(theta2, 2.0 * std::numbers::pi);
        r.next.x = {theta2, omega2};
        r.reward = reward(r.next.x);
        r.truncated = r.next.step >= opt_.horizon;
        return r;
    }

    /// Energy-pumping swing-up with a PD catch near upright.
    std::vector<double> scripted_action(const EnvState& st, const DynamicsParams& p) const {
        const double theta = st.x[0], omega = st.x[1], L = p.link_length;
        const double err = std::remainder(theta - std::numbers::pi, 2.0 * std::numbers::pi);
        double u;
        if (std::abs(err) < 0.5) {
            u = (-10.0 * err - 2.0 * omega) * L * L / opt_.max_torque;
        } else {
            const double energy = 0.5 * L * L * omega * omega - p.gravity * L * std::cos(theta);
            const double target = p.gravity * L;
            u = (energy < target ? 1.0 : -1.0) * (omega >= 0.0 ? 1.0 : -1.0);
        }
        return {std::clamp(u, -1.0, 1.0)};
    }

private:
    Options opt_;
};

/// Closed set of environments addressable by name.
class Environment {
public:
    Environment(PointMass e) : impl_(std::move(e)) {}
    Environment(Pendulum e) : impl_(std::move(e)) {}

    static Environment make(const std::string& name) {
        if (name == "point_mass") return Environment(PointMass{});
        if (name == "pendulum") return Environment(Pendulum{});
        throw std::invalid_argument("unknown environment '" + name + "'");
    }

    static bool exists(const std::string& name) { return name == "point_mass" || name == "pendulum"; }

    std::string name() const { return std::visit([](const auto& e) { return e.name(); }, impl_); }
    std::size_t obs_dim() const { return std::visit([](const auto& e) { return e.obs_dim(); }, impl_); }
    std::size_t action_dim() const { return std::visit([](const auto& e) { return e.action_dim(); }, impl_); }
    std::size_t horizon() const { return std::visit([](const auto& e) { return e.horizon(); }, impl_); }

    EnvState reset(const DynamicsParams& p, Rng& rng) const {
        return std::visit([&](const auto& e) { return e.reset(p, rng); }, impl_);
    }
    std::vector<double> observe(const EnvState& s) const {
        return std::visit([&](const auto& e) { return e.observe(s); }, impl_);
    }
    StepResult step(const EnvState& s, std::span<const double> a, const DynamicsParams& p) const {
        return std::visit([&](const auto& e) { return e.step(s, a, p); }, impl_);
    }
    std::vector<double> scripted_action(const EnvState& s, const DynamicsParams& p) const {
        return std::visit([&](const auto& e) { return e.scripted_action(s, p); }, impl_);
    }

private:
    std::variant<PointMass, Pendulum> impl_;
};

/// Initial state for episode i with its frozen per-episode dynamics.
struct ResetResult {
    EnvState state;
    std::vector<double> observation;
    DynamicsParams params;
};

inline ResetResult env_reset(const Environment& env, const DynamicsSchedule& schedule, std::size_t episode,
                             Rng& rng, Domain domain = Domain::source) {
    DynamicsParams p = schedule_params(schedule, episode, 0, &rng, domain);
    p.validate();
    EnvState st = env.reset(p, rng);
    st.episode = episode;
    auto obs = env.observe(st);
    return {std::move(st), std::move(obs), p};
}

/// Steps one environment through consecutive episodes under a schedule.
class EpisodeRunner {
public:
    struct Transition {
        std::vector<double> observation;
        std::vector<double> action;
        std::vector<double> next_observation;
        double reward = 0.0;
        bool terminal = false;
        bool episode_end = false;
    };

    EpisodeRunner(Environment env, DynamicsSchedule schedule, Domain domain, std::uint64_t seed,
                  std::size_t first_episode = 0)
        : env_(std::move(env)), schedule_(std::move(schedule)), domain_(domain), rng_(seed), episode_(first_episode) {
        schedule_.validate();
    }

    /// Starts the next episode; returns its initial observation.
    const std::vector<double>& reset() {
        if (started_) ++episode_;
        started_ = true;
        auto r = env_reset(env_, schedule_, episode_, rng_, domain_);
        state_ = std::move(r.state);
        episode_params_ = r.params;
        observation_ = std::move(r.observation);
        episode_return_ = 0.0;
        return observation_;
    }

    Transition step(std::span<const double> action) {
        const DynamicsParams p = domain_ == Domain::target ? episode_params_
                                                           : step_params(schedule_, episode_params_, episode_, &rng_);
        StepResult res = env_.step(state_, action, p);
        Transition t{observation_, {action.begin(), action.end()}, env_.observe(res.next), res.reward,
                     res.terminal, res.terminal || res.truncated};
        state_ = std::move(res.next);
        observation_ = t.next_observation;
        episode_return_ += res.reward;
        return t;
    }

    const std::vector<double>& observation() const { return observation_; }
    const EnvState& state() const { return state_; }
    const DynamicsParams& episode_params() const { return episode_params_; }
    std::size_t episode() const { return episode_; }
    double episode_return() const { return episode_return_; }
    const Environment& environment() const { return env_; }

private:
    Environment env_;
    DynamicsSchedule schedule_;
    Domain domain_;
    Rng rng_;
    std::size_t episode_ = 0;
    bool started_ = false;
    EnvState state_;
    DynamicsParams episode_params_;
    std::vector<double> observation_;
    double episode_return_ = 0.0;
};

}  // namespace ompo::env
