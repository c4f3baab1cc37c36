#pragma once

// Dynamics parameters and the three shift schedules.
//
// Non-stationary fields follow base + amplitude * sin(frequency * i) + U(-w, w),
// where i is the episode index. Length-type fields are drawn once per episode;
// gravity and wind are redrawn at every step.

#include "ompo/random.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace ompo::env {

struct DynamicsParams {
    double gravity = 9.81;      // m/s^2
    double wind = 0.0;          // m/s, signed, along +x
    double link_length = 1.0;   // pendulum link (m) or point-mass arena scale

    void validate() const {
        if (!(gravity > 0.0) || !std::isfinite(gravity)) throw std::invalid_argument("DynamicsParams: gravity must be > 0");
        if (!(link_length > 0.0) || !std::isfinite(link_length))
            throw std::invalid_argument("DynamicsParams: link_length must be > 0");
        if (!std::isfinite(wind)) throw std::invalid_argument("DynamicsParams: wind must be finite");
    }

    bool operator==(const DynamicsParams&) const = default;
};

enum class ScenarioKind { stationary, domain_adaptation, non_stationary };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::stationary: return "stationary";
        case ScenarioKind::domain_adaptation: return "domain_adaptation";
        case ScenarioKind::non_stationary: return "non_stationary";
    }
    return "?";
}

inline ScenarioKind scenario_from_string(const std::string& s) {
    if (s == "stationary") return ScenarioKind::stationary;
    if (s == "domain_adaptation") return ScenarioKind::domain_adaptation;
    if (s == "non_stationary") return ScenarioKind::non_stationary;
    throw std::invalid_argument("unknown scenario '" + s + "'");
}

enum class Domain { source, target };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    double midpoint() const { return 0.5 * (lo + hi); }
    bool operator==(const Interval&) const = default;
};

/// base + amplitude * sin(frequency * i) + U(-noise_half_width, noise_half_width).
struct Sinusoid {
    double base = 0.0;
    double amplitude = 0.0;
    double frequency = 1.0;
    double noise_half_width = 0.0;

    /// With rng == nullptr the noise term sits at its midpoint (zero).
    double evaluate(std::size_t episode, Rng* rng) const {
        double v = base + amplitude * std::sin(frequency * static_cast<double>(episode));
        if (rng && noise_half_width > 0.0) v += rng->uniform(-noise_half_width, noise_half_width);
        return v;
    }

    bool operator==(const Sinusoid&) const = default;
};

struct RandomizationRanges {
    std::optional<Interval> gravity;
    std::optional<Interval> wind;
    std::optional<Interval> link_length;

    bool operator==(const RandomizationRanges&) const = default;
};

struct DynamicsSchedule {
    ScenarioKind kind = ScenarioKind::stationary;
    DynamicsParams source;
    DynamicsParams target;
    bool randomize_source = false;   // domain randomization over `ranges`
    RandomizationRanges ranges;
    std::optional<Sinusoid> gravity_schedule;  // per step
    std::optional<Sinusoid> wind_schedule;     // per step
    std::optional<Sinusoid> length_schedule;   // per episode

    void validate() const {
        source.validate();
        target.validate();
        for (const auto& r : {ranges.gravity, ranges.wind, ranges.link_length})
            if (r && !(r->lo <= r->hi)) throw std::invalid_argument("DynamicsSchedule: empty randomization range");
        if (kind == ScenarioKind::non_stationary) {
            if (!gravity_schedule && !wind_schedule && !length_schedule)
                throw std::invalid_argument("DynamicsSchedule: non_stationary needs at least one varying field");
            for (const auto& s : {gravity_schedule, wind_schedule, length_schedule})
                if (s && !(s->frequency > 0.0))
                    throw std::invalid_argument("DynamicsSchedule: sinusoid frequency must be > 0");
        }
    }

    bool operator==(const DynamicsSchedule&) const = default;
};

/// Parameters in effect at step j of episode i.
///
/// For length-type fields (and domain randomization draws) callers should
/// evaluate once at j = 0 and keep the result for the episode; EpisodeRunner
/// does this.
inline DynamicsParams schedule_params(const DynamicsSchedule& schedule, std::size_t episode, std::size_t step,
                                      Rng* rng, Domain domain = Domain::source) {
    (void)step;  // the functional forms depend only on the episode index; per-step variation enters via noise
    switch (schedule.kind) {
        case ScenarioKind::stationary: return schedule.source;
        case ScenarioKind::domain_adaptation: {
            if (domain == Domain::target) return schedule.target;
            DynamicsParams p = schedule.source;
            if (schedule.randomize_source) {
                auto draw = [rng](const Interval& iv) { return rng ? rng->uniform(iv.lo, iv.hi) : iv.midpoint(); };
                if (schedule.ranges.gravity) p.gravity = draw(*schedule.ranges.gravity);
                if (schedule.ranges.wind) p.wind = draw(*schedule.ranges.wind);
                if (schedule.ranges.link_length) p.link_length = draw(*schedule.ranges.link_length);
            }
            return p;
        }
        case ScenarioKind::non_stationary: {
            DynamicsParams p = schedule.source;
            if (schedule.length_schedule) p.link_length = schedule.length_schedule->evaluate(episode, rng);
            if (schedule.gravity_schedule) p.gravity = schedule.gravity_schedule->evaluate(episode, rng);
            if (schedule.wind_schedule) p.wind = schedule.wind_schedule->evaluate(episode, rng);
            return p;
        }
    }
    return schedule.source;
}

/// Redraws only the per-step fields (gravity, wind) on top of frozen episode parameters.
inline DynamicsParams step_params(const DynamicsSchedule& schedule, const DynamicsParams& episode_params,
                                  std::size_t episode, Rng* rng) {
    if (schedule.kind != ScenarioKind::non_stationary) return episode_params;
    DynamicsParams p = episode_params;
    if (schedule.gravity_schedule) p.gravity = schedule.gravity_schedule->evaluate(episode, rng);
    if (schedule.wind_schedule) p.wind = schedule.wind_schedule->evaluate(episode, rng);
    return p;
}

// Presets carrying the shift factors used for the desk-scale scenarios: target
// gravity doubles and a 1 m/s wind appears; the non-stationary gravity/wind
// sinusoids and the link-length sinusoid reuse the same coefficients.

inline DynamicsSchedule stationary_schedule(DynamicsParams p = {}) {
    DynamicsSchedule s;
    s.kind = ScenarioKind::stationary;
    s.source = s.target = p;
    return s;
}

inline DynamicsSchedule domain_adaptation_schedule(DynamicsParams source = {}) {
    DynamicsSchedule s;
    s.kind = ScenarioKind::domain_adaptation;
    s.source = source;
    s.target = source;
    s.target.gravity = 2.0 * source.gravity;
    s.target.wind = 1.0;
    s.ranges.gravity = Interval{16.62, 22.62};
    s.ranges.wind = Interval{0.5, 1.2};
    return s;
}

inline DynamicsSchedule non_stationary_schedule(DynamicsParams base = {}) {
    DynamicsSchedule s;
    s.kind = ScenarioKind::non_stationary;
    s.source = s.target = base;
    s.gravity_schedule = Sinusoid{14.715, 4.905, 0.5, 3.0};
    s.wind_schedule = Sinusoid{1.0, 0.2, 0.5, 0.1};
    return s;
}

}  // namespace ompo::env
