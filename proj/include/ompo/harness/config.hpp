#pragma once

// Scenario configuration files.
//
// Grammar, one statement per line:
//   line    := blank | comment | entry
//   comment := '#' anything
//   entry   := key '=' value [comment]
//   key     := identifier ('.' identifier)*
// Whitespace around keys and values is ignored. A key may appear at most once.
// Lists are comma-separated ("256, 256"); sinusoids are
// "base, amplitude, frequency, noise_half_width" or "none"; intervals are
// "lo, hi" or "none"; booleans are true/false.
//
// The scenario key selects a preset schedule; every other key overrides it.
// Unknown keys are errors.

#include "ompo/agent/config.hpp"
#include "ompo/env/dynamics.hpp"
#include "ompo/env/environments.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace ompo::harness {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    env::ScenarioKind scenario = env::ScenarioKind::stationary;
    std::string environment = "point_mass";
    std::uint64_t seed = 0;
    std::size_t total_env_steps = 50'000;
    std::size_t eval_every = 5'000;
    std::size_t n_eval_episodes = 10;
    agent::AgentConfig agent;
    env::DynamicsSchedule schedule = env::stationary_schedule();
    std::string output_dir = "runs";

    void validate() const {
        if (total_env_steps == 0) throw ConfigError("total_env_steps must be > 0");
        if (eval_every == 0) throw ConfigError("eval_every must be > 0");
        if (n_eval_episodes == 0) throw ConfigError("n_eval_episodes must be > 0");
        if (!env::Environment::exists(environment)) throw ConfigError("unknown environment '" + environment + "'");
        if (schedule.kind != scenario) throw ConfigError("schedule kind disagrees with scenario");
        try {
            agent.validate();
            schedule.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    bool operator==(const ScenarioConfig&) const = default;
};

inline env::DynamicsSchedule preset_schedule(env::ScenarioKind kind) {
    switch (kind) {
        case env::ScenarioKind::stationary: return env::stationary_schedule();
        case env::ScenarioKind::domain_adaptation: return env::domain_adaptation_schedule();
        case env::ScenarioKind::non_stationary: return env::non_stationary_schedule();
    }
    return env::stationary_schedule();
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty()) throw ConfigError("expected a number, got '" + s + "'");
    return v;
}

inline std::uint64_t to_uint(const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty())
        throw ConfigError("expected a non-negative integer, got '" + s + "'");
    return v;
}

inline bool to_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("expected true or false, got '" + s + "'");
}

inline std::vector<std::size_t> to_widths(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) out.push_back(static_cast<std::size_t>(to_uint(item)));
    return out;
}

inline std::optional<env::Sinusoid> to_sinusoid(const std::string& s) {
    if (s == "none") return std::nullopt;
    const auto v = split_list(s);
    if (v.size() != 4) throw ConfigError("sinusoid needs 'base, amplitude, frequency, noise_half_width'");
    return env::Sinusoid{to_double(v[0]), to_double(v[1]), to_double(v[2]), to_double(v[3])};
}

inline std::optional<env::Interval> to_interval(const std::string& s) {
    if (s == "none") return std::nullopt;
    const auto v = split_list(s);
    if (v.size() != 2) throw ConfigError("interval needs 'lo, hi'");
    return env::Interval{to_double(v[0]), to_double(v[1])};
}

/// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("fmt: formatting failed");
    return std::string(buf, ptr);
}

inline std::string fmt(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out;
}

inline std::string fmt(const std::optional<env::Sinusoid>& s) {
    if (!s) return "none";
    return fmt(s->base) + ", " + fmt(s->amplitude) + ", " + fmt(s->frequency) + ", " + fmt(s->noise_half_width);
}

inline std::string fmt(const std::optional<env::Interval>& iv) {
    if (!iv) return "none";
    return fmt(iv->lo) + ", " + fmt(iv->hi);
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;
using Getter = std::function<std::string(const ScenarioConfig&)>;

struct Field {
    Setter set;
    Getter get;
};

template <class T>
Field size_field(T ScenarioConfig::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.*member = static_cast<T>(to_uint(v)); },
            [member](const ScenarioConfig& c) { return std::to_string(c.*member); }};
}

template <class T>
Field agent_size(T agent::AgentConfig::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.agent.*member = static_cast<T>(to_uint(v)); },
            [member](const ScenarioConfig& c) { return std::to_string(c.agent.*member); }};
}

inline Field agent_real(double agent::AgentConfig::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.agent.*member = to_double(v); },
            [member](const ScenarioConfig& c) { return fmt(c.agent.*member); }};
}

inline Field agent_widths(std::vector<std::size_t> agent::AgentConfig::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.agent.*member = to_widths(v); },
            [member](const ScenarioConfig& c) { return fmt(c.agent.*member); }};
}

inline Field agent_activation(nn::Activation agent::AgentConfig::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) {
                try {
                    c.agent.*member = nn::activation_from_string(v);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            },
            [member](const ScenarioConfig& c) { return nn::to_string(c.agent.*member); }};
}

inline Field params_real(env::DynamicsParams env::DynamicsSchedule::*which, double env::DynamicsParams::*member) {
    return {[which, member](ScenarioConfig& c, const std::string& v) { c.schedule.*which.*member = to_double(v); },
            [which, member](const ScenarioConfig& c) { return fmt(c.schedule.*which.*member); }};
}

inline Field sinusoid_field(std::optional<env::Sinusoid> env::DynamicsSchedule::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.schedule.*member = to_sinusoid(v); },
            [member](const ScenarioConfig& c) { return fmt(c.schedule.*member); }};
}

inline Field range_field(std::optional<env::Interval> env::RandomizationRanges::*member) {
    return {[member](ScenarioConfig& c, const std::string& v) { c.schedule.ranges.*member = to_interval(v); },
            [member](const ScenarioConfig& c) { return fmt(c.schedule.ranges.*member); }};
}

/// Every key except `scenario`, in serialization order.
inline const std::vector<std::pair<std::string, Field>>& fields() {
    using A = agent::AgentConfig;
    using S = env::DynamicsSchedule;
    using P = env::DynamicsParams;
    static const std::vector<std::pair<std::string, Field>> table = {
        {"env", {[](ScenarioConfig& c, const std::string& v) { c.environment = v; },
                 [](const ScenarioConfig& c) { return c.environment; }}},
        {"seed", size_field(&ScenarioConfig::seed)},
        {"total_env_steps", size_field(&ScenarioConfig::total_env_steps)},
        {"eval_every", size_field(&ScenarioConfig::eval_every)},
        {"n_eval_episodes", size_field(&ScenarioConfig::n_eval_episodes)},
        {"ablation", {[](ScenarioConfig& c, const std::string& v) {
                          try {
                              c.agent.ablation = agent::ablation_from_string(v);
                          } catch (const std::invalid_argument& e) {
                              throw ConfigError(e.what());
                          }
                      },
                      [](const ScenarioConfig& c) { return agent::to_string(c.agent.ablation); }}},
        {"output.dir", {[](ScenarioConfig& c, const std::string& v) { c.output_dir = v; },
                        [](const ScenarioConfig& c) { return c.output_dir; }}},
        {"agent.gamma", agent_real(&A::gamma)},
        {"agent.alpha", agent_real(&A::alpha)},
        {"agent.q_order", agent_real(&A::q_order)},
        {"agent.batch", agent_size(&A::batch)},
        {"agent.initial_batch", agent_size(&A::initial_batch)},
        {"agent.critic_lr", agent_real(&A::critic_lr)},
        {"agent.actor_lr", agent_real(&A::actor_lr)},
        {"agent.discriminator_lr", agent_real(&A::discriminator_lr)},
        {"agent.critic_steps_per_actor_step", agent_size(&A::critic_steps_per_actor_step)},
        {"agent.updates_per_refresh", agent_size(&A::updates_per_refresh)},
        {"agent.discriminator_steps", agent_size(&A::discriminator_steps)},
        {"agent.local_capacity", agent_size(&A::local_capacity)},
        {"agent.global_capacity", agent_size(&A::global_capacity)},
        {"agent.critic_hidden", agent_widths(&A::critic_hidden)},
        {"agent.actor_hidden", agent_widths(&A::actor_hidden)},
        {"agent.discriminator_hidden", agent_widths(&A::discriminator_hidden)},
        {"agent.critic_activation", agent_activation(&A::critic_activation)},
        {"agent.actor_activation", agent_activation(&A::actor_activation)},
        {"agent.discriminator_activation", agent_activation(&A::discriminator_activation)},
        {"agent.actor_objective", {[](ScenarioConfig& c, const std::string& v) {
                                       try {
                                           c.agent.actor_objective = agent::actor_objective_from_string(v);
                                       } catch (const std::invalid_argument& e) {
                                           throw ConfigError(e.what());
                                       }
                                   },
                                   [](const ScenarioConfig& c) { return agent::to_string(c.agent.actor_objective); }}},
        {"agent.conjugate_extension",
         {[](ScenarioConfig& c, const std::string& v) {
              try {
                  c.agent.conjugate_extension = agent::conjugate_extension_from_string(v);
              } catch (const std::invalid_argument& e) {
                  throw ConfigError(e.what());
              }
          },
          [](const ScenarioConfig& c) { return agent::to_string(c.agent.conjugate_extension); }}},
        {"agent.precision", {[](ScenarioConfig& c, const std::string& v) {
                                 try {
                                     c.agent.precision = agent::precision_from_string(v);
                                 } catch (const std::invalid_argument& e) {
                                     throw ConfigError(e.what());
                                 }
                             },
                             [](const ScenarioConfig& c) { return agent::to_string(c.agent.precision); }}},
        {"source.gravity", params_real(&S::source, &P::gravity)},
        {"source.wind", params_real(&S::source, &P::wind)},
        {"source.link_length", params_real(&S::source, &P::link_length)},
        {"target.gravity", params_real(&S::target, &P::gravity)},
        {"target.wind", params_real(&S::target, &P::wind)},
        {"target.link_length", params_real(&S::target, &P::link_length)},
        {"domain.randomize_source", {[](ScenarioConfig& c, const std::string& v) { c.schedule.randomize_source = to_bool(v); },
                                     [](const ScenarioConfig& c) {
                                         return std::string(c.schedule.randomize_source ? "true" : "false");
                                     }}},
        {"domain.gravity_range", range_field(&env::RandomizationRanges::gravity)},
        {"domain.wind_range", range_field(&env::RandomizationRanges::wind)},
        {"domain.link_length_range", range_field(&env::RandomizationRanges::link_length)},
        {"schedule.gravity", sinusoid_field(&S::gravity_schedule)},
        {"schedule.wind", sinusoid_field(&S::wind_schedule)},
        {"schedule.link_length", sinusoid_field(&S::length_schedule)},
    };
    return table;
}

}  // namespace detail

/// Parses configuration text. `origin` prefixes error messages.
inline ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
    struct Entry {
        std::string value;
        std::size_t line;
    };
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        for (char ch : key)
            if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'))
                throw ConfigError(where + "invalid character in key '" + key + "'");
        if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
        if (entries.count(key)) throw ConfigError(where + "duplicate key '" + key + "'");
        entries[key] = {value, line_no};
    }

    ScenarioConfig cfg;
    if (auto it = entries.find("scenario"); it != entries.end()) {
        try {
            cfg.scenario = env::scenario_from_string(it->second.value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(origin + ":" + std::to_string(it->second.line) + ": " + e.what());
        }
        entries.erase(it);
    }
    cfg.schedule = preset_schedule(cfg.scenario);

    const auto& table = detail::fields();
    for (const auto& [key, entry] : entries) {
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
        const auto where = origin + ":" + std::to_string(entry.line) + ": ";
        if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
        try {
            it->second.set(cfg, entry.value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

inline ScenarioConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Fully resolved key/value listing, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("scenario", env::to_string(cfg.scenario));
    for (const auto& [key, field] : detail::fields()) out.emplace_back(key, field.get(cfg));
    return out;
}

/// Sets one key on an already-resolved config (command-line overrides) and
/// revalidates. `scenario` is not overridable here since it selects the preset.
inline void apply_override(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = detail::fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
    try {
        it->second.set(cfg, detail::trim(value));
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
    cfg.validate();
}

inline std::string serialize_config(const ScenarioConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

}  // namespace ompo::harness
