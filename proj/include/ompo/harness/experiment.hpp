#pragma once

// One seeded training run: manifest first, then Algorithm 1 with periodic
// frozen-policy evaluation, metrics CSV and a final checkpoint.

#include "ompo/agent/learner.hpp"
#include "ompo/harness/config.hpp"
#include "ompo/nn/checkpoint.hpp"
#include "ompo/ratio/discriminator.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef OMPO_VERSION
#define OMPO_VERSION "unversioned"
#endif

namespace ompo::harness {

inline const char* kMetricsHeader =
    "env_step,episode,return,critic_loss,actor_loss,discriminator_loss,mean_R,std_R,merge_events";

struct MetricsRow {
    std::size_t env_step = 0;
    std::size_t episode = 0;
    double episode_return = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double discriminator_loss = 0.0;
    double mean_R = 0.0;
    double std_R = 0.0;
    std::size_t merge_events = 0;

    bool operator==(const MetricsRow&) const = default;
};

inline std::string format_row(const MetricsRow& r) {
    using detail::fmt;
    return std::to_string(r.env_step) + "," + std::to_string(r.episode) + "," + fmt(r.episode_return) + "," +
           fmt(r.critic_loss) + "," + fmt(r.actor_loss) + "," + fmt(r.discriminator_loss) + "," + fmt(r.mean_R) +
           "," + fmt(r.std_R) + "," + std::to_string(r.merge_events);
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Domain in which a scenario's policy is judged.
inline env::Domain evaluation_domain(const env::DynamicsSchedule& s) {
    return s.kind == env::ScenarioKind::domain_adaptation ? env::Domain::target : env::Domain::source;
}

/// Median undiscounted return of `policy` over n episodes.
template <class Policy>
double evaluate_returns(const env::Environment& environment, const env::DynamicsSchedule& schedule, std::size_t n,
                        std::uint64_t seed, Policy&& policy, std::size_t first_episode = 0) {
    env::EpisodeRunner runner(environment, schedule, evaluation_domain(schedule), seed, first_episode);
    std::vector<double> returns;
    for (std::size_t e = 0; e < n; ++e) {
        runner.reset();
        for (;;) {
            const auto a = policy(runner);
            if (runner.step(a).episode_end) break;
        }
        returns.push_back(runner.episode_return());
    }
    return median(returns);
}

inline double evaluate_learner(const agent::OmpoLearner& learner, const env::Environment& environment,
                               const env::DynamicsSchedule& schedule, std::size_t n, std::uint64_t seed,
                               std::size_t first_episode = 0) {
    return evaluate_returns(environment, schedule, n, seed,
                            [&](const env::EpisodeRunner& r) { return learner.act_deterministic(r.observation()); },
                            first_episode);
}

/// Median return of the environment's hand-written controller.
inline double evaluate_scripted(const env::Environment& environment, const env::DynamicsSchedule& schedule,
                                std::size_t n, std::uint64_t seed) {
    return evaluate_returns(environment, schedule, n, seed, [&](const env::EpisodeRunner& r) {
        return environment.scripted_action(r.state(), r.episode_params());
    });
}

/// Seed of the k-th evaluation batch; independent of the training streams.
inline std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t k) {
    Rng r(seed ^ 0x5eed'e7a1'0000'0000ULL);
    for (std::size_t i = 0; i < k; ++i) r.split();
    return r.split();
}

inline nlohmann::ordered_json manifest_json(const ScenarioConfig& cfg) {
    nlohmann::ordered_json m;
    m["code_version"] = OMPO_VERSION;
    nlohmann::ordered_json c;
    for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
    m["config"] = c;
    m["decisions"] = {
        {"weight_init", "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases"},
        {"critic_steps_per_actor_step", cfg.agent.critic_steps_per_actor_step},
        {"updates_per_refresh", cfg.agent.updates_per_refresh},
        {"discriminator_steps_per_refresh", cfg.agent.resolved_discriminator_steps()},
        {"discriminator_label_convention",
         "h -> 1 on global-buffer samples, h -> 0 on local-buffer samples; recover_ratio(h) = ln(rho_G/rho_L); "
         "the agent consumes R = ln(rho_L/rho_G)"},
        {"discriminator_h_clamp", ratio::kRatioClamp},
        {"max_abs_R", ratio::max_abs_ratio()},
        {"log_std_clip", {nn::kLogStdMin, nn::kLogStdMax}},
        {"pre_tanh_clamp", nn::kMaxPreTanh},
        {"conjugate_extension", agent::to_string(cfg.agent.conjugate_extension)},
        {"update_precision", agent::to_string(cfg.agent.precision) + " arithmetic, double parameters"},
        {"target_network", "none"},
        {"bellman_backup", "single reparameterized next-action sample, masked by (1 - terminal)"},
        {"actor_objective", agent::to_string(cfg.agent.actor_objective)},
        {"evaluation", "deterministic tanh(mean) policy, median over n_eval_episodes"},
        {"domain_adaptation_stepping", "source environment advances one step per target step"},
    };
    return m;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ExperimentOptions {
    bool write_files = true;
    bool write_checkpoint = true;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    agent::TrainingLog log;
    std::filesystem::path metrics_path;
    std::filesystem::path manifest_path;
    std::filesystem::path checkpoint_path;
    double final_return = 0.0;
    std::vector<std::string> invariant_failures;

    bool ok() const { return invariant_failures.empty(); }
};

inline void write_manifest(const std::filesystem::path& path, const nlohmann::ordered_json& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << m.dump(2) << "\n";
}

/// Runs one configuration. Files go to cfg.output_dir when enabled.
inline ExperimentResult run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opt = {}) {
    cfg.validate();
    ExperimentResult result;
    const auto environment = env::Environment::make(cfg.environment);
    auto manifest = manifest_json(cfg);
    const auto started = std::chrono::steady_clock::now();

    std::ofstream csv;
    if (opt.write_files) {
        const std::filesystem::path dir(cfg.output_dir);
        std::filesystem::create_directories(dir);
        result.manifest_path = dir / "manifest.json";
        result.metrics_path = dir / "metrics.csv";
        result.checkpoint_path = dir / "checkpoint.bin";
        manifest["run"] = {{"started_utc", utc_timestamp()}, {"status", "running"}};
        write_manifest(result.manifest_path, manifest);
        csv.open(result.metrics_path);
        if (!csv) throw std::runtime_error("cannot write " + result.metrics_path.string());
        csv << kMetricsHeader << "\n";
    }

    Rng seeds(cfg.seed);
    const std::uint64_t learner_seed = seeds.split();
    const std::uint64_t env_seed = seeds.split();
    agent::OmpoLearner learner(environment.obs_dim(), environment.action_dim(), cfg.agent, learner_seed);
    std::size_t eval_index = 0;

    auto on_step = [&](const agent::Algorithm1Progress& p) {
        if (p.env_step % cfg.eval_every != 0) return;
        MetricsRow row;
        row.env_step = p.env_step;
        row.episode = p.learner.counters().episodes;
        row.episode_return = evaluate_learner(p.learner, environment, cfg.schedule, cfg.n_eval_episodes,
                                              evaluation_seed(cfg.seed, eval_index++), p.runner.episode());
        const auto& s = p.learner.stats();
        row.critic_loss = s.critic_loss;
        row.actor_loss = s.actor_loss;
        row.discriminator_loss = s.discriminator_loss;
        row.mean_R = s.mean_R;
        row.std_R = s.std_R;
        row.merge_events = p.learner.counters().merge_events;
        if (csv.is_open()) csv << format_row(row) << "\n" << std::flush;
        result.rows.push_back(row);
    };

    result.log = agent::run_algorithm1(learner, environment, cfg.schedule, cfg.total_env_steps, env_seed, on_step);
    result.final_return = result.rows.empty() ? 0.0 : result.rows.back().episode_return;

    // Run-level invariants.
    auto& bad = result.invariant_failures;
    const std::size_t expected_rows = cfg.total_env_steps / cfg.eval_every + 1;
    if (result.rows.size() != expected_rows)
        bad.push_back("expected " + std::to_string(expected_rows) + " metrics rows, got " +
                      std::to_string(result.rows.size()));
    for (const auto& r : result.rows) {
        for (double v : {r.episode_return, r.critic_loss, r.actor_loss, r.discriminator_loss, r.mean_R, r.std_R})
            if (!std::isfinite(v)) {
                bad.push_back("non-finite metric at env_step " + std::to_string(r.env_step));
                break;
            }
        if (cfg.agent.ablation == agent::Ablation::no_discriminator && (r.mean_R != 0.0 || r.std_R != 0.0))
            bad.push_back("mean_R nonzero under no_discriminator at env_step " + std::to_string(r.env_step));
    }
    if (learner.buffers().local().size() > cfg.agent.local_capacity) bad.push_back("local buffer over capacity");
    if (!learner.critic_params().all_finite() || !learner.actor_params().all_finite())
        bad.push_back("non-finite network parameters");

    if (opt.write_files) {
        csv.close();
        if (opt.write_checkpoint) nn::save_checkpoint(result.checkpoint_path.string(), learner.checkpoint());
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        const auto& c = result.log.counters;
        manifest["run"]["finished_utc"] = utc_timestamp();
        manifest["run"]["wall_seconds"] = seconds;
        manifest["run"]["status"] = result.ok() ? "completed" : "invariant_failure";
        manifest["run"]["invariant_failures"] = result.invariant_failures;
        manifest["run"]["counters"] = {{"env_steps", c.env_steps},
                                       {"episodes", c.episodes},
                                       {"refreshes", c.refreshes},
                                       {"merge_events", c.merge_events},
                                       {"discriminator_trainings", c.discriminator_trainings},
                                       {"critic_steps", c.critic_steps},
                                       {"actor_steps", c.actor_steps}};
        write_manifest(result.manifest_path, manifest);
    }
    return result;
}

}  // namespace ompo::harness
