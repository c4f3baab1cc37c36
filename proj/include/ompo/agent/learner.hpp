#pragma once

// The learner and the Algorithm-1 training loop.
//
// Data routing per scenario:
//   stationary, non_stationary: every transition -> D_L
//   domain_adaptation:          source-domain transitions -> D_G,
//                               target-domain transitions -> D_L
// One target (or sole) environment step counts as one env step; in domain
// adaptation the source environment advances in lockstep.
//
// When D_L is full: train the discriminator on D_G vs D_L, run the
// two-timescale critic/actor updates on batches from D_G and D_0, then merge
// D_L into D_G and empty D_L. While D_G is still empty there is nothing to
// contrast or sample, so that first refresh only merges.

#include "ompo/agent/buffers.hpp"
#include "ompo/agent/config.hpp"
#include "ompo/agent/losses.hpp"
#include "ompo/env/environments.hpp"
#include "ompo/nn/adam.hpp"
#include "ompo/nn/checkpoint.hpp"
#include "ompo/nn/gaussian_policy.hpp"
#include "ompo/nn/mlp.hpp"
#include "ompo/random.hpp"
#include "ompo/ratio/discriminator.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ompo::agent {

/// Latest optimization statistics; zero until the first update happens.
struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double discriminator_loss = 0.0;  // -(mean_G ln h + mean_L ln(1-h)) of the last step
    double mean_R = 0.0;
    double std_R = 0.0;
};

struct TrainingCounters {
    std::size_t env_steps = 0;
    std::size_t episodes = 0;           // completed episodes of the (target) environment
    std::size_t refreshes = 0;          // D_L-full events
    std::size_t merge_events = 0;
    std::size_t records_merged = 0;
    std::size_t discriminator_trainings = 0;
    std::size_t discriminator_steps = 0;
    std::size_t critic_steps = 0;
    std::size_t actor_steps = 0;

    bool operator==(const TrainingCounters&) const = default;
};

class OmpoLearner {
public:
    OmpoLearner(std::size_t obs_dim, std::size_t action_dim, AgentConfig config, std::uint64_t seed)
        : config_((config.validate(), std::move(config))),
          obs_dim_(obs_dim),
          action_dim_(action_dim),
          rng_(seed),
          critic_spec_{obs_dim + action_dim, 1, config_.critic_hidden, config_.critic_activation},
          actor_spec_{obs_dim, 2 * action_dim, config_.actor_hidden, config_.actor_activation},
          critic_(nn::init_params(critic_spec_, rng_)),
          actor_(nn::init_params(actor_spec_, rng_)),
          critic_adam_(critic_.size(), config_.critic_lr),
          actor_adam_(actor_.size(), config_.actor_lr),
          discriminator_(nn::MlpSpec{2 * obs_dim + action_dim, 1, config_.discriminator_hidden,
                                     config_.discriminator_activation},
                         config_.discriminator_lr, rng_),
          buffers_(config_.local_capacity, config_.global_capacity) {
        if (obs_dim == 0 || action_dim == 0) throw std::invalid_argument("OmpoLearner: zero dimension");
    }

    /// Stochastic behaviour action a ~ pi(.|s).
    std::vector<double> act(std::span<const double> obs) {
        const auto raw = nn::mlp_forward(actor_spec_, actor_, obs);
        std::vector<double> noise(action_dim_);
        for (auto& z : noise) z = rng_.normal();
        return nn::policy_sample(nn::gaussian_head(raw), noise).action;
    }

    /// Deterministic evaluation action tanh(mean).
    std::vector<double> act_deterministic(std::span<const double> obs) const {
        return nn::mean_action(nn::mlp_forward(actor_spec_, actor_, obs));
    }

    NetworkView networks() const { return {critic_spec_, critic_, actor_spec_, actor_}; }

    /// R = ln(rho_L / rho_G) per record as fed to the losses; zero under the
    /// no-discriminator ablation.
    std::vector<double> ratio_for(const nn::Matrix& features) const {
        if (config_.ablation == Ablation::no_discriminator)
            return std::vector<double>(static_cast<std::size_t>(features.rows()), 0.0);
        auto r = discriminator_.log_ratio(features);
        for (auto& v : r) v = -v;
        return r;
    }

    /// Samples B records from D_G and N0 start states from D_0 with fresh policy noise.
    LossBatch sample_loss_batch() {
        const auto& global = buffers_.global();
        const auto& init = buffers_.initial_states();
        if (global.size() == 0) throw std::logic_error("sample_loss_batch: global buffer is empty");
        if (init.empty()) throw std::logic_error("sample_loss_batch: initial-state buffer is empty");
        const auto b = static_cast<Eigen::Index>(config_.batch);
        const auto n0 = static_cast<Eigen::Index>(config_.initial_batch);
        const auto ds = static_cast<Eigen::Index>(obs_dim_), da = static_cast<Eigen::Index>(action_dim_);

        LossBatch batch;
        batch.states.resize(b, ds);
        batch.actions.resize(b, da);
        batch.next_states.resize(b, ds);
        batch.reward_term.resize(config_.batch);
        batch.continuation.resize(config_.batch);
        std::vector<std::size_t> picks(config_.batch);
        for (Eigen::Index i = 0; i < b; ++i) {
            const auto pick = rng_.index(global.size());
            picks[static_cast<std::size_t>(i)] = pick;
            const auto& r = global[pick];
            for (Eigen::Index c = 0; c < ds; ++c) {
                batch.states(i, c) = r.state[static_cast<std::size_t>(c)];
                batch.next_states(i, c) = r.next_state[static_cast<std::size_t>(c)];
            }
            for (Eigen::Index c = 0; c < da; ++c) batch.actions(i, c) = r.action[static_cast<std::size_t>(c)];
            batch.reward_term[static_cast<std::size_t>(i)] = reward_term(r.reward, config_.ablation);
            batch.continuation[static_cast<std::size_t>(i)] = r.terminal ? 0.0 : 1.0;
        }
        batch.ratio.resize(config_.batch);
        ensure_ratio_cache();
        for (Eigen::Index i = 0; i < b; ++i) batch.ratio[static_cast<std::size_t>(i)] = ratio_cache_[picks[static_cast<std::size_t>(i)]];
        batch.next_noise.resize(b, da);
        for (Eigen::Index i = 0; i < b; ++i)
            for (Eigen::Index c = 0; c < da; ++c) batch.next_noise(i, c) = rng_.normal();
        batch.initial_states.resize(n0, ds);
        batch.initial_noise.resize(n0, da);
        for (Eigen::Index i = 0; i < n0; ++i) {
            const auto& s0 = init[rng_.index(init.size())];
            for (Eigen::Index c = 0; c < ds; ++c) batch.initial_states(i, c) = s0[static_cast<std::size_t>(c)];
            for (Eigen::Index c = 0; c < da; ++c) batch.initial_noise(i, c) = rng_.normal();
        }
        return batch;
    }

    /// critic_steps_per_actor_step critic Adam steps, then one actor Adam step.
    void two_timescale_update() {
        if (buffers_.global().size() < 1 || buffers_.initial_states().empty())
            throw std::logic_error("two_timescale_update: insufficient data");
        for (std::size_t k = 0; k < config_.critic_steps_per_actor_step; ++k) {
            const auto batch = sample_loss_batch();
            auto res = config_.precision == Precision::single ? critic_loss_and_grad<float>(batch, networks(), config_)
                                                              : critic_loss_and_grad<double>(batch, networks(), config_);
            nn::adam_step(critic_, res.grad, critic_adam_);
            stats_.critic_loss = res.loss;
            record_ratio_stats(batch.ratio);
            ++counters_.critic_steps;
        }
        const auto batch = sample_loss_batch();
        auto res = config_.precision == Precision::single ? actor_loss_and_grad<float>(batch, networks(), config_)
                                                          : actor_loss_and_grad<double>(batch, networks(), config_);
        nn::adam_step(actor_, res.grad, actor_adam_);
        stats_.actor_loss = res.loss;
        ++counters_.actor_steps;
    }

    /// Discriminator training on balanced D_G / D_L batches.
    void train_discriminator() {
        if (config_.ablation == Ablation::no_discriminator) return;
        const std::size_t steps = config_.resolved_discriminator_steps();
        for (std::size_t k = 0; k < steps; ++k) {
            const auto batch = ratio::balanced_batch_sampler(buffers_.global(), buffers_.local(), rng_);
            stats_.discriminator_loss = -discriminator_.train_step(batch);
            ratio_cache_valid_ = false;
            ++counters_.discriminator_steps;
        }
        ++counters_.discriminator_trainings;
    }

    /// The D_L-full event of Algorithm 1.
    void refresh() {
        ++counters_.refreshes;
        if (!buffers_.global().empty()) {
            train_discriminator();
            for (std::size_t u = 0; u < config_.updates_per_refresh; ++u) two_timescale_update();
        }
        counters_.records_merged += buffers_.merge();
        ratio_cache_valid_ = false;
        ++counters_.merge_events;
    }

    /// Appends a transition to D_L, running a refresh first if D_L is full.
    void observe_local(TransitionRecord r) {
        buffers_.add_local(std::move(r));
        if (buffers_.local_full()) refresh();
    }

    void observe_global(TransitionRecord r) {
        buffers_.add_global(std::move(r));
        ratio_cache_valid_ = false;
    }
    void observe_initial_state(std::vector<double> s0) { buffers_.add_initial_state(std::move(s0)); }

    std::vector<nn::CheckpointEntry> checkpoint() const {
        return {{"critic", critic_spec_, critic_, critic_adam_},
                {"actor", actor_spec_, actor_, actor_adam_},
                {"discriminator", discriminator_.spec(), discriminator_.params(), discriminator_.adam()}};
    }

    void restore(const std::vector<nn::CheckpointEntry>& entries) {
        for (const auto& e : entries) {
            if (e.name == "critic" && e.spec == critic_spec_) {
                critic_ = e.params;
                critic_adam_ = e.adam;
            } else if (e.name == "actor" && e.spec == actor_spec_) {
                actor_ = e.params;
                actor_adam_ = e.adam;
            } else if (e.name == "discriminator" && e.spec == discriminator_.spec()) {
                discriminator_.params() = e.params;
                discriminator_.adam() = e.adam;
            } else {
                throw std::invalid_argument("restore: entry '" + e.name + "' does not match this learner");
            }
        }
    }

    const AgentConfig& config() const { return config_; }
    const BufferSet& buffers() const { return buffers_; }
    const UpdateStats& stats() const { return stats_; }
    const TrainingCounters& counters() const { return counters_; }
    TrainingCounters& counters() { return counters_; }
    const nn::MlpSpec& critic_spec() const { return critic_spec_; }
    const nn::MlpSpec& actor_spec() const { return actor_spec_; }
    const nn::ParamVector& critic_params() const { return critic_; }
    const nn::ParamVector& actor_params() const { return actor_; }
    nn::ParamVector& critic_params() { return critic_; }
    nn::ParamVector& actor_params() { return actor_; }
    const ratio::Discriminator& discriminator() const { return discriminator_; }
    ratio::Discriminator& discriminator() { return discriminator_; }
    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t action_dim() const { return action_dim_; }

private:
    // R for every D_G record. The discriminator is frozen between its training
    // phases, so one pass per refresh replaces a forward pass per batch.
    void ensure_ratio_cache() {
        if (ratio_cache_valid_ && ratio_cache_.size() == buffers_.global().size()) return;
        const auto& global = buffers_.global();
        ratio_cache_.assign(global.size(), 0.0);
        if (config_.ablation != Ablation::no_discriminator) {
            const std::size_t chunk = 4096;
            const auto width = static_cast<Eigen::Index>(2 * obs_dim_ + action_dim_);
            for (std::size_t lo = 0; lo < global.size(); lo += chunk) {
                const std::size_t hi = std::min(global.size(), lo + chunk);
                nn::Matrix features(static_cast<Eigen::Index>(hi - lo), width);
                for (std::size_t k = lo; k < hi; ++k) {
                    const auto f = transition_features(global[k]);
                    for (Eigen::Index c = 0; c < width; ++c)
                        features(static_cast<Eigen::Index>(k - lo), c) = f[static_cast<std::size_t>(c)];
                }
                const auto r = ratio_for(features);
                std::copy(r.begin(), r.end(), ratio_cache_.begin() + static_cast<std::ptrdiff_t>(lo));
            }
        }
        ratio_cache_valid_ = true;
    }

    void record_ratio_stats(const std::vector<double>& r) {
        double sum = 0.0, sq = 0.0;
        for (double v : r) sum += v;
        const double mean = sum / static_cast<double>(r.size());
        for (double v : r) sq += (v - mean) * (v - mean);
        stats_.mean_R = mean;
        stats_.std_R = std::sqrt(sq / static_cast<double>(r.size()));
    }

    AgentConfig config_;
    std::size_t obs_dim_, action_dim_;
    Rng rng_;
    nn::MlpSpec critic_spec_, actor_spec_;
    nn::ParamVector critic_, actor_;
    nn::AdamState critic_adam_, actor_adam_;
    ratio::Discriminator discriminator_;
    BufferSet buffers_;
    UpdateStats stats_;
    TrainingCounters counters_;
    std::vector<double> ratio_cache_;
    bool ratio_cache_valid_ = false;
};

/// Snapshot handed to the per-step callback of run_algorithm1.
struct Algorithm1Progress {
    std::size_t env_step = 0;
    const OmpoLearner& learner;
    const env::EpisodeRunner& runner;  // target (or sole) environment
};

struct TrainingLog {
    TrainingCounters counters;
    UpdateStats final_stats;
    std::vector<double> episode_returns;  // completed training episodes, target environment
};

inline TransitionRecord to_record(const env::EpisodeRunner::Transition& t) {
    return {t.observation, t.action, t.next_observation, t.reward, t.terminal};
}

/// Runs Algorithm 1 for `total_steps` environment steps. `on_step` (optional)
/// is called once before the first step with env_step = 0 and after every step.
inline TrainingLog run_algorithm1(OmpoLearner& learner, const env::Environment& environment,
                                  const env::DynamicsSchedule& schedule, std::size_t total_steps, std::uint64_t seed,
                                  const std::function<void(const Algorithm1Progress&)>& on_step = {}) {
    schedule.validate();
    if (environment.obs_dim() != learner.obs_dim() || environment.action_dim() != learner.action_dim())
        throw std::invalid_argument("run_algorithm1: learner and environment dimensions differ");
    Rng seeds(seed);
    const bool adaptation = schedule.kind == env::ScenarioKind::domain_adaptation;
    env::EpisodeRunner main(environment, schedule, adaptation ? env::Domain::target : env::Domain::source,
                            seeds.split());
    std::optional<env::EpisodeRunner> source;
    if (adaptation) source.emplace(environment, schedule, env::Domain::source, seeds.split());

    TrainingLog log;
    learner.observe_initial_state(main.reset());
    if (source) learner.observe_initial_state(source->reset());
    if (on_step) on_step({0, learner, main});

    for (std::size_t step = 1; step <= total_steps; ++step) {
        if (source) {
            const auto a = learner.act(source->observation());
            const auto t = source->step(a);
            learner.observe_global(to_record(t));
            if (t.episode_end) learner.observe_initial_state(source->reset());
        }
        const auto a = learner.act(main.observation());
        const auto t = main.step(a);
        const double episode_return = main.episode_return();
        learner.counters().env_steps = step;
        learner.observe_local(to_record(t));
        if (t.episode_end) {
            log.episode_returns.push_back(episode_return);
            ++learner.counters().episodes;
            learner.observe_initial_state(main.reset());
        }
        if (on_step) on_step({step, learner, main});
    }
    log.counters = learner.counters();
    log.final_stats = learner.stats();
    return log;
}

}  // namespace ompo::agent
