#include "ompo/agent/buffers.hpp"
#include "ompo/agent/conjugate.hpp"
#include "ompo/agent/learner.hpp"
#include "ompo/agent/losses.hpp"
#include "ompo/harness/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ompo;
using namespace ompo::agent;

namespace {

AgentConfig small_config() {
    AgentConfig c;
    c.critic_hidden = {32, 32};
    c.actor_hidden = {32, 32};
    c.discriminator_hidden = {32, 32};
    c.batch = 64;
    c.initial_batch = 32;
    c.updates_per_refresh = 3;
    c.discriminator_steps = 4;
    c.local_capacity = 200;
    return c;
}

// Critic whose output is the constant c: all weights zero, final bias c.
nn::ParamVector constant_critic(const nn::MlpSpec& spec, double c) {
    nn::ParamVector p(spec.param_count());
    p[spec.param_count() - 1] = c;
    return p;
}

TransitionRecord random_record(Rng& rng, bool terminal = false) {
    return {{rng.normal(), rng.normal(), rng.normal(), rng.normal()},
            {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)},
            {rng.normal(), rng.normal(), rng.normal(), rng.normal()},
            rng.uniform(0.01, 1.0),
            terminal};
}

void fill_learner(OmpoLearner& l, Rng& rng, int n) {
    for (int i = 0; i < n; ++i) {
        l.observe_global(random_record(rng, i % 11 == 0));
        l.observe_initial_state({rng.normal(), rng.normal(), 0.0, 0.0});
    }
}

// Critic loss evaluated one record at a time through the scalar APIs.
double reference_critic_loss(const LossBatch& b, const NetworkView& nets, const AgentConfig& cfg) {
    auto q = [&](const std::vector<double>& s, const std::vector<double>& a) {
        std::vector<double> sa = s;
        sa.insert(sa.end(), a.begin(), a.end());
        return nn::mlp_forward(nets.critic_spec, nets.critic, sa)[0];
    };
    auto row = [](const nn::Matrix& m, Eigen::Index r) { return std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()); };
    auto pi = [&](const std::vector<double>& s, const std::vector<double>& noise) {
        return nn::policy_sample(nn::gaussian_head(nn::mlp_forward(nets.actor_spec, nets.actor, s)), noise).action;
    };
    double init = 0.0;
    for (Eigen::Index i = 0; i < b.initial_states.rows(); ++i) {
        const auto s0 = row(b.initial_states, i);
        init += q(s0, pi(s0, row(b.initial_noise, i)));
    }
    double conj = 0.0;
    for (Eigen::Index j = 0; j < b.states.rows(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        const auto s2 = row(b.next_states, j);
        const double psi = b.reward_term[k] - cfg.alpha * b.ratio[k] +
                           cfg.gamma * b.continuation[k] * q(s2, pi(s2, row(b.next_noise, j))) -
                           q(row(b.states, j), row(b.actions, j));
        conj += fenchel_star(psi / cfg.alpha, cfg.q_order, cfg.conjugate_extension);
    }
    return (1.0 - cfg.gamma) * init / static_cast<double>(b.initial_states.rows()) +
           cfg.alpha * conj / static_cast<double>(b.states.rows());
}

}  // namespace

// ---- conjugate pair ----

TEST(FenchelStar, Examples) {
    EXPECT_EQ(fenchel_star(0.0, 1.5), 0.0);
    EXPECT_NEAR(fenchel_star(1.0, 1.5), 5.0 / 3.0, 1e-15);
    for (auto ext : {ConjugateExtension::symmetric, ConjugateExtension::rectified}) {
        EXPECT_EQ(fenchel_star(0.0, 1.5, ext), 0.0);
        EXPECT_NEAR(fenchel_star(1.0, 1.5, ext), 5.0 / 3.0, 1e-15);
    }
}

TEST(FenchelStar, MatchesGridSupremumOnConvexBranch) {
    // sup_{y in [1, 10]} x y - (1/3)(y - 1)^3 for p = 3
    for (double x : {0.5, 1.0, 2.0, 5.0}) {
        double sup = -1e300;
        for (double y = 1.0; y <= 10.0; y += 1e-5) sup = std::max(sup, x * y - std::pow(y - 1.0, 3.0) / 3.0);
        EXPECT_NEAR(fenchel_star(x, 1.5), sup, 1e-3) << "x = " << x;
    }
}

TEST(FenchelStar, SymmetricExtensionIsConjugateOfAbsolutePower) {
    // f(y) = |y - 1|^3 / 3 on the whole line.
    for (double x : {-4.0, -1.0, -0.3, 0.7, 3.0}) {
        double sup = -1e300;
        for (double y = -10.0; y <= 10.0; y += 1e-4) sup = std::max(sup, x * y - std::pow(std::abs(y - 1.0), 3.0) / 3.0);
        EXPECT_NEAR(fenchel_star(x, 1.5, ConjugateExtension::symmetric), sup, 1e-3) << "x = " << x;
    }
}

TEST(FenchelStar, RectifiedExtensionIsLinearBelowZero) {
    for (double x : {-5.0, -1.0, -0.01}) {
        EXPECT_EQ(fenchel_star(x, 1.5, ConjugateExtension::rectified), x);
        EXPECT_EQ(fenchel_star_deriv(x, 1.5, ConjugateExtension::rectified), 1.0);
    }
}

TEST(FenchelStarDeriv, Examples) {
    EXPECT_EQ(fenchel_star_deriv(0.0, 1.5), 1.0);
    EXPECT_NEAR(fenchel_star_deriv(1.0, 1.5), 2.0, 1e-15);
}

TEST(FenchelStarDeriv, MatchesFiniteDifferences) {
    Rng rng(1);
    for (auto ext : {ConjugateExtension::symmetric, ConjugateExtension::rectified}) {
        for (int k = 0; k < 500; ++k) {
            const double x = k < 250 ? rng.uniform(1e-3, 50.0) : 0.1 * (k - 249);
            const double h = 1e-6 * std::max(1.0, x);
            const double fd = (fenchel_star(x + h, 1.5, ext) - fenchel_star(x - h, 1.5, ext)) / (2 * h);
            EXPECT_LT(harness::relative_error(fd, fenchel_star_deriv(x, 1.5, ext)), 1e-6) << x;
        }
        for (double x : {-7.0, -2.0, -0.5}) {
            const double h = 1e-6;
            const double fd = (fenchel_star(x + h, 1.5, ext) - fenchel_star(x - h, 1.5, ext)) / (2 * h);
            EXPECT_LT(harness::relative_error(fd, fenchel_star_deriv(x, 1.5, ext)), 1e-6);
        }
    }
}

TEST(FenchelStarSecondDeriv, MatchesFiniteDifferences) {
    for (auto ext : {ConjugateExtension::symmetric, ConjugateExtension::rectified})
        for (double x : {-3.0, -0.4, 0.2, 1.0, 9.0}) {
            const double h = 1e-6;
            const double fd = (fenchel_star_deriv(x + h, 1.5, ext) - fenchel_star_deriv(x - h, 1.5, ext)) / (2 * h);
            EXPECT_NEAR(fd, fenchel_star_second_deriv(x, 1.5, ext), 1e-6 * std::max(1.0, std::abs(fd)));
        }
}

TEST(FenchelStar, OrderMustExceedOne) {
    EXPECT_THROW(fenchel_star(1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(fenchel_star_deriv(1.0, 0.5), std::invalid_argument);
}

TEST(AgentConfig, DefaultsAndDualOrder) {
    const AgentConfig c;
    EXPECT_EQ(c.gamma, 0.99);
    EXPECT_EQ(c.alpha, 0.001);
    EXPECT_EQ(c.q_order, 1.5);
    EXPECT_EQ(c.batch, 256u);
    EXPECT_EQ(c.critic_lr, 3e-4);
    EXPECT_EQ(c.actor_lr, 1e-4);
    EXPECT_GT(c.critic_lr, c.actor_lr);
    EXPECT_EQ(c.critic_steps_per_actor_step, 5u);
    EXPECT_EQ(c.local_capacity, 1000u);
    EXPECT_EQ(c.global_capacity, 1'000'000u);
    EXPECT_NEAR(1.0 / c.p_order() + 1.0 / c.q_order, 1.0, 1e-15);
    EXPECT_EQ(c.resolved_discriminator_steps(), 16u);
    AgentConfig bad;
    bad.alpha = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = AgentConfig{};
    bad.q_order = 1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// ---- residual ----

TEST(ResidualPsi, Examples) {
    AgentConfig cfg;
    const nn::MlpSpec cs{6, 1, {8}, nn::Activation::elu}, as{4, 4, {8}, nn::Activation::elu};
    Rng rng(2);
    const auto actor = nn::init_params(as, rng);
    const std::vector<double> noise{0.3, -0.1};
    TransitionRecord rec{{0.1, 0.2, 0.3, 0.4}, {0.5, -0.5}, {1.0, 0.0, -1.0, 0.5}, 1.0, false};

    const auto zero = constant_critic(cs, 0.0);
    EXPECT_EQ(residual_psi(rec, 0.0, {cs, zero, as, actor}, cfg, noise), 0.0);

    const double c = 3.7;
    const auto constant = constant_critic(cs, c);
    rec.reward = std::numbers::e;
    EXPECT_NEAR(residual_psi(rec, 0.0, {cs, constant, as, actor}, cfg, noise), 1.0 - 0.01 * c, 1e-14);

    rec.reward = 1.0;
    rec.terminal = true;
    const auto two = constant_critic(cs, 2.0);
    EXPECT_NEAR(residual_psi(rec, 0.0, {cs, two, as, actor}, cfg, noise), -2.0, 1e-15);

    rec.reward = 0.0;
    EXPECT_THROW(residual_psi(rec, 0.0, {cs, two, as, actor}, cfg, noise), std::domain_error);
}

TEST(RewardTerm, LogAndRawVariants) {
    EXPECT_EQ(reward_term(1.0, Ablation::none), 0.0);
    EXPECT_EQ(reward_term(1.0, Ablation::raw_reward), 1.0);
    EXPECT_NEAR(reward_term(0.5, Ablation::no_discriminator), std::log(0.5), 1e-15);
    EXPECT_THROW(reward_term(0.0, Ablation::none), std::domain_error);
    EXPECT_THROW(reward_term(-1.0, Ablation::raw_reward), std::domain_error);
}

// ---- losses ----

TEST(CriticLoss, VanishesForZeroCriticUnitRewardZeroRatio) {
    AgentConfig cfg;
    Rng rng(3);
    const nn::MlpSpec cs{6, 1, {8}, nn::Activation::elu}, as{4, 4, {8}, nn::Activation::elu};
    const auto critic = constant_critic(cs, 0.0);
    const auto actor = nn::init_params(as, rng);
    auto batch = harness::random_loss_batch(4, 2, 16, 8, rng);
    std::fill(batch.reward_term.begin(), batch.reward_term.end(), reward_term(1.0, cfg.ablation));
    std::fill(batch.ratio.begin(), batch.ratio.end(), 0.0);
    EXPECT_EQ(critic_loss_and_grad(batch, {cs, critic, as, actor}, cfg).loss, 0.0);
}

TEST(CriticLoss, MatchesRecordByRecordEvaluation) {
    Rng rng(4);
    const nn::MlpSpec cs{6, 1, {16, 16}, nn::Activation::elu}, as{4, 4, {16, 16}, nn::Activation::elu};
    const auto critic = nn::init_params(cs, rng), actor = nn::init_params(as, rng);
    const NetworkView nets{cs, critic, as, actor};
    auto batch = harness::random_loss_batch(4, 2, 24, 12, rng);
    for (double alpha : {0.001, 0.002, 0.5, 1.0}) {
        AgentConfig cfg;
        cfg.alpha = alpha;
        const double got = critic_loss_and_grad(batch, nets, cfg).loss;
        EXPECT_NEAR(got, reference_critic_loss(batch, nets, cfg), 1e-9 * std::max(1.0, std::abs(got))) << alpha;
    }
}

TEST(CriticLoss, ZeroRatioReductionMatchesDirectFormula) {
    Rng rng(5);
    const nn::MlpSpec cs{6, 1, {16}, nn::Activation::elu}, as{4, 4, {16}, nn::Activation::elu};
    const auto critic = nn::init_params(cs, rng), actor = nn::init_params(as, rng);
    const NetworkView nets{cs, critic, as, actor};
    auto batch = harness::random_loss_batch(4, 2, 20, 10, rng);
    std::fill(batch.ratio.begin(), batch.ratio.end(), 0.0);
    AgentConfig cfg;
    cfg.alpha = 0.1;
    const double got = critic_loss_and_grad(batch, nets, cfg).loss;
    EXPECT_NEAR(got, reference_critic_loss(batch, nets, cfg), 1e-12 * std::max(1.0, std::abs(got)));
}

TEST(CriticLoss, GradientMatchesFiniteDifference) {
    Rng rng(6);
    for (int k = 0; k < 5; ++k) {
        AgentConfig cfg;
        cfg.alpha = 0.05;
        const nn::MlpSpec cs{6, 1, {16, 16}, nn::Activation::elu}, as{4, 4, {16, 16}, nn::Activation::elu};
        auto critic = nn::init_params(cs, rng);
        const auto actor = nn::init_params(as, rng);
        const auto batch = harness::random_loss_batch(4, 2, 32, 16, rng);
        const NetworkView nets{cs, critic, as, actor};
        const auto g = critic_loss_and_grad(batch, nets, cfg).grad;
        EXPECT_LT(harness::coordinate_gradient_check(critic, g, [&] { return critic_loss_and_grad(batch, nets, cfg).loss; },
                                                     20, rng),
                  1e-4);
    }
}

TEST(ActorLoss, GradientMatchesFiniteDifference) {
    Rng rng(7);
    for (auto objective : {ActorObjective::derivative, ActorObjective::dual})
        for (int k = 0; k < 5; ++k) {
            AgentConfig cfg;
            cfg.alpha = 0.05;
            cfg.actor_objective = objective;
            const nn::MlpSpec cs{6, 1, {16, 16}, nn::Activation::elu}, as{4, 4, {16, 16}, nn::Activation::elu};
            const auto critic = nn::init_params(cs, rng);
            auto actor = nn::init_params(as, rng);
            const auto batch = harness::random_loss_batch(4, 2, 32, 16, rng);
            const NetworkView nets{cs, critic, as, actor};
            const auto g = actor_loss_and_grad(batch, nets, cfg).grad;
            EXPECT_LT(harness::coordinate_gradient_check(actor, g, [&] { return actor_loss_and_grad(batch, nets, cfg).loss; },
                                                         20, rng),
                      1e-4);
        }
}

TEST(ActorLoss, FlatForZeroCritic) {
    Rng rng(8);
    AgentConfig cfg;
    const nn::MlpSpec cs{6, 1, {8}, nn::Activation::elu}, as{4, 4, {8}, nn::Activation::elu};
    const auto critic = constant_critic(cs, 0.0);
    const auto actor = nn::init_params(as, rng);
    auto batch = harness::random_loss_batch(4, 2, 16, 8, rng);
    std::fill(batch.reward_term.begin(), batch.reward_term.end(), 0.0);
    std::fill(batch.ratio.begin(), batch.ratio.end(), 0.0);
    const auto g = actor_loss_and_grad(batch, {cs, critic, as, actor}, cfg).grad;
    EXPECT_EQ(g.map().cwiseAbs().maxCoeff(), 0.0);
}

TEST(ActorLoss, SinglePrecisionPathTracksDouble) {
    Rng rng(9);
    AgentConfig cfg;
    cfg.alpha = 0.05;
    const nn::MlpSpec cs{6, 1, {64, 64}, nn::Activation::elu}, as{4, 4, {64, 64}, nn::Activation::elu};
    const auto critic = nn::init_params(cs, rng), actor = nn::init_params(as, rng);
    const auto batch = harness::random_loss_batch(4, 2, 64, 32, rng);
    const NetworkView nets{cs, critic, as, actor};
    const auto cd = critic_loss_and_grad<double>(batch, nets, cfg), cf = critic_loss_and_grad<float>(batch, nets, cfg);
    const auto ad = actor_loss_and_grad<double>(batch, nets, cfg), af = actor_loss_and_grad<float>(batch, nets, cfg);
    EXPECT_NEAR(cf.loss, cd.loss, 1e-3 * std::max(1.0, std::abs(cd.loss)));
    EXPECT_LT((cf.grad.map() - cd.grad.map()).norm() / cd.grad.map().norm(), 1e-3);
    EXPECT_LT((af.grad.map() - ad.grad.map()).norm() / ad.grad.map().norm(), 1e-3);
}

TEST(ActorLoss, BanditMeanMovesToOptimum) {
    // Single state s = 0, one action dimension, critic fitted to Q(s, a) = -(a - 0.5)^2.
    Rng rng(10);
    const nn::MlpSpec cs{2, 1, {32, 32}, nn::Activation::elu}, as{1, 2, {16}, nn::Activation::elu};
    auto critic = nn::init_params(cs, rng);
    nn::AdamState cadam(critic.size(), 3e-3);
    for (int step = 0; step < 3000; ++step) {
        nn::Matrix x(64, 2), dy(64, 1);
        for (int i = 0; i < 64; ++i) {
            x(i, 0) = 0.0;
            x(i, 1) = rng.uniform(-1.0, 1.0);
        }
        nn::MlpCache cache;
        const nn::Matrix y = nn::mlp_forward(cs, critic, x, &cache);
        for (int i = 0; i < 64; ++i) dy(i, 0) = 2.0 * (y(i, 0) + (x(i, 1) - 0.5) * (x(i, 1) - 0.5)) / 64.0;
        nn::adam_step(critic, nn::mlp_backward(cs, critic, cache, dy).params, cadam);
    }
    EXPECT_NEAR(nn::mlp_forward(cs, critic, std::vector<double>{0.0, 0.5})[0], 0.0, 0.02);

    AgentConfig cfg;
    cfg.gamma = 0.5;
    auto actor = nn::init_params(as, rng);
    nn::AdamState aadam(actor.size(), 1e-2);
    for (int step = 0; step < 400; ++step) {
        LossBatch b;
        b.states = nn::Matrix::Zero(8, 1);
        b.actions = nn::Matrix::Zero(8, 1);
        b.next_states = nn::Matrix::Zero(8, 1);
        b.reward_term.assign(8, 0.0);
        b.ratio.assign(8, 0.0);
        b.continuation.assign(8, 0.0);  // bandit: no bootstrap
        b.next_noise = nn::Matrix::Zero(8, 1);
        b.initial_states = nn::Matrix::Zero(32, 1);
        b.initial_noise.resize(32, 1);
        for (int i = 0; i < 32; ++i) b.initial_noise(i, 0) = rng.normal();
        nn::adam_step(actor, actor_loss_and_grad(b, {cs, critic, as, actor}, cfg).grad, aadam);
    }
    const auto raw = nn::mlp_forward(as, actor, std::vector<double>{0.0});
    EXPECT_NEAR(std::tanh(raw[0]), 0.5, 0.05);
    EXPECT_LT(raw[1], -1.0);  // the policy also narrows around the optimum
}

TEST(LossBatch, InconsistentSizesAreRejected) {
    Rng rng(11);
    auto batch = harness::random_loss_batch(4, 2, 8, 4, rng);
    batch.ratio.pop_back();
    EXPECT_THROW(batch.validate(), std::invalid_argument);
    auto empty = harness::random_loss_batch(4, 2, 8, 4, rng);
    empty.initial_states.resize(0, 4);
    empty.initial_noise.resize(0, 2);
    EXPECT_THROW(empty.validate(), std::invalid_argument);
}

// ---- buffers ----

TEST(BufferSet, MergeConservesRecordsAndEmptiesLocal) {
    BufferSet b(5, 100);
    Rng rng(12);
    for (int i = 0; i < 7; ++i) b.add_global(random_record(rng));
    std::vector<TransitionRecord> added;
    for (int i = 0; i < 5; ++i) {
        added.push_back(random_record(rng));
        b.add_local(added.back());
    }
    EXPECT_TRUE(b.local_full());
    EXPECT_THROW(b.add_local(random_record(rng)), std::logic_error);
    EXPECT_EQ(b.merge(), 5u);
    EXPECT_EQ(b.local().size(), 0u);
    ASSERT_EQ(b.global().size(), 12u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(b.global()[7 + i], added[i]);
}

TEST(BufferSet, GlobalRingEvictsOldest) {
    BufferSet b(2, 3);
    Rng rng(13);
    std::vector<TransitionRecord> all;
    for (int i = 0; i < 5; ++i) {
        all.push_back(random_record(rng));
        b.add_global(all.back());
    }
    ASSERT_EQ(b.global().size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(b.global()[i], all[2 + i]);
}

TEST(BufferSet, NonPositiveRewardsRejectedAtIngestion) {
    BufferSet b;
    TransitionRecord r{{0.0}, {0.0}, {0.0}, 0.0, false};
    EXPECT_THROW(b.add_local(r), std::domain_error);
    r.reward = -0.5;
    EXPECT_THROW(b.add_global(r), std::domain_error);
    EXPECT_EQ(b.local().size() + b.global().size(), 0u);
}

// ---- learner ----

TEST(Learner, OneCriticAndOneActorStepPerCall) {
    auto cfg = small_config();
    cfg.critic_steps_per_actor_step = 1;
    OmpoLearner l(4, 2, cfg, 1);
    Rng rng(14);
    fill_learner(l, rng, 300);
    l.two_timescale_update();
    EXPECT_EQ(l.counters().critic_steps, 1u);
    EXPECT_EQ(l.counters().actor_steps, 1u);
    cfg.critic_steps_per_actor_step = 5;
    OmpoLearner m(4, 2, cfg, 1);
    fill_learner(m, rng, 300);
    m.two_timescale_update();
    EXPECT_EQ(m.counters().critic_steps, 5u);
    EXPECT_EQ(m.counters().actor_steps, 1u);
}

TEST(Learner, InsufficientDataIsAnError) {
    OmpoLearner l(4, 2, small_config(), 1);
    EXPECT_THROW(l.two_timescale_update(), std::logic_error);
}

TEST(Learner, FixedSeedAndDataGiveBitIdenticalTrajectories) {
    auto run = [](Precision precision) {
        auto cfg = small_config();
        cfg.precision = precision;
        OmpoLearner l(4, 2, cfg, 77);
        Rng rng(15);
        fill_learner(l, rng, 300);
        for (int i = 0; i < 3; ++i) l.two_timescale_update();
        return std::make_pair(l.critic_params(), l.actor_params());
    };
    for (auto precision : {Precision::single, Precision::double_}) EXPECT_EQ(run(precision), run(precision));
}

TEST(Learner, RatioFollowsDiscriminatorSign) {
    OmpoLearner l(4, 2, small_config(), 3);
    Rng rng(16);
    nn::Matrix f(5, 10);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();
    const auto r = l.ratio_for(f);
    const auto g = l.discriminator().log_ratio(f);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], -g[i]);
}

TEST(Learner, BatchRatiosUseTheFrozenDiscriminator) {
    OmpoLearner l(4, 2, small_config(), 5);
    Rng rng(17);
    fill_learner(l, rng, 50);
    const auto batch = l.sample_loss_batch();
    nn::Matrix f(batch.states.rows(), 10);
    f << batch.states, batch.actions, batch.next_states;
    const auto expected = l.ratio_for(f);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(batch.ratio[i], expected[i]);
}

TEST(Ablation, NoDiscriminatorZeroesRatioAndSkipsTraining) {
    auto cfg = small_config();
    cfg.ablation = Ablation::no_discriminator;
    OmpoLearner l(4, 2, cfg, 4);
    Rng rng(18);
    fill_learner(l, rng, 100);
    for (int i = 0; i < 200; ++i) l.observe_local(random_record(rng));
    EXPECT_EQ(l.counters().refreshes, 1u);
    EXPECT_EQ(l.counters().discriminator_steps, 0u);
    EXPECT_EQ(l.stats().mean_R, 0.0);
    EXPECT_EQ(l.stats().std_R, 0.0);
    const auto batch = l.sample_loss_batch();
    for (double r : batch.ratio) EXPECT_EQ(r, 0.0);
}

TEST(Ablation, RawRewardUsesRewardItself) {
    auto cfg = small_config();
    cfg.ablation = Ablation::raw_reward;
    OmpoLearner l(4, 2, cfg, 4);
    l.observe_global({{0, 0, 0, 0}, {0, 0}, {0, 0, 0, 0}, 1.0, false});
    l.observe_initial_state({0, 0, 0, 0});
    const auto batch = l.sample_loss_batch();
    for (double t : batch.reward_term) EXPECT_EQ(t, 1.0);
}

TEST(Ablation, ZeroRatioShiftsResidualByAtMostClampBound) {
    AgentConfig cfg;
    const nn::MlpSpec cs{6, 1, {8}, nn::Activation::elu}, as{4, 4, {8}, nn::Activation::elu};
    Rng rng(19);
    const auto critic = nn::init_params(cs, rng), actor = nn::init_params(as, rng);
    for (int k = 0; k < 50; ++k) {
        const auto rec = random_record(rng);
        const std::vector<double> noise{rng.normal(), rng.normal()};
        const double h = rng.uniform();
        const double with = residual_psi(rec, -ratio::recover_ratio(h), {cs, critic, as, actor}, cfg, noise);
        const double without = residual_psi(rec, 0.0, {cs, critic, as, actor}, cfg, noise);
        EXPECT_LE(std::abs(with - without), cfg.alpha * 13.82);
    }
}

TEST(Algorithm1, RefreshCountAndMergeAccounting) {
    auto cfg = small_config();
    cfg.local_capacity = 1000;
    cfg.updates_per_refresh = 1;
    OmpoLearner l(4, 2, cfg, 6);
    const auto env = env::Environment::make("point_mass");
    bool checked = false;
    const auto log = run_algorithm1(l, env, env::stationary_schedule(), 5000, 7, [&](const Algorithm1Progress& p) {
        const auto& b = p.learner.buffers();
        EXPECT_LE(b.local().size(), 1000u);
        if (!checked && p.learner.counters().merge_events == 1) {
            // D_G was empty before the first merge, so it now holds exactly the first D_L.
            EXPECT_EQ(p.env_step, 1000u);
            EXPECT_EQ(b.local().size(), 0u);
            EXPECT_EQ(b.global().size(), 1000u);
            checked = true;
        }
    });
    EXPECT_TRUE(checked);
    EXPECT_EQ(log.counters.refreshes, 5u);
    EXPECT_EQ(log.counters.merge_events, 5u);
    EXPECT_EQ(log.counters.records_merged, 5000u);
    EXPECT_EQ(log.counters.discriminator_trainings, 4u);  // nothing to contrast before the first merge
    EXPECT_EQ(log.counters.env_steps, 5000u);
    EXPECT_EQ(log.counters.episodes, 25u);
    EXPECT_EQ(l.buffers().initial_states().size(), 26u);
}

TEST(Algorithm1, DomainAdaptationKeepsSourceOutOfLocalBuffer) {
    auto cfg = small_config();
    cfg.updates_per_refresh = 1;
    OmpoLearner l(4, 2, cfg, 8);
    const auto env = env::Environment::make("point_mass");
    const auto schedule = env::domain_adaptation_schedule();
    // Every local record must be reproducible under the target dynamics.
    std::size_t checked = 0;
    run_algorithm1(l, env, schedule, 1100, 9, [&](const Algorithm1Progress& p) {
        for (const auto& r : p.learner.buffers().local()) {
            const auto next = env.step({r.state, 0, 0}, r.action, schedule.target).next.x;
            ASSERT_EQ(next, r.next_state);
            ++checked;
        }
    });
    EXPECT_GT(checked, 0u);
    const auto& c = l.counters();
    EXPECT_EQ(l.buffers().global().size(), 1100u + c.records_merged);
    EXPECT_EQ(l.buffers().local().size(), 1100u - c.records_merged);
}

TEST(Algorithm1, RejectsMismatchedEnvironment) {
    OmpoLearner l(3, 1, small_config(), 1);
    EXPECT_THROW(run_algorithm1(l, env::Environment::make("point_mass"), env::stationary_schedule(), 10, 1),
                 std::invalid_argument);
}

TEST(Learner, CheckpointRoundTrip) {
    OmpoLearner a(4, 2, small_config(), 21), b(4, 2, small_config(), 22);
    EXPECT_NE(a.critic_params(), b.critic_params());
    b.restore(a.checkpoint());
    EXPECT_EQ(a.critic_params(), b.critic_params());
    EXPECT_EQ(a.actor_params(), b.actor_params());
    EXPECT_EQ(a.discriminator().params(), b.discriminator().params());
    OmpoLearner c(3, 2, small_config(), 1);
    EXPECT_THROW(c.restore(a.checkpoint()), std::invalid_argument);
}
