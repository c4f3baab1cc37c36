#include "ompo/agent/buffers.hpp"
#include "ompo/harness/verify.hpp"
#include "ompo/ratio/discriminator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace ompo;
using namespace ompo::ratio;

namespace {

TransitionRecord record(double s, double a, double s2) { return {{s}, {a}, {s2}, 0.5, false}; }

// Rows of one-hot features with multiplicities proportional to `weights`
// (integers), so the batch objective is the exact population objective.
nn::Matrix categorical_rows(const std::vector<int>& weights) {
    int n = 0;
    for (int w : weights) n += w;
    nn::Matrix m = nn::Matrix::Zero(n, static_cast<Eigen::Index>(weights.size()));
    int row = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
        for (int i = 0; i < weights[k]; ++i) m(row++, static_cast<Eigen::Index>(k)) = 1.0;
    return m;
}

std::vector<double> train_categorical(const DiscriminatorBatch& batch, int steps) {
    Rng rng(5);
    Discriminator d({4, 1, {32}, nn::Activation::tanh}, 1e-2, rng);
    for (int i = 0; i < steps; ++i) d.train_step(batch);
    return d.log_ratio(nn::Matrix::Identity(4, 4));
}

}  // namespace

TEST(RecoverRatio, Examples) {
    EXPECT_EQ(recover_ratio(0.5), 0.0);
    EXPECT_NEAR(recover_ratio(0.75), std::log(3.0), 1e-15);
    EXPECT_NEAR(recover_ratio(0.75), 1.09861, 1e-5);
    EXPECT_NEAR(recover_ratio(1.0 - 1e-7), std::log((1.0 - 1e-6) / 1e-6), 1e-9);
    EXPECT_NEAR(recover_ratio(1.0 - 1e-7), 13.8155, 1e-4);
    EXPECT_NEAR(recover_ratio(0.0), -max_abs_ratio(), 1e-10);
}

TEST(RecoverRatio, StrictlyIncreasingOnClampedDomain) {
    double prev = recover_ratio(1e-6);
    for (int k = 1; k <= 1000; ++k) {
        const double h = 1e-6 + (1.0 - 2e-6) * k / 1000.0;
        const double r = recover_ratio(h);
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(DiscriminatorLoss, HalfEverywhereGivesTwoLogHalf) {
    const nn::MlpSpec spec{3, 1, {4}, nn::Activation::tanh};
    const nn::ParamVector zero(spec.param_count());  // logit 0, h = 0.5
    DiscriminatorBatch batch{nn::Matrix::Random(7, 3), nn::Matrix::Random(5, 3)};
    const auto loss = discriminator_loss_and_grad(spec, zero, batch);
    EXPECT_NEAR(loss.objective, 2.0 * std::log(0.5), 1e-15);
    EXPECT_NEAR(loss.objective, -1.38629, 1e-5);
}

TEST(DiscriminatorLoss, GradientMatchesFiniteDifference) {
    Rng rng(2);
    const nn::MlpSpec spec{3, 1, {8, 8}, nn::Activation::tanh};
    auto params = nn::init_params(spec, rng);
    DiscriminatorBatch batch{nn::Matrix::Random(6, 3), nn::Matrix::Random(6, 3).array() + 0.5};
    const auto g = discriminator_loss_and_grad(spec, params, batch).grad;
    const double worst = harness::coordinate_gradient_check(
        params, g, [&] { return discriminator_loss_and_grad(spec, params, batch).objective; }, 30, rng);
    EXPECT_LT(worst, 1e-6);
}

TEST(DiscriminatorLoss, EmptySideIsAnError) {
    const nn::MlpSpec spec{2, 1, {4}, nn::Activation::tanh};
    const nn::ParamVector p(spec.param_count());
    EXPECT_THROW(discriminator_loss_and_grad(spec, p, {nn::Matrix(0, 2), nn::Matrix::Ones(3, 2)}),
                 std::invalid_argument);
    EXPECT_THROW(discriminator_loss_and_grad(spec, p, {nn::Matrix::Ones(3, 2), nn::Matrix(0, 2)}),
                 std::invalid_argument);
}

TEST(Discriminator, OutputStaysInsideUnitInterval) {
    Rng rng(3);
    Discriminator d({2, 1, {16}, nn::Activation::tanh}, 1e-3, rng);
    nn::Matrix x = 50.0 * nn::Matrix::Random(200, 2);
    for (double h : d.probability(x)) {
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, 1.0);
    }
    for (double r : d.log_ratio(x)) EXPECT_LE(std::abs(r), max_abs_ratio());
}

TEST(Discriminator, RecoversCategoricalLogRatio) {
    const std::vector<int> g{1, 2, 3, 4}, l{4, 3, 2, 1};
    const auto r = train_categorical({categorical_rows(g), categorical_rows(l)}, 3000);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(r[k], std::log(static_cast<double>(g[k]) / l[k]), 0.05) << "point " << k;
}

TEST(Discriminator, SwappingSidesNegatesRatio) {
    const std::vector<int> g{1, 2, 3, 4}, l{4, 3, 2, 1};
    const auto forward = train_categorical({categorical_rows(g), categorical_rows(l)}, 3000);
    const auto swapped = train_categorical({categorical_rows(l), categorical_rows(g)}, 3000);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(forward[k], -swapped[k], 0.05);
}

TEST(Discriminator, IdenticalDistributionsGiveNearZeroRatio) {
    Rng rng(4);
    Discriminator d({2, 1, {32, 32}, nn::Activation::tanh}, 1e-3, rng);
    for (int step = 0; step < 1500; ++step) {
        DiscriminatorBatch b{nn::Matrix(256, 2), nn::Matrix(256, 2)};
        for (Eigen::Index i = 0; i < b.global.size(); ++i) {
            b.global.data()[i] = rng.normal();
            b.local.data()[i] = rng.normal();
        }
        d.train_step(b);
    }
    nn::Matrix probe(500, 2);
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();
    double mean_abs = 0.0;
    for (double r : d.log_ratio(probe)) mean_abs += std::abs(r);
    EXPECT_LT(mean_abs / 500.0, 0.05);
}

TEST(BalancedBatchSampler, SizesFollowLocalBuffer) {
    agent::RingBuffer<TransitionRecord> global(1'000'000);
    std::vector<TransitionRecord> local;
    for (int i = 0; i < 5000; ++i) global.push(record(i, 0.1, i + 1));
    for (int i = 0; i < 1000; ++i) local.push_back(record(-i, 0.2, -i - 1));
    Rng rng(1);
    const auto b = balanced_batch_sampler(global, local, rng);
    EXPECT_EQ(b.global.rows(), 1000);
    EXPECT_EQ(b.local.rows(), 1000);
    EXPECT_EQ(b.global.cols(), 3);
    // local side is a permutation of the whole local buffer
    std::set<double> seen;
    for (Eigen::Index i = 0; i < 1000; ++i) seen.insert(b.local(i, 0));
    EXPECT_EQ(seen.size(), 1000u);
}

TEST(BalancedBatchSampler, SingleGlobalRecordRepeats) {
    agent::RingBuffer<TransitionRecord> global(10);
    global.push(record(7, 0.3, 8));
    std::vector<TransitionRecord> local{record(1, 0, 2), record(2, 0, 3), record(3, 0, 4)};
    Rng rng(2);
    const auto b = balanced_batch_sampler(global, local, rng);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(b.global(i, 0), 7.0);
}

TEST(BalancedBatchSampler, SeededCompositionIsReproducible) {
    agent::RingBuffer<TransitionRecord> global(100);
    std::vector<TransitionRecord> local;
    for (int i = 0; i < 100; ++i) global.push(record(i, 0, i));
    for (int i = 0; i < 20; ++i) local.push_back(record(-i, 0, -i));
    Rng a(9), b(9);
    const auto x = balanced_batch_sampler(global, local, a);
    const auto y = balanced_batch_sampler(global, local, b);
    EXPECT_EQ(x.global, y.global);
    EXPECT_EQ(x.local, y.local);
}

TEST(BalancedBatchSampler, EmptyBufferIsAnError) {
    agent::RingBuffer<TransitionRecord> global(10);
    std::vector<TransitionRecord> local{record(1, 0, 2)};
    Rng rng(3);
    EXPECT_THROW(balanced_batch_sampler(global, local, rng), std::invalid_argument);
    global.push(record(1, 0, 1));
    local.clear();
    EXPECT_THROW(balanced_batch_sampler(global, local, rng), std::invalid_argument);
}
