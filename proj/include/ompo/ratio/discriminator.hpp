#pragma once

// Buffer-membership classifier h(s,a,s') and the log occupancy ratio it encodes.
//
// Label convention: h is trained towards 1 on global-buffer samples and towards
// 0 on local-buffer samples by ascending
//     mean_G ln h + mean_L ln(1 - h),
// whose maximizer is h* = rho_G / (rho_G + rho_L). recover_ratio(h) therefore
// returns ln(rho_G / rho_L); the learner uses its negation ln(rho_L / rho_G),
// i.e. log(on-policy / buffer).

#include "ompo/nn/adam.hpp"
#include "ompo/nn/mlp.hpp"
#include "ompo/random.hpp"
#include "ompo/transition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ompo::ratio {

inline constexpr double kRatioClamp = 1e-6;

/// -ln(1/h - 1) with h clamped to [1e-6, 1 - 1e-6]; |result| <= ~13.8155.
inline double recover_ratio(double h) {
    const double hc = std::clamp(h, kRatioClamp, 1.0 - kRatioClamp);
    return -std::log(1.0 / hc - 1.0);
}

inline double max_abs_ratio() { return recover_ratio(1.0); }

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct DiscriminatorBatch {
    nn::Matrix global;  // rows are [s; a; s'] feature vectors
    nn::Matrix local;
};

struct DiscriminatorLoss {
    double objective = 0.0;  // mean_G ln h + mean_L ln(1-h)
    nn::ParamVector grad;    // d objective / d params
};

inline DiscriminatorLoss discriminator_loss_and_grad(const nn::MlpSpec& spec, const nn::ParamVector& params,
                                                     const DiscriminatorBatch& batch) {
    if (batch.global.rows() == 0 || batch.local.rows() == 0)
        throw std::invalid_argument("discriminator_loss_and_grad: empty side of batch");
    if (spec.output_dim != 1) throw std::invalid_argument("discriminator_loss_and_grad: output_dim must be 1");
    const auto n_g = batch.global.rows(), n_l = batch.local.rows();
    nn::Matrix x(n_g + n_l, batch.global.cols());
    x.topRows(n_g) = batch.global;
    x.bottomRows(n_l) = batch.local;

    nn::MlpCache cache;
    const nn::Matrix logits = nn::mlp_forward(spec, params, x, &cache);
    nn::Matrix dz(x.rows(), 1);
    double sum_g = 0.0, sum_l = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double z = logits(i, 0);
        if (i < n_g) {
            // ln h = -softplus(-z), d/dz = 1 - h
            sum_g += z < 0.0 ? z - std::log1p(std::exp(z)) : -std::log1p(std::exp(-z));
            dz(i, 0) = sigmoid(-z) / static_cast<double>(n_g);
        } else {
            // ln(1-h) = -softplus(z), d/dz = -h
            sum_l += z > 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
            dz(i, 0) = -sigmoid(z) / static_cast<double>(n_l);
        }
    }
    DiscriminatorLoss out;
    out.objective = sum_g / static_cast<double>(n_g) + sum_l / static_cast<double>(n_l);
    out.grad = nn::mlp_backward(spec, params, cache, dz).params;
    return out;
}

/// Draws |D_L| samples from each side: with replacement from the global buffer,
/// and a random permutation of the whole local buffer.
template <class GlobalBuffer, class LocalBuffer>
DiscriminatorBatch balanced_batch_sampler(const GlobalBuffer& global, const LocalBuffer& local, Rng& rng) {
    if (global.size() == 0 || local.size() == 0) throw std::invalid_argument("balanced_batch_sampler: empty buffer");
    const std::size_t n = local.size();
    const std::size_t dim = transition_features(local[0]).size();
    DiscriminatorBatch batch{nn::Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)),
                             nn::Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim))};
    auto put_row = [dim](nn::Matrix& m, std::size_t row, const TransitionRecord& r) {
        const auto f = transition_features(r);
        if (f.size() != dim) throw std::invalid_argument("balanced_batch_sampler: inconsistent feature width");
        for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = f[c];
    };
    for (std::size_t i = 0; i < n; ++i) put_row(batch.global, i, global[rng.index(global.size())]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t i = 0; i < n; ++i) put_row(batch.local, i, local[order[i]]);
    return batch;
}

/// Discriminator network with its optimizer state.
class Discriminator {
public:
    Discriminator(nn::MlpSpec spec, double learning_rate, Rng& rng)
        : spec_(std::move(spec)), params_(nn::init_params(spec_, rng)), adam_(params_.size(), learning_rate) {
        if (spec_.output_dim != 1) throw std::invalid_argument("Discriminator: output_dim must be 1");
    }

    static nn::MlpSpec default_spec(std::size_t feature_dim) {
        return {feature_dim, 1, {256, 256}, nn::Activation::tanh};
    }

    /// One ascent step on the batch objective; returns the objective before the step.
    double train_step(const DiscriminatorBatch& batch) {
        auto loss = discriminator_loss_and_grad(spec_, params_, batch);
        loss.grad.map() *= -1.0;
        nn::adam_step(params_, loss.grad, adam_);
        return loss.objective;
    }

    /// h for each feature row.
    std::vector<double> probability(const nn::Matrix& features) const {
        const nn::Matrix z = nn::mlp_forward(spec_, params_, features);
        std::vector<double> h(static_cast<std::size_t>(z.rows()));
        for (Eigen::Index i = 0; i < z.rows(); ++i) h[static_cast<std::size_t>(i)] = sigmoid(z(i, 0));
        return h;
    }

    /// ln(rho_G / rho_L) estimate per feature row.
    std::vector<double> log_ratio(const nn::Matrix& features) const {
        auto h = probability(features);
        for (auto& v : h) v = recover_ratio(v);
        return h;
    }

    const nn::MlpSpec& spec() const { return spec_; }
    const nn::ParamVector& params() const { return params_; }
    nn::ParamVector& params() { return params_; }
    const nn::AdamState& adam() const { return adam_; }
    nn::AdamState& adam() { return adam_; }

private:
    nn::MlpSpec spec_;
    nn::ParamVector params_;
    nn::AdamState adam_;
};

}  // namespace ompo::ratio
