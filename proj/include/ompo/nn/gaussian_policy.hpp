#pragma once

// Tanh-squashed diagonal Gaussian policy head.
//
// The actor network emits 2d outputs per state: the first d are the mean, the
// last d the unclipped log standard deviation (two affine heads on a shared
// trunk). Actions are a = tanh(mean + exp(log_std) * noise).

#include "ompo/nn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ompo::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
// Pre-squash values are clamped here so tanh stays strictly inside (-1, 1).
inline constexpr double kMaxPreTanh = 15.0;

struct GaussianHeadOutput {
    std::vector<double> mean;
    std::vector<double> log_std;  // clipped to [kLogStdMin, kLogStdMax]
};

/// Splits a raw actor output row into mean and clipped log-std.
inline GaussianHeadOutput gaussian_head(std::span<const double> raw) {
    if (raw.size() % 2 != 0) throw std::invalid_argument("gaussian_head: odd output width");
    const std::size_t d = raw.size() / 2;
    GaussianHeadOutput h{{raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(d)}, std::vector<double>(d)};
    for (std::size_t i = 0; i < d; ++i) h.log_std[i] = std::clamp(raw[d + i], kLogStdMin, kLogStdMax);
    return h;
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// ln(1 - tanh(u)^2) evaluated without cancellation.
inline double log_one_minus_tanh_sq(double u) {
    return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

struct PolicySample {
    std::vector<double> action;
    double log_prob = 0.0;
};

inline double gaussian_log_density(double noise, double log_std) {
    return -0.5 * noise * noise - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Reparameterized sample a = tanh(mean + std * noise) with the change-of-variables
/// corrected log-density.
inline PolicySample policy_sample(const GaussianHeadOutput& head, std::span<const double> noise) {
    const std::size_t d = head.mean.size();
    if (noise.size() != d || head.log_std.size() != d) throw std::invalid_argument("policy_sample: dimension mismatch");
    PolicySample out{std::vector<double>(d), 0.0};
    for (std::size_t i = 0; i < d; ++i) {
        const double log_std = std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
        const double u = std::clamp(head.mean[i] + std::exp(log_std) * noise[i], -kMaxPreTanh, kMaxPreTanh);
        out.action[i] = std::tanh(u);
        out.log_prob += gaussian_log_density(noise[i], log_std) - log_one_minus_tanh_sq(u);
    }
    return out;
}

/// Log-density of a squashed action; |a_i| must be strictly below 1.
inline double policy_log_prob(const GaussianHeadOutput& head, std::span<const double> action) {
    const std::size_t d = head.mean.size();
    if (action.size() != d) throw std::invalid_argument("policy_log_prob: dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double a = action[i];
        if (!(std::abs(a) < 1.0)) throw std::domain_error("policy_log_prob: action on or beyond the boundary");
        const double log_std = std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
        const double u = std::atanh(a);
        const double noise = (u - head.mean[i]) / std::exp(log_std);
        lp += gaussian_log_density(noise, log_std) - log_one_minus_tanh_sq(u);
    }
    return lp;
}

/// Batched reparameterized sampling from raw actor outputs (batch x 2d).
/// Also returns the Jacobian factors needed to push action gradients back
/// into the raw outputs.
template <class S>
struct BasicBatchSample {
    MatrixT<S> action;     // batch x d
    MatrixT<S> d_mean;     // da/d(mean) = 1 - a^2
    MatrixT<S> d_log_std;  // da/d(raw log_std); zero where the clip is active
};

using BatchSample = BasicBatchSample<double>;

template <class S>
BasicBatchSample<S> sample_batch(const MatrixT<S>& raw, const MatrixT<S>& noise) {
    const auto d = raw.cols() / 2;
    if (raw.cols() % 2 != 0 || noise.cols() != d || noise.rows() != raw.rows())
        throw std::invalid_argument("sample_batch: shape mismatch");
    BasicBatchSample<S> s{MatrixT<S>(raw.rows(), d), MatrixT<S>(raw.rows(), d), MatrixT<S>(raw.rows(), d)};
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        for (Eigen::Index i = 0; i < d; ++i) {
            const double raw_ls = raw(r, d + i);
            const double n = noise(r, i);
            const double log_std = std::clamp(raw_ls, kLogStdMin, kLogStdMax);
            const double std_dev = std::exp(log_std);
            const double u = raw(r, i) + std_dev * n;
            const double a = std::tanh(std::clamp(u, -kMaxPreTanh, kMaxPreTanh));
            const double da = std::abs(u) < kMaxPreTanh ? 1.0 - a * a : 0.0;
            s.action(r, i) = static_cast<S>(a);
            s.d_mean(r, i) = static_cast<S>(da);
            s.d_log_std(r, i) =
                static_cast<S>((raw_ls > kLogStdMin && raw_ls < kLogStdMax) ? da * std_dev * n : 0.0);
        }
    }
    return s;
}

/// dL/d(raw actor outputs) from dL/d(action).
template <class S>
MatrixT<S> sample_batch_backward(const BasicBatchSample<S>& s, const MatrixT<S>& action_grad) {
    const auto d = s.action.cols();
    MatrixT<S> g(action_grad.rows(), 2 * d);
    g.leftCols(d) = action_grad.cwiseProduct(s.d_mean);
    g.rightCols(d) = action_grad.cwiseProduct(s.d_log_std);
    return g;
}

/// Deterministic evaluation action tanh(mean).
inline std::vector<double> mean_action(std::span<const double> raw) {
    const std::size_t d = raw.size() / 2;
    std::vector<double> a(d);
    for (std::size_t i = 0; i < d; ++i) a[i] = std::tanh(raw[i]);
    return a;
}

}  // namespace ompo::nn
