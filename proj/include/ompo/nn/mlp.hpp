#pragma once

// Fully connected networks over a flat parameter vector with hand-written
// reverse mode.
//
// Parameter layout (layer-major): for each layer l with fan-in n_in and
// fan-out n_out, the n_out x n_in weight matrix in row-major order, followed
// by the n_out biases. Hidden layers apply the activation; the output layer is
// affine.

#include "ompo/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::nn {

template <class S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = MatrixT<double>;
using MatrixF = MatrixT<float>;
using Vector = Eigen::VectorXd;

enum class Activation { elu, tanh, relu };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::elu: return "elu";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "elu") return Activation::elu;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

struct MlpSpec {
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::vector<std::size_t> hidden_dims{256, 256};
    Activation activation = Activation::elu;

    std::size_t n_layers() const { return hidden_dims.size() + 1; }
    std::size_t fan_in(std::size_t l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
    std::size_t fan_out(std::size_t l) const { return l + 1 == n_layers() ? output_dim : hidden_dims[l]; }

    std::size_t layer_offset(std::size_t l) const {
        std::size_t off = 0;
        for (std::size_t k = 0; k < l; ++k) off += fan_out(k) * (fan_in(k) + 1);
        return off;
    }
    std::size_t param_count() const { return layer_offset(n_layers()); }

    void validate() const {
        if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("MlpSpec: zero input or output dim");
        if (hidden_dims.empty()) throw std::invalid_argument("MlpSpec: at least one hidden layer required");
        for (auto h : hidden_dims)
            if (h == 0) throw std::invalid_argument("MlpSpec: zero hidden width");
    }

    bool operator==(const MlpSpec&) const = default;
};

/// Flat storage for one network's weights, or for a gradient with the same layout.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t n, double value = 0.0) : values_(n, value) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const { return values_.size(); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<double> span() { return values_; }
    std::span<const double> span() const { return values_; }
    const std::vector<double>& values() const { return values_; }

    Eigen::Map<Vector> map() { return {values_.data(), static_cast<Eigen::Index>(values_.size())}; }
    Eigen::Map<const Vector> map() const { return {values_.data(), static_cast<Eigen::Index>(values_.size())}; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const ParamVector&) const = default;

private:
    std::vector<double> values_;
};

/// Uniform fan-in initialization: every weight and bias of layer l drawn from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline ParamVector init_params(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    ParamVector p(spec.param_count());
    std::size_t k = 0;
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(l)));
        const std::size_t n = spec.fan_out(l) * (spec.fan_in(l) + 1);
        for (std::size_t i = 0; i < n; ++i) p[k++] = rng.uniform(-bound, bound);
    }
    return p;
}

namespace detail {

using ConstWeights = Eigen::Map<const Matrix>;
using ConstBias = Eigen::Map<const Vector>;

inline ConstWeights weights(const MlpSpec& spec, const ParamVector& p, std::size_t l) {
    return {p.data() + spec.layer_offset(l), static_cast<Eigen::Index>(spec.fan_out(l)),
            static_cast<Eigen::Index>(spec.fan_in(l))};
}

inline ConstBias bias(const MlpSpec& spec, const ParamVector& p, std::size_t l) {
    return {p.data() + spec.layer_offset(l) + spec.fan_out(l) * spec.fan_in(l),
            static_cast<Eigen::Index>(spec.fan_out(l))};
}

// Written through exp so Eigen vectorizes them; its scalar tanh/expm1 paths are
// several times slower at these batch sizes.
template <class S>
void activate(Activation act, const MatrixT<S>& z, MatrixT<S>& out) {
    switch (act) {
        case Activation::elu: out = (z.array().max(S(0)) + (z.array().min(S(0)).exp() - S(1))).matrix(); break;
        case Activation::tanh: out = (S(1) - S(2) / ((S(2) * z.array()).exp() + S(1))).matrix(); break;
        case Activation::relu: out = z.cwiseMax(S(0)); break;
    }
}

// Derivative expressed through the pre-activation z and post-activation y.
template <class S>
void activation_grad(Activation act, const MatrixT<S>& z, const MatrixT<S>& y, MatrixT<S>& g) {
    switch (act) {
        case Activation::elu: g.array() *= y.array().min(S(0)) + S(1); break;  // exp(min(z, 0))
        case Activation::tanh: g.array() *= S(1) - y.array().square(); break;
        case Activation::relu: g.array() *= (z.array() > S(0)).template cast<S>(); break;
    }
}

}  // namespace detail

/// Activations recorded by a forward pass; rows are batch samples.
template <class S>
struct BasicMlpCache {
    std::vector<MatrixT<S>> inputs;   // inputs[l] is the input to layer l
    std::vector<MatrixT<S>> pre;      // pre-activations of hidden layers
    std::vector<MatrixT<S>> weights;  // layer weights at compute precision
    std::size_t param_count = 0;
};

using MlpCache = BasicMlpCache<double>;

inline void check_params(const MlpSpec& spec, const ParamVector& params) {
    if (params.size() != spec.param_count())
        throw std::invalid_argument("parameter vector length " + std::to_string(params.size()) +
                                    " does not match spec (" + std::to_string(spec.param_count()) + ")");
}

/// Batched forward pass. `input` is batch x input_dim; returns batch x output_dim.
/// Parameters are stored in double; the arithmetic runs in S.
template <class S>
MatrixT<S> mlp_forward(const MlpSpec& spec, const ParamVector& params, const MatrixT<S>& input,
                       BasicMlpCache<S>* cache = nullptr) {
    check_params(spec, params);
    if (static_cast<std::size_t>(input.cols()) != spec.input_dim)
        throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.cols()) + " columns, expected " +
                                    std::to_string(spec.input_dim));
    if (!input.allFinite()) throw std::invalid_argument("mlp_forward: non-finite input");
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
        cache->weights.clear();
        cache->param_count = params.size();
    }
    MatrixT<S> x = input;
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        MatrixT<S> w = detail::weights(spec, params, l).template cast<S>();
        MatrixT<S> z = x * w.transpose();
        z.rowwise() += detail::bias(spec, params, l).template cast<S>().transpose();
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->weights.push_back(std::move(w));
        }
        if (l + 1 == spec.n_layers()) return z;
        MatrixT<S> y;
        detail::activate<S>(spec.activation, z, y);
        if (cache) cache->pre.push_back(std::move(z));
        x = std::move(y);
    }
    return x;
}

inline std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params, std::span<const double> input) {
    if (input.size() != spec.input_dim) throw std::invalid_argument("mlp_forward: input dimension mismatch");
    Matrix x(1, static_cast<Eigen::Index>(input.size()));
    for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
    Matrix y = mlp_forward<double>(spec, params, x);
    return {y.data(), y.data() + y.size()};
}

template <class S>
struct BasicMlpGradients {
    ParamVector params;
    MatrixT<S> input;
};

using MlpGradients = BasicMlpGradients<double>;

/// Reverse pass: given dL/d(output) (batch x output_dim), returns dL/d(params)
/// summed over the batch and dL/d(input) per row.
template <class S>
BasicMlpGradients<S> mlp_backward(const MlpSpec& spec, const ParamVector& params, const BasicMlpCache<S>& cache,
                                  const MatrixT<S>& output_grad, bool need_param_grad = true) {
    check_params(spec, params);
    if (cache.inputs.size() != spec.n_layers() || cache.pre.size() + 1 != spec.n_layers() ||
        cache.weights.size() != spec.n_layers() || cache.param_count != params.size())
        throw std::invalid_argument("mlp_backward: cache does not match spec");
    if (static_cast<std::size_t>(output_grad.cols()) != spec.output_dim ||
        output_grad.rows() != cache.inputs.front().rows())
        throw std::invalid_argument("mlp_backward: output gradient shape mismatch");

    BasicMlpGradients<S> out;
    if (need_param_grad) out.params = ParamVector(params.size());
    MatrixT<S> g = output_grad;
    MatrixT<S> dw;
    for (std::size_t l = spec.n_layers(); l-- > 0;) {
        if (l + 1 < spec.n_layers()) detail::activation_grad<S>(spec.activation, cache.pre[l], cache.inputs[l + 1], g);
        if (need_param_grad) {
            const auto rows = static_cast<Eigen::Index>(spec.fan_out(l));
            const auto cols = static_cast<Eigen::Index>(spec.fan_in(l));
            Eigen::Map<Matrix> dw_out(out.params.data() + spec.layer_offset(l), rows, cols);
            Eigen::Map<Vector> db_out(out.params.data() + spec.layer_offset(l) + spec.fan_out(l) * spec.fan_in(l),
                                      rows);
            dw.noalias() = g.transpose() * cache.inputs[l];
            dw_out = dw.template cast<double>();
            // Row-by-row accumulation: Eigen's colwise().sum() on a row-major
            // operand gives allocation-dependent rounding, which breaks
            // run-to-run reproducibility.
            Eigen::Matrix<S, 1, Eigen::Dynamic> db = g.row(0);
            for (Eigen::Index r = 1; r < g.rows(); ++r) db += g.row(r);
            db_out = db.transpose().template cast<double>();
        }
        g = g * cache.weights[l];
    }
    out.input = std::move(g);
    return out;
}

}  // namespace ompo::nn
