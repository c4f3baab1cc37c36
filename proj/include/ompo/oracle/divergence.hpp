#pragma once

// Divergences over finite supports and the exact identities behind the
// surrogate objective and its Fenchel dual.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ompo::oracle {

class DivergenceUndefined : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct CategoricalPair {
    std::vector<double> p;
    std::vector<double> q;

    void validate() const {
        if (p.size() != q.size() || p.empty()) throw std::invalid_argument("CategoricalPair: supports differ or are empty");
        auto check = [](const std::vector<double>& d, const char* name) {
            double sum = 0.0;
            for (double x : d) {
                if (!(x >= 0.0)) throw std::invalid_argument(std::string("CategoricalPair: negative entry in ") + name);
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument(std::string("CategoricalPair: ") + name + " does not sum to 1");
        };
        check(p, "p");
        check(q, "q");
    }
};

using ConvexFn = std::function<double(double)>;

/// sum p ln(p/q) with 0 ln(0/q) = 0. No smoothing: q(x)=0 < p(x) is an error.
inline double kl_divergence(const CategoricalPair& pair) {
    pair.validate();
    double d = 0.0;
    for (std::size_t i = 0; i < pair.p.size(); ++i) {
        if (pair.p[i] == 0.0) continue;
        if (pair.q[i] == 0.0) throw DivergenceUndefined("kl_divergence: q vanishes where p has mass");
        d += pair.p[i] * std::log(pair.p[i] / pair.q[i]);
    }
    return std::max(d, 0.0);
}

/// sum q f(p/q).
inline double f_divergence(const CategoricalPair& pair, const ConvexFn& f) {
    pair.validate();
    double d = 0.0;
    for (std::size_t i = 0; i < pair.p.size(); ++i) {
        if (pair.q[i] == 0.0) {
            if (pair.p[i] > 0.0) throw DivergenceUndefined("f_divergence: q vanishes where p has mass");
            continue;
        }
        d += pair.q[i] * f(pair.p[i] / pair.q[i]);
    }
    return d;
}

inline double chi_square(double x) { return (x - 1.0) * (x - 1.0); }
inline double chi_square_conjugate(double y) { return y + 0.25 * y * y; }
inline double chi_square_derivative(double x) { return 2.0 * (x - 1.0); }

/// |E_a[ln(b/a)] - E_a[ln(b/c)] - E_a[ln(c/a)]|: the log-ratio split used to
/// bound the dynamics KL by a buffer log-ratio plus a policy divergence.
inline double decomposition_identity_check(const std::vector<double>& rho_a, const std::vector<double>& rho_b,
                                           const std::vector<double>& rho_c) {
    if (rho_a.size() != rho_b.size() || rho_a.size() != rho_c.size() || rho_a.empty())
        throw std::invalid_argument("decomposition_identity_check: supports differ");
    double whole = 0.0, via_c = 0.0, back = 0.0;
    for (std::size_t i = 0; i < rho_a.size(); ++i) {
        if (!(rho_a[i] > 0.0 && rho_b[i] > 0.0 && rho_c[i] > 0.0))
            throw DivergenceUndefined("decomposition_identity_check: distributions must be strictly positive");
        whole += rho_a[i] * std::log(rho_b[i] / rho_a[i]);
        via_c += rho_a[i] * std::log(rho_b[i] / rho_c[i]);
        back += rho_a[i] * std::log(rho_c[i] / rho_a[i]);
    }
    return std::abs(whole - via_c - back);
}

struct FenchelReport {
    double sup_estimate = -std::numeric_limits<double>::infinity();  // max over grid of E_p[y] - E_q[f*(y)]
    double closed_form = 0.0;                                        // D_f(p||q)
    std::size_t argmax = 0;                                          // grid index attaining sup_estimate
};

/// Evaluates the variational form D_f(p||q) = sup_y E_p[y] - E_q[f*(y)] over a
/// grid of candidate functions y (each a vector over the support). The min form
/// min_y E_q[f*(y)] - E_p[y] is the negation of the same quantity.
inline FenchelReport fenchel_gap_check(const CategoricalPair& pair, const ConvexFn& f, const ConvexFn& f_star,
                                       const std::vector<std::vector<double>>& y_grid) {
    FenchelReport report;
    report.closed_form = f_divergence(pair, f);
    for (std::size_t k = 0; k < y_grid.size(); ++k) {
        const auto& y = y_grid[k];
        if (y.size() != pair.p.size()) throw std::invalid_argument("fenchel_gap_check: grid function has wrong size");
        double value = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) value += pair.p[i] * y[i] - pair.q[i] * f_star(y[i]);
        if (value > report.sup_estimate) {
            report.sup_estimate = value;
            report.argmax = k;
        }
    }
    return report;
}

}  // namespace ompo::oracle
