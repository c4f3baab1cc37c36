#pragma once

// f(x) = (1/p)(x - 1)^p with conjugate f*(x) = (1/q) x^q + x, 1/p + 1/q = 1.
//
// x^q is undefined for x < 0 at fractional q, so negative arguments need an
// extension. Two are provided:
//   rectified: (1/q) max(x, 0)^q + x. f*' >= 1 everywhere, so the critic
//              objective is unbounded below whenever the buffer distribution
//              differs from the policy's occupancy.
//   symmetric: (1/q) |x|^q + x, the exact conjugate of (1/p)|y - 1|^p.
//              f*' spans the whole real line and the critic objective is
//              bounded below.
// Both agree with the closed form on x >= 0 and are C^1 at the origin.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ompo::agent {

enum class ConjugateExtension { symmetric, rectified };

inline std::string to_string(ConjugateExtension e) {
    return e == ConjugateExtension::rectified ? "rectified" : "symmetric";
}

inline ConjugateExtension conjugate_extension_from_string(const std::string& s) {
    if (s == "symmetric") return ConjugateExtension::symmetric;
    if (s == "rectified") return ConjugateExtension::rectified;
    throw std::invalid_argument("unknown conjugate extension '" + s + "'");
}

inline void check_order(double q_order) {
    if (!(q_order > 1.0)) throw std::invalid_argument("conjugate order q must exceed 1");
}

inline double fenchel_star(double x, double q_order, ConjugateExtension ext = ConjugateExtension::rectified) {
    check_order(q_order);
    const double m = ext == ConjugateExtension::rectified ? std::max(x, 0.0) : std::abs(x);
    return std::pow(m, q_order) / q_order + x;
}

inline double fenchel_star_deriv(double x, double q_order, ConjugateExtension ext = ConjugateExtension::rectified) {
    check_order(q_order);
    if (x >= 0.0) return std::pow(x, q_order - 1.0) + 1.0;
    return ext == ConjugateExtension::rectified ? 1.0 : 1.0 - std::pow(-x, q_order - 1.0);
}

/// (q - 1) |x|^(q - 2) (zero on x <= 0 for the rectified branch). Unbounded
/// as x -> 0 when q < 2; the origin itself returns 0.
inline double fenchel_star_second_deriv(double x, double q_order,
                                        ConjugateExtension ext = ConjugateExtension::rectified) {
    check_order(q_order);
    if (x == 0.0) return 0.0;
    if (x < 0.0 && ext == ConjugateExtension::rectified) return 0.0;
    return (q_order - 1.0) * std::pow(std::abs(x), q_order - 2.0);
}

/// The primal generator f(y) = (1/p)(y - 1)^p on its convex branch y >= 1.
inline double conjugate_generator(double y, double q_order) {
    check_order(q_order);
    const double p = q_order / (q_order - 1.0);
    if (y < 1.0) throw std::domain_error("conjugate_generator: defined here only on y >= 1");
    return std::pow(y - 1.0, p) / p;
}

}  // namespace ompo::agent
