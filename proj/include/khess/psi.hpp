#pragma once

#include <functional>
#include <string>

#include "khess/linalg.hpp"

namespace khess {

enum class PsiKind { constant, normal_only, general };

// Right-hand side psi(z, p) of the primal equation. z is the support value
// v = -<X,N> = (x.Du - u)/w; p is the upward unit normal in R^{n+1}.
struct PsiSpec {
    PsiKind kind = PsiKind::constant;
    std::string family;  // "constant", "normal-only", "exponential", "manufactured-cap"
    std::function<double(double, const Vec&)> evaluate;
    std::function<double(double, const Vec&)> d_z;
    std::function<Vec(double, const Vec&)> d_p;  // size n+1
    bool monotone_flag = false;
    bool decay_flag = false;

    // Exponential continuation form psi = exp(-eps z / p_{n+1}) psi0(p).
    // Constant and normal-only specs have eps = 0 and psi0 = evaluate(0, .).
    double eps = 0.0;
    std::function<double(const Vec&)> base;

    bool has_partials() const { return static_cast<bool>(d_z) && static_cast<bool>(d_p); }
};

namespace psi {

PsiSpec constant(double c);

// c0 + sum_i a_i p_i + p^T Q p, positive on the sphere; rejected with
// ConfigError unless c0 > sum|a_i| + ||Q||_2.
PsiSpec normal_only(double c0, const Vec& linear, const Mat& quadratic);

// exp(-eps z / p_{n+1}) base(p); base taken from a constant or normal-only spec.
PsiSpec exponential(double eps, const PsiSpec& base);

// Base chosen so that u* = R w* solves the dual problem exactly at this eps:
// psi0(p) = binom(n,k)^{1/k} / R * exp(eps R / p_{n+1}).
PsiSpec manufactured_cap(double R, int k, int n, double eps);

}  // namespace psi

}  // namespace khess
