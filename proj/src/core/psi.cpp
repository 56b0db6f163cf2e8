#include "khess/psi.hpp"

#include <cmath>
#include <sstream>

#include "khess/error.hpp"
#include "khess/symfun.hpp"

namespace khess::psi {

PsiSpec constant(double c)
{
    if (!(c > 0.0)) throw ConfigError("psi constant value must be positive");
    PsiSpec s;
    s.kind = PsiKind::constant;
    s.family = "constant";
    s.evaluate = [c](double, const Vec&) { return c; };
    s.d_z = [](double, const Vec&) { return 0.0; };
    s.d_p = [](double, const Vec& p) { return Vec::Zero(p.size()).eval(); };
    s.monotone_flag = true;
    s.decay_flag = false;
    s.base = [c](const Vec&) { return c; };
    return s;
}

PsiSpec normal_only(double c0, const Vec& linear, const Mat& quadratic)
{
    if (quadratic.rows() != linear.size() || quadratic.cols() != linear.size())
        throw ConfigError("psi normal-only: quadratic must be (n+1)x(n+1) matching linear");
    Mat Q = symmetrize(quadratic);
    double qn = Q.size() ? Q.operatorNorm() : 0.0;
    double bound = linear.cwiseAbs().sum() + qn;
    if (!(c0 > bound)) {
        std::ostringstream os;
        os << "psi normal-only: c0=" << c0 << " does not dominate " << bound << "; positivity not guaranteed";
        throw ConfigError(os.str());
    }
    Vec a = linear;
    PsiSpec s;
    s.kind = PsiKind::normal_only;
    s.family = "normal-only";
    auto f = [c0, a, Q](const Vec& p) { return c0 + a.dot(p) + p.dot(Q * p); };
    s.evaluate = [f](double, const Vec& p) { return f(p); };
    s.d_z = [](double, const Vec&) { return 0.0; };
    s.d_p = [a, Q](double, const Vec& p) { return (a + 2.0 * Q * p).eval(); };
    s.monotone_flag = true;
    s.base = f;
    return s;
}

PsiSpec exponential(double eps, const PsiSpec& b)
{
    if (!(eps >= 0.0)) throw ConfigError("psi exponential: eps must be nonnegative");
    if (!b.base || b.eps != 0.0) throw ConfigError("psi exponential: base must be constant or normal-only");
    PsiSpec s;
    s.kind = PsiKind::general;
    s.family = "exponential";
    auto base = b.base;
    auto dbase = b.d_p;
    s.base = base;
    s.eps = eps;
    s.evaluate = [eps, base](double z, const Vec& p) { return std::exp(-eps * z / p(p.size() - 1)) * base(p); };
    s.d_z = [eps, base](double z, const Vec& p) {
        double q = p(p.size() - 1);
        return -eps / q * std::exp(-eps * z / q) * base(p);
    };
    s.d_p = [eps, base, dbase](double z, const Vec& p) {
        const int m = static_cast<int>(p.size());
        double q = p(m - 1);
        double e = std::exp(-eps * z / q);
        Vec g = e * dbase(z, p);
        g(m - 1) += eps * z / (q * q) * e * base(p);
        return g;
    };
    s.monotone_flag = true;
    s.decay_flag = eps > 0.0;
    return s;
}

PsiSpec manufactured_cap(double R, int k, int n, double eps)
{
    double c = std::pow(binomial(n, k), 1.0 / k) / R;
    PsiSpec b;
    b.kind = PsiKind::normal_only;
    b.family = "normal-only";
    b.base = [c, eps, R](const Vec& p) { return c * std::exp(eps * R / p(p.size() - 1)); };
    b.evaluate = [base = b.base](double, const Vec& p) { return base(p); };
    b.d_z = [](double, const Vec&) { return 0.0; };
    b.d_p = [c, eps, R](double, const Vec& p) {
        const int m = static_cast<int>(p.size());
        double q = p(m - 1);
        Vec g = Vec::Zero(m);
        g(m - 1) = -c * eps * R / (q * q) * std::exp(eps * R / q);
        return g;
    };
    PsiSpec s = exponential(eps, b);
    s.family = "manufactured-cap";
    return s;
}

}  // namespace khess::psi
