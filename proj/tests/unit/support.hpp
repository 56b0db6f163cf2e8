#pragma once

#include <random>

#include "khess/geometry.hpp"
#include "khess/linalg.hpp"

namespace testing_support {

using khess::Mat;
using khess::Vec;

inline Mat random_orthogonal(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
    Eigen::HouseholderQR<Mat> qr(A);
    return qr.householderQ() * Mat::Identity(n, n);
}

inline Mat random_spd(std::mt19937_64& rng, int n, double lo = 0.3, double hi = 2.5)
{
    std::uniform_real_distribution<double> ud(lo, hi);
    Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = ud(rng);
    Mat Q = random_orthogonal(rng, n);
    Mat A = Q * d.asDiagonal() * Q.transpose();
    return 0.5 * (A + A.transpose());
}

inline Vec random_vec(std::mt19937_64& rng, int n, double lo, double hi)
{
    std::uniform_real_distribution<double> ud(lo, hi);
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = ud(rng);
    return v;
}

// u = x^T A x / 2 + b.x + sum_j c_j (d_j.x)^4 with A SPD, c_j > 0.
struct Quartic {
    Mat A;
    Vec b;
    std::vector<Vec> d;
    std::vector<double> c;

    khess::Jet2 jet(const Vec& x) const
    {
        khess::Jet2 J;
        J.point = x;
        J.value = 0.5 * x.dot(A * x) + b.dot(x);
        J.gradient = A * x + b;
        J.hessian = A;
        for (size_t j = 0; j < d.size(); ++j) {
            double t = d[j].dot(x);
            J.value += c[j] * t * t * t * t;
            J.gradient += 4 * c[j] * t * t * t * d[j];
            J.hessian += 12 * c[j] * t * t * d[j] * d[j].transpose();
        }
        return J;
    }
};

inline Quartic random_quartic(std::mt19937_64& rng, int n)
{
    Quartic q;
    q.A = random_spd(rng, n, 0.4, 2.0);
    q.b = random_vec(rng, n, -0.5, 0.5);
    for (int j = 0; j < 3; ++j) {
        q.d.push_back(random_vec(rng, n, -1, 1));
        q.c.push_back(random_vec(rng, 1, 0.1, 0.8)(0));
    }
    return q;
}

// Legendre-paired jet of u* at y = Du(x).
inline khess::Jet2 dual_jet(const khess::Jet2& J)
{
    khess::Jet2 D;
    D.point = J.gradient;
    D.value = J.point.dot(J.gradient) - J.value;
    D.gradient = J.point;
    D.hessian = J.hessian.inverse();
    return D;
}

// Jet of R sqrt(1 + |y|^2), the dual of the spherical cap of radius R.
inline khess::Jet2 cap_dual_jet(const Vec& y, double R)
{
    const int n = static_cast<int>(y.size());
    double w = std::sqrt(1.0 + y.squaredNorm());
    khess::Jet2 J;
    J.point = y;
    J.value = R * w;
    J.gradient = R * y / w;
    J.hessian = R * (Mat::Identity(n, n) / w - y * y.transpose() / (w * w * w));
    return J;
}

}  // namespace testing_support
