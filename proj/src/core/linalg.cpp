#include "khess/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace khess {

SymEig jacobi_eigen(const Mat& A0, double tol, int max_sweeps)
{
    const int n = static_cast<int>(A0.rows());
    Mat A = symmetrize(A0);
    Mat V = Mat::Identity(n, n);
    const double total = std::max(A.norm(), 1e-300);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += 2.0 * A(p, q) * A(p, q);
        if (std::sqrt(off) <= tol * total) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = A(p, q);
                if (apq == 0.0) continue;
                double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return A(a, a) < A(b, b); });

    SymEig out{Vec(n), Mat(n, n)};
    for (int i = 0; i < n; ++i) {
        out.values(i) = A(order[i], order[i]);
        out.vectors.col(i) = V.col(order[i]);
    }
    return out;
}

double asymmetry(const Mat& A)
{
    double s = A.norm();
    if (s == 0.0) return 0.0;
    return (A - A.transpose()).norm() / s;
}

Mat symmetrize(const Mat& A) { return 0.5 * (A + A.transpose()); }

}  // namespace khess
