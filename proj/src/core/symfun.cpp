#include "khess/symfun.hpp"

#include <cmath>
#include <sstream>

#include "khess/error.hpp"

namespace khess {

Vec sigma_all(const Vec& lambda)
{
    const int n = static_cast<int>(lambda.size());
    Vec e = Vec::Zero(n + 1);
    e(0) = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j >= 1; --j) e(j) += lambda(i) * e(j - 1);
    return e;
}

double sigma_k(const Vec& lambda, int k)
{
    const int n = static_cast<int>(lambda.size());
    if (k < 1 || k > n) {
        std::ostringstream os;
        os << "sigma_k: k=" << k << " outside 1.." << n;
        throw ArgumentError(os.str());
    }
    return sigma_all(lambda)(k);
}

double sigma_k_without(const Vec& lambda, int k, int skip_a, int skip_b)
{
    if (k < 0) return 0.0;
    if (k == 0) return 1.0;
    const int n = static_cast<int>(lambda.size());
    std::vector<double> e(k + 1, 0.0);
    e[0] = 1.0;
    int used = 0;
    for (int i = 0; i < n; ++i) {
        if (i == skip_a || i == skip_b) continue;
        ++used;
        for (int j = std::min(used, k); j >= 1; --j) e[j] += lambda(i) * e[j - 1];
    }
    return e[k];
}

double binomial(int n, int k)
{
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

namespace {

void require_positive(const Vec& lambda, const char* who)
{
    for (int i = 0; i < lambda.size(); ++i) {
        if (!(lambda(i) > 0.0)) {
            std::ostringstream os;
            os << who << ": eigenvalue " << lambda(i) << " outside the positive cone";
            throw ConeViolation(os.str(), lambda);
        }
    }
}

void require_k(int n, int k)
{
    if (k < 1 || k > n) {
        std::ostringstream os;
        os << "operator order k=" << k << " outside 1.." << n;
        throw ArgumentError(os.str());
    }
}

}  // namespace

double op_value(const Vec& lambda, int k, Mode mode)
{
    const int n = static_cast<int>(lambda.size());
    require_k(n, k);
    require_positive(lambda, "op_value");
    if (mode == Mode::primal) return std::pow(sigma_all(lambda)(k), 1.0 / k);
    Vec mu = lambda.cwiseInverse();
    return std::pow(sigma_all(mu)(k), -1.0 / k);
}

Vec op_gradient(const Vec& lambda, int k, Mode mode)
{
    const int n = static_cast<int>(lambda.size());
    require_k(n, k);
    require_positive(lambda, "op_gradient");
    Vec f(n);
    if (mode == Mode::primal) {
        double S = sigma_all(lambda)(k);
        double c = std::pow(S, 1.0 / k - 1.0) / k;
        for (int i = 0; i < n; ++i) f(i) = c * sigma_k_without(lambda, k - 1, i);
        return f;
    }
    Vec mu = lambda.cwiseInverse();
    double T = sigma_all(mu)(k);
    double c = std::pow(T, -1.0 / k - 1.0) / k;
    for (int i = 0; i < n; ++i) f(i) = c * sigma_k_without(mu, k - 1, i) * mu(i) * mu(i);
    return f;
}

Mat op_hessian(const Vec& lambda, int k, Mode mode)
{
    const int n = static_cast<int>(lambda.size());
    require_k(n, k);
    require_positive(lambda, "op_hessian");
    const double r = 1.0 / k;
    Mat H(n, n);
    if (mode == Mode::primal) {
        double S = sigma_all(lambda)(k);
        Vec Si(n);
        for (int i = 0; i < n; ++i) Si(i) = sigma_k_without(lambda, k - 1, i);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double Sij = (i == j) ? 0.0 : sigma_k_without(lambda, k - 2, i, j);
                H(i, j) = r * (r - 1.0) * std::pow(S, r - 2.0) * Si(i) * Si(j) + r * std::pow(S, r - 1.0) * Sij;
            }
        return H;
    }
    // f(lambda) = g(mu), g = T^{-1/k}, mu = 1/lambda
    Vec mu = lambda.cwiseInverse();
    double T = sigma_all(mu)(k);
    Vec Ti(n), gi(n);
    for (int i = 0; i < n; ++i) {
        Ti(i) = sigma_k_without(mu, k - 1, i);
        gi(i) = -r * std::pow(T, -r - 1.0) * Ti(i);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double Tij = (i == j) ? 0.0 : sigma_k_without(mu, k - 2, i, j);
            double gij = r * (r + 1.0) * std::pow(T, -r - 2.0) * Ti(i) * Ti(j) - r * std::pow(T, -r - 1.0) * Tij;
            H(i, j) = gij * mu(i) * mu(i) * mu(j) * mu(j);
            if (i == j) H(i, j) += 2.0 * mu(i) * mu(i) * mu(i) * gi(i);
        }
    return H;
}

OperatorValue eval_operator(const Mat& A, int k, Mode mode)
{
    const int n = static_cast<int>(A.rows());
    require_k(n, k);
    if (A.cols() != n) throw ArgumentError("eval_operator: matrix not square");
    if (asymmetry(A) > 1e-14) throw ArgumentError("eval_operator: matrix not symmetric");
    SymEig eig = jacobi_eigen(A);
    OperatorValue out;
    out.eigenvalues = eig.values;
    out.eigenvectors = eig.vectors;
    out.value = op_value(eig.values, k, mode);
    out.df = op_gradient(eig.values, k, mode);
    // Spectral functions of symmetric matrices have gradient Q diag(f_i) Q^T;
    // no eigenvalue-gap quotient enters at first order.
    out.gradient = eig.vectors * out.df.asDiagonal() * eig.vectors.transpose();
    return out;
}

double second_directional(const OperatorValue& op, const Mat& B, int k, Mode mode)
{
    const int n = static_cast<int>(op.eigenvalues.size());
    const Mat& Q = op.eigenvectors;
    Mat Bh = Q.transpose() * B * Q;
    Mat fij = op_hessian(op.eigenvalues, k, mode);
    const Vec& lam = op.eigenvalues;
    double scale = lam.cwiseAbs().maxCoeff();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += fij(i, j) * Bh(i, i) * Bh(j, j);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double gap = lam(i) - lam(j);
            double q = (std::abs(gap) < 1e-8 * scale) ? fij(i, i) - fij(i, j) : (op.df(i) - op.df(j)) / gap;
            s += q * Bh(i, j) * Bh(i, j);
        }
    return s;
}

SigmaValue sigma_matrix(const Mat& A, int k)
{
    const int n = static_cast<int>(A.rows());
    require_k(n, k);
    SymEig eig = jacobi_eigen(A);
    Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = sigma_k_without(eig.values, k - 1, i);
    return {sigma_all(eig.values)(k), eig.vectors * d.asDiagonal() * eig.vectors.transpose()};
}

double duality_product(const Vec& kappa, int k)
{
    require_positive(kappa, "duality_product");
    return op_value(kappa, k, Mode::primal) * op_value(kappa.cwiseInverse(), k, Mode::dual);
}

ConeReport cone_check(const Vec& lambda, double tol)
{
    const int n = static_cast<int>(lambda.size());
    ConeReport r;
    Vec e = sigma_all(lambda);
    double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    bool any_negative = false;
    for (int i = 0; i < n; ++i) {
        r.lambda_positive.push_back(lambda(i) > tol * scale);
        if (lambda(i) < -tol * scale) any_negative = true;
    }
    for (int j = 1; j <= n; ++j) r.sigma_positive.push_back(e(j) > 0.0);
    r.lambda_min = n ? lambda.minCoeff() : 0.0;
    r.inside = r.lambda_min > tol * scale;
    r.strictly_convex = r.inside;
    r.on_boundary = !any_negative && !r.inside;
    return r;
}

}  // namespace khess
