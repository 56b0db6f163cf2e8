#pragma once

#include <vector>

#include "khess/linalg.hpp"

namespace khess {

enum class Mode { primal, dual };

// Coefficients e_0..e_n of prod (1 + lambda_i t).
Vec sigma_all(const Vec& lambda);

// Throws ArgumentError for k outside 1..n.
double sigma_k(const Vec& lambda, int k);

// sigma_k of lambda with the entries in `skip` removed; k may be 0 or exceed
// the remaining length, in which case the result is 1 or 0.
double sigma_k_without(const Vec& lambda, int k, int skip_a, int skip_b = -1);

double binomial(int n, int k);

// Scalar operator on a spectrum: value, gradient f_i, Hessian f_ij.
double op_value(const Vec& lambda, int k, Mode mode);
Vec op_gradient(const Vec& lambda, int k, Mode mode);
Mat op_hessian(const Vec& lambda, int k, Mode mode);

struct OperatorValue {
    double value = 0.0;
    Mat gradient;     // F^{ij}
    Vec eigenvalues;  // ascending
    Mat eigenvectors;
    Vec df;           // f_i in the eigenbasis
};

// primal: sigma_k^{1/k}; dual: (sigma_n / sigma_{n-k})^{1/k}. Both require a
// strictly positive spectrum; otherwise ConeViolation with the spectrum.
OperatorValue eval_operator(const Mat& A, int k, Mode mode);

// Second directional derivative d^2/ds^2 F(A + sB) at s = 0. Off-diagonal
// terms use divided differences, switching to f_ii - f_ij when the gap is
// below 1e-8 max|lambda|.
double second_directional(const OperatorValue& op, const Mat& B, int k, Mode mode);

// Raw sigma_k(A) and its matrix gradient sigma_k^{ij}; no cone restriction.
struct SigmaValue {
    double value = 0.0;
    Mat gradient;
};
SigmaValue sigma_matrix(const Mat& A, int k);

double duality_product(const Vec& kappa, int k);

struct ConeReport {
    std::vector<bool> lambda_positive;
    std::vector<bool> sigma_positive;  // sigma_1..sigma_n
    double lambda_min = 0.0;
    bool inside = false;      // every lambda_i > 0
    bool on_boundary = false; // lambda_min == 0 up to tol, none negative
    bool strictly_convex = false;
};
ConeReport cone_check(const Vec& lambda, double tol = 1e-14);

}  // namespace khess
