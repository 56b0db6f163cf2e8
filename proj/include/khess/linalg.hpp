#pragma once

#include <Eigen/Dense>

namespace khess {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SymEig {
    Vec values;  // ascending
    Mat vectors; // columns
};

// Cyclic Jacobi. Stops when the off-diagonal Frobenius norm drops below
// tol times the full norm.
SymEig jacobi_eigen(const Mat& A, double tol = 1e-13, int max_sweeps = 60);

double asymmetry(const Mat& A);
Mat symmetrize(const Mat& A);

}  // namespace khess
