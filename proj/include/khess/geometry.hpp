#pragma once

#include "khess/body.hpp"
#include "khess/linalg.hpp"
#include "khess/psi.hpp"

namespace khess {

struct Jet2 {
    Vec point;
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

struct CurvaturePack {
    double w = 1.0;
    Mat g, g_inv;
    Mat b, b_inv;    // b^{ij}, b_{ij}
    Vec normal;      // upward unit normal, n+1 entries
    Mat second_form; // h_{ij}
    Mat curvature_matrix; // a_{ij} = b^{ik} h_{kl} b^{lj}
    Vec kappa;       // ascending
};

CurvaturePack curvature_pack(const Jet2& jet);

// v = -<X,N> = (x.Du - u)/w, the z argument of psi.
double support_value(const Jet2& jet);

// F(a) - psi(v, N) with F = sigma_k^{1/k}.
double primal_residual(const Jet2& jet, int k, const PsiSpec& psi);

struct PrimalLinearization {
    Mat Gij;   // dG/du_{ij}, G = sigma_k(a)
    Vec Gs;    // dG/du_s
    Vec psis;  // d psi / du_s
};

PrimalLinearization primal_linearization(const Jet2& jet, int k, const PsiSpec& psi);

// G^s with the first term exactly as printed, -(u_s/w) sum G^{ij} u_{ij}; kept
// so the test suite can show it disagrees with finite differences.
Vec gs_as_printed(const Jet2& jet, int k);

struct ObliquenessChi {
    double chi_def = 0.0;
    double chi_formula = 0.0;
};

// jet at a boundary point of the source domain with interior unit normal nu;
// target is the body containing Du. Throws BoundaryMismatch when Du is off
// the target boundary by more than tol.
ObliquenessChi obliqueness_chi(const Jet2& jet, const Vec& nu, const ConvexBody& target, double tol = 1e-8);

}  // namespace khess
