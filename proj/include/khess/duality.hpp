#pragma once

#include <vector>

#include "khess/geometry.hpp"
#include "khess/grid.hpp"
#include "khess/linalg.hpp"
#include "khess/psi.hpp"

namespace khess {

// Hemisphere chart: y = -x'/x_{n+1}. Throws DomainError when x_{n+1} <= 0.
Vec project(const Vec& x);
Vec unproject(const Vec& y);
// Du, the gradient-map form of the Gauss map.
Vec gauss_image(const Jet2& jet);

struct DualChartPack {
    Vec y;
    double w_star = 1.0;
    Mat b_star;       // I + y y^T / (1 + w*)
    Mat g_y;          // I + y y^T
    Mat dual_matrix;  // w* b* D^2u* b*
    Vec radii;        // ascending eigenvalues of dual_matrix
};

DualChartPack dual_chart_pack(const Jet2& jet_star);

// Test fixture: flips the sign of the y y^T term in b*. Only the duality
// verification suite is expected to notice.
void set_bstar_fault(bool on);
bool bstar_fault();

double w_star(const Vec& y);
Mat b_star(const Vec& y);

// F_dual(w* b* D^2u* b*) - psi*(y, u*).
double dual_residual(const Jet2& jet_star, int k, const PsiSpec& psi);

struct SupportData {
    double v = 0.0;     // support value on the sphere, V / w*
    Vec grad_v;         // e_i(v) in the frame e_i = w* b*_{ik} d/dy_k
    Mat lambda_matrix;  // w* b* D^2V b*
};

// Input is the chart function V = w* v at y.
SupportData spherical_hessian(const Jet2& v_chart);

// Covariant Hessian plus v delta in the frame e_i, assembled from central
// differences of f = V/w* with step h and the chart Christoffel symbols
// Gamma^k_ij = -(y_i delta_kj + y_j delta_ki)/w*^2. Reference oracle only.
template <class F>
Mat spherical_hessian_fd(F&& V, const Vec& y, double h);

Mat christoffel(const Vec& y, int k);  // Gamma^k_{ij}

// psi~(x, v) = 1/psi(v, x) and psi*(y, z) = 1/psi(z/w*, (-y,1)/w*), with the
// partials needed by the dual solver.
struct PsiStar {
    PsiSpec psi;
    double tilde(const Vec& x, double v) const;
    double value(const Vec& y, double z) const;
    double d_z(const Vec& y, double z) const;
    Vec d_y(const Vec& y, double z) const;
};
PsiStar psi_conversions(const PsiSpec& psi);

// Legendre transform of a sampled convex function on a polar grid, evaluated
// at arbitrary targets by damped Newton inversion of the interpolated
// gradient map. Throws OutOfImage carrying the first target not reached.
struct LegendreResult {
    std::vector<double> values;  // u*(y)
    std::vector<Vec> points;     // x(y) = Du*(y)
    int max_iterations = 0;
};

class SampledFunction {
public:
    SampledFunction(const PolarGrid& grid, Vec values);
    const PolarGrid& grid() const { return grid_; }
    const Vec& values() const { return u_; }
    const std::vector<Vec>& nodal_gradients() const { return grad_; }
    const std::vector<Mat>& nodal_hessians() const { return hess_; }
    // Interpolated value, gradient and Hessian. Returns false when p lies
    // beyond the slack ring outside the domain.
    bool evaluate(const Vec& p, double& value, Vec& gradient, Mat& hessian) const;
    int nearest_by_gradient(const Vec& y) const;

private:
    const PolarGrid& grid_;
    Vec u_;
    std::vector<Vec> grad_;
    std::vector<Mat> hess_;
};

LegendreResult legendre(const SampledFunction& f, const std::vector<Vec>& targets);

// Legendre transform carried by the nodes themselves: y_i = Du(x_i) from the
// stencil gradient and u*_i = x_i.y_i - u_i, on the pushed-forward grid.
struct NodalLegendre {
    PolarGrid grid;
    Vec values;
};
NodalLegendre legendre_nodal(const SampledFunction& f);

// Christoffel-corrected reference, defined inline so callers can pass lambdas.
template <class F>
Mat spherical_hessian_fd(F&& V, const Vec& y, double h)
{
    const int n = static_cast<int>(y.size());
    auto f = [&](const Vec& p) { return V(p) / w_star(p); };
    const double f0 = f(y);
    Vec g(n);
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        Vec ei = Vec::Unit(n, i) * h;
        double fp = f(y + ei), fm = f(y - ei);
        g(i) = (fp - fm) / (2 * h);
        H(i, i) = (fp - 2 * f0 + fm) / (h * h);
        for (int j = 0; j < i; ++j) {
            Vec ej = Vec::Unit(n, j) * h;
            H(i, j) = H(j, i) = (f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)) / (4 * h * h);
        }
    }
    Mat cov = H;
    for (int k = 0; k < n; ++k) cov -= christoffel(y, k) * g(k);
    Mat B = w_star(y) * b_star(y);
    return symmetrize(B * cov * B) + f0 * Mat::Identity(n, n);
}

}  // namespace khess
