#pragma once

#include <vector>

#include "khess/body.hpp"
#include "khess/duality.hpp"
#include "khess/grid.hpp"
#include "khess/linalg.hpp"

namespace khess {

// Rotation of the hemisphere in the (x0, e1) plane, pulled back to the chart:
// sigma_t = P A_{s t} P^{-1}. The angular speed s = w0 |dP^{-1} xi| makes
// T(y0) = w0 xi exactly; with s = 1 the tangency only holds when y0.xi = 0.
// The generated field is T(y) = s (c + L y + (c.y) y).
class RotationField {
public:
    int dim() const { return static_cast<int>(y0_.size()); }
    const Vec& y0() const { return y0_; }
    const Vec& xi() const { return xi_; }
    const Vec& x0() const { return x0_; }
    const std::vector<Vec>& frame() const { return frame_; }  // e_1..e_n
    double t_max() const { return t_max_; }
    double speed() const { return speed_; }

    Vec eval(const Vec& y) const;
    Mat jacobian(const Vec& y) const;  // dT_m / dy_j
    // T_m = c_m + sum_j L_mj y_j + sum_{j,l} Q^m_{jl} y_j y_l.
    const Vec& constant() const { return c_; }
    const Mat& linear() const { return L_; }
    Mat quadratic(int m) const;
    // a_0 = <P^{-1}y, x0>, a_i = <P^{-1}y, e_i>.
    Vec components(const Vec& y) const;
    Vec flow(double t, const Vec& y) const;

    // Same anchor and frame with speed 0: the degenerate probe.
    RotationField zero() const;

    friend RotationField make_field(const Vec& y0, const Vec& xi, const ConvexBody& body);
    friend RotationField make_field_unchecked(const Vec& y0, const Vec& xi, double bounding_radius,
                                              const Vec& center);

private:
    Vec y0_, xi_, x0_;
    std::vector<Vec> frame_;
    double speed_ = 1.0;
    double t_max_ = 0.0;
    Vec c_;
    Mat L_;
};

// Preconditions: y0 on the boundary and xi a unit tangent there, each to
// 1e-10; violations throw BoundaryMismatch with the measured defect.
RotationField make_field(const Vec& y0, const Vec& xi, const ConvexBody& body);
// No boundary checks; t_max is computed over the ball of the given radius
// about center. Used for dimension-generic verification.
RotationField make_field_unchecked(const Vec& y0, const Vec& xi, double bounding_radius, const Vec& center);

Vec flow(const RotationField& f, double t, const Vec& y);
Vec field_eval(const RotationField& f, const Vec& y);

struct AlongDerivatives {
    double Tu = 0.0;
    double TTu = 0.0;
    double D_TT_u = 0.0;
};
AlongDerivatives derivative_along(const RotationField& f, const Jet2& jet);

// Linearized dual equation applied to w* T(u*/w*), minus T psi* and
// psi*_{u*} T u*, at one grid node. Inner derivatives come from the grid
// stencils. Throws DomainError when sigma_{+-h}(node) leaves the body.
double differentiated_equation_check(const RotationField& f, const PolarGrid& grid, const Vec& u_star, int node,
                                     int k, const PsiSpec& psi);
// The same check at every node; NaN where it does not apply.
Vec differentiated_equation_defects(const RotationField& f, const PolarGrid& grid, const Vec& u_star, int k,
                                    const PsiSpec& psi);

}  // namespace khess
