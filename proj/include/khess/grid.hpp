#pragma once

#include <array>
#include <memory>
#include <vector>

#include "khess/body.hpp"
#include "khess/linalg.hpp"

namespace khess {

// Weights sum to zero exactly: the centre weight is minus the sum of the
// others, and application works on differences from the centre value, so an
// additive constant in the data costs no accuracy.
struct Stencil {
    std::vector<int> idx;
    int center = 0;  // position of the node itself in idx
    std::vector<double> d1, d2, d11, d12, d22;
};

struct InterpWeights {
    std::array<int, 4> idx{};
    std::array<double, 4> w{};
};

// Body-fitted polar grid on a planar body. Computational coordinates are
// xi_i = (i - 1/2) dxi, i = 1..n_r, with dxi = 1/(n_r - 1/2) so ring n_r sits
// on xi = 1, and theta_j = 2 pi j / n_theta. The map is
//   y = c + S (rho_bar + S^2 (rho_e(theta) - rho_bar) + S rho_o(theta)) e(theta),
//   S(xi) = sin(alpha xi) / sin(alpha),
// with rho_e, rho_o the even and odd parts of the boundary radius and rho_bar
// the least rho_e. The inner rings are nearly circles; shaped ones there
// leave weakly controlled oscillations on ring 1. S is odd, so the ghost
// ring at xi = -dxi/2 coincides with ring 1 shifted by pi.
class PolarGrid {
public:
    PolarGrid(const ConvexBody& body, int n_r, int n_theta);
    PolarGrid(const PolarGrid& o);
    PolarGrid& operator=(const PolarGrid&) = delete;

    // Same ring/ray topology with the nodes moved, e.g. pushed forward by a
    // gradient map. Stencils are rebuilt; map, invert, locate and the
    // quadrature refer to the original layout and are unavailable.
    PolarGrid pushed(std::vector<Vec> nodes) const;
    bool is_pushed() const { return pushed_; }

    int n_r() const { return n_r_; }
    int n_theta() const { return n_theta_; }
    int size() const { return n_r_ * n_theta_; }
    int index(int ring, int ray) const;  // ring 1..n_r, ray taken mod n_theta
    int ring_of(int i) const { return i / n_theta_ + 1; }
    int ray_of(int i) const { return i % n_theta_; }
    bool is_boundary(int i) const { return ring_of(i) == n_r_; }

    const std::vector<Vec>& nodes() const { return nodes_; }
    const Vec& node(int i) const { return nodes_[i]; }
    const Stencil& stencil(int i) const { return stencils_[i]; }
    const std::vector<double>& quadrature() const { return quad_; }
    const ConvexBody& body() const { return *body_; }

    double h() const { return h_; }
    double xi(int ring) const { return (ring - 0.5) * dxi_; }
    double theta(int ray) const;

    Vec map(double xi, double theta) const;
    // Returns false when y lies beyond xi_max (default 1.3).
    bool invert(const Vec& y, double& xi, double& theta, double xi_max = 1.3) const;
    InterpWeights locate(double xi, double theta) const;

    Vec gradient(const Vec& u, int i) const;
    Mat hessian(const Vec& u, int i) const;

    // Max violation of degree-exactness found while validating stencils, in
    // scaled local coordinates.
    double stencil_defect() const { return stencil_defect_; }

private:
    void build_nodes();
    void build_stencils();
    void build_quadrature();
    double S(double xi) const;
    double dS(double xi) const;
    void rho_parts(double theta, double& re, double& ro) const;
    double radius(double s, double re, double ro) const;
    double radius_ds(double s, double re, double ro) const;
    std::vector<int> neighbors(int ring, int ray) const;
    // A +-1 pattern over the stencil block and the Hessian it must produce.
    struct Mode {
        Vec pattern;
        Mat hessian;
    };
    std::vector<Mode> checkerboards(int ring, int ray) const;
    Stencil make_stencil(int center, const std::vector<int>& nbrs, int degree, const std::vector<Mode>& modes);

    std::unique_ptr<ConvexBody> body_;
    int n_r_, n_theta_;
    double dxi_, dtheta_;
    double alpha_ = 1.2;
    std::vector<Vec> nodes_;
    std::vector<Stencil> stencils_;
    std::vector<double> quad_;
    std::vector<double> rho_e_, rho_o_;  // at node angles
    double rho_bar_ = 0.0;
    double h_ = 0.0;
    double stencil_defect_ = 0.0;
    bool pushed_ = false;
};

}  // namespace khess
