#pragma once

#include <memory>
#include <string>

#include "khess/linalg.hpp"

namespace khess {

struct DefiningEval {
    double h = 0.0;
    Vec dh;
    Mat d2h;
};

struct ConcavityProbe {
    double theta_c = 0.0;        // D^2 h <= -theta_c I on the sample
    double gradient_defect = 0.0; // max | |Dh| - 1 | on boundary samples
    int samples = 0;
};

// Boundary radius about the interior point along e(theta), with two theta
// derivatives. Planar bodies only.
struct RadialSample {
    double r = 0.0, dr = 0.0, d2r = 0.0;
};

// Strictly convex body {h > 0} with a uniformly concave defining function,
// |Dh| = 1 on the zero level.
class ConvexBody {
public:
    virtual ~ConvexBody() = default;

    virtual int dim() const = 0;
    virtual DefiningEval eval(const Vec& p) const = 0;
    virtual std::string describe() const = 0;
    virtual std::unique_ptr<ConvexBody> clone() const = 0;

    double value(const Vec& p) const { return eval(p).h; }
    Vec gradient(const Vec& p) const { return eval(p).dh; }

    const Vec& interior_point() const { return center_; }
    double bounding_radius() const { return bound_; }

    virtual RadialSample radial(double theta) const;
    // angles has dim()-1 entries (hyperspherical for the ball).
    virtual Vec boundary_point(const Vec& angles) const;
    // Boundary point whose outward normal is `dir`.
    virtual Vec support_point(const Vec& dir) const;

    ConcavityProbe probe(int samples = 1000) const;

protected:
    Vec center_;
    double bound_ = 0.0;
};

class Ball : public ConvexBody {
public:
    Ball(Vec center, double radius);
    int dim() const override { return static_cast<int>(center_.size()); }
    DefiningEval eval(const Vec& p) const override;
    std::string describe() const override;
    std::unique_ptr<ConvexBody> clone() const override { return std::make_unique<Ball>(*this); }
    RadialSample radial(double theta) const override;
    Vec boundary_point(const Vec& angles) const override;
    Vec support_point(const Vec& dir) const override;
    double radius() const { return r_; }

private:
    double r_;
};

// Planar body given by a gauge-like level function q (q < 1 inside) in a
// rotated frame: q = (1-tau)(s1^2/a^2 + s2^2/b^2) + tau(|s1/a|^m + |s2/b|^m).
// tau = 0 is the ellipse. The defining function is
// h = (1 - q) / sqrt(|Dq|^2 + kappa max(1 - q, 0)),
// with kappa the first rung of a fixed ladder that passes the concavity probe.
class Blend : public ConvexBody {
public:
    Blend(Vec center, double a, double b, double angle, double exponent, double tau, std::string kind);
    int dim() const override { return 2; }
    DefiningEval eval(const Vec& p) const override;
    std::string describe() const override;
    std::unique_ptr<ConvexBody> clone() const override { return std::make_unique<Blend>(*this); }
    RadialSample radial(double theta) const override;

    double q(const Vec& p) const;
    double kappa() const { return kappa_; }

private:
    struct QJet {
        double q;
        Eigen::Vector2d g;
        Eigen::Matrix2d H;
        Eigen::Vector2d g_gkk;  // q_k * q_kkk in the body frame (diagonal third derivative)
    };
    QJet qjet_local(const Eigen::Vector2d& s) const;
    Eigen::Vector2d to_local(const Vec& p) const;

    double a_, b_, angle_, m_, tau_, kappa_ = 0.0;
    std::string kind_;
    Eigen::Matrix2d rot_;
};

std::unique_ptr<ConvexBody> make_ball(const Vec& center, double radius);
std::unique_ptr<ConvexBody> make_ellipse(const Vec& center, double a, double b, double angle);
// exponent < 2 is rejected: |s|^m has unbounded curvature at s = 0 and the
// defining function loses the required smoothness.
std::unique_ptr<ConvexBody> make_superellipse(const Vec& center, double a, double b, double exponent, double angle);

}  // namespace khess
