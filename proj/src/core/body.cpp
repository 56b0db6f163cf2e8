#include "khess/body.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "khess/error.hpp"

namespace khess {

namespace {

Vec unit_dir(double theta)
{
    Vec e(2);
    e << std::cos(theta), std::sin(theta);
    return e;
}

}  // namespace

RadialSample ConvexBody::radial(double) const
{
    throw CapabilityError("radial parameterization is available for planar bodies only");
}

Vec ConvexBody::boundary_point(const Vec& angles) const
{
    if (dim() != 2 || angles.size() != 1) throw CapabilityError("boundary_point: planar body expects one angle");
    return center_ + radial(angles(0)).r * unit_dir(angles(0));
}

// Golden-section refinement of max <p(theta), d> after a coarse scan.
Vec ConvexBody::support_point(const Vec& dir) const
{
    if (dim() != 2) throw CapabilityError("support_point: planar bodies only");
    auto f = [&](double t) { return (center_ + radial(t).r * unit_dir(t)).dot(dir); };
    const int scan = 720;
    const double step = 2.0 * std::numbers::pi / scan;
    int best = 0;
    double fb = -1e300;
    for (int i = 0; i < scan; ++i) {
        double v = f(i * step);
        if (v > fb) { fb = v; best = i; }
    }
    double lo = (best - 1) * step, hi = (best + 1) * step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) { lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = f(x2); }
        else { hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = f(x1); }
    }
    double t = 0.5 * (lo + hi);
    return center_ + radial(t).r * unit_dir(t);
}

ConcavityProbe ConvexBody::probe(int samples) const
{
    ConcavityProbe out;
    double worst = -1e300;
    double gdef = 0.0;
    auto visit = [&](const Vec& p) {
        DefiningEval e = eval(p);
        SymEig eig = jacobi_eigen(e.d2h);
        worst = std::max(worst, eig.values(eig.values.size() - 1));
        ++out.samples;
    };
    if (dim() == 2) {
        const int rings = 12;
        for (int j = 0; j < samples; ++j) {
            double t = 2.0 * std::numbers::pi * j / samples;
            Vec e = unit_dir(t);
            double r = radial(t).r;
            Vec b = center_ + r * e;
            gdef = std::max(gdef, std::abs(eval(b).dh.norm() - 1.0));
            for (int i = 0; i <= rings; ++i) visit(center_ + r * (static_cast<double>(i) / rings) * e);
        }
    } else {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        for (int j = 0; j < samples; ++j) {
            Vec d(dim());
            for (int i = 0; i < dim(); ++i) d(i) = nd(rng);
            d.normalize();
            Vec b = support_point(d);
            gdef = std::max(gdef, std::abs(eval(b).dh.norm() - 1.0));
            visit(center_ + ud(rng) * (b - center_));
        }
    }
    out.theta_c = -worst;
    out.gradient_defect = gdef;
    return out;
}

// Ball

Ball::Ball(Vec center, double radius) : r_(radius)
{
    if (!(radius > 0.0)) throw ConfigError("ball radius must be positive");
    if (center.size() < 1) throw ConfigError("ball center must be nonempty");
    center_ = std::move(center);
    bound_ = radius;
}

DefiningEval Ball::eval(const Vec& p) const
{
    Vec d = p - center_;
    const int n = dim();
    return {(r_ * r_ - d.squaredNorm()) / (2.0 * r_), -d / r_, -Mat::Identity(n, n) / r_};
}

std::string Ball::describe() const
{
    std::ostringstream os;
    os << "ball(r=" << r_ << ")";
    return os.str();
}

RadialSample Ball::radial(double) const
{
    if (dim() != 2) throw CapabilityError("radial parameterization is available for planar bodies only");
    return {r_, 0.0, 0.0};
}

Vec Ball::boundary_point(const Vec& angles) const
{
    const int n = dim();
    if (angles.size() != n - 1) throw ArgumentError("boundary_point: expected dim-1 angles");
    Vec x(n);
    double s = 1.0;
    for (int i = 0; i < n - 1; ++i) {
        x(i) = s * std::cos(angles(i));
        s *= std::sin(angles(i));
    }
    x(n - 1) = s;
    return center_ + r_ * x;
}

Vec Ball::support_point(const Vec& dir) const { return center_ + r_ * dir.normalized(); }

// Blend

Blend::Blend(Vec center, double a, double b, double angle, double exponent, double tau, std::string kind)
    : a_(a), b_(b), angle_(angle), m_(exponent), tau_(tau), kind_(std::move(kind))
{
    if (center.size() != 2) throw ConfigError(kind_ + ": center must have 2 entries");
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError(kind_ + ": semi-axes must be positive");
    if (!(exponent >= 2.0)) {
        std::ostringstream os;
        os << kind_ << ": exponent " << exponent << " < 2 is not strictly convex with bounded curvature";
        throw ConfigError(os.str());
    }
    center_ = std::move(center);
    bound_ = std::hypot(a, b);
    rot_ << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);

    const double base = 2.0 / (a * a) + 2.0 / (b * b);
    const double floor = 0.02 / std::max(a, b);
    for (double mult : {1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0}) {
        kappa_ = mult * base;
        if (probe(96).theta_c >= floor) return;
    }
    throw ConfigError(kind_ + ": no uniformly concave defining function found for these parameters");
}

Eigen::Vector2d Blend::to_local(const Vec& p) const
{
    Eigen::Vector2d d(p(0) - center_(0), p(1) - center_(1));
    return rot_.transpose() * d;
}

Blend::QJet Blend::qjet_local(const Eigen::Vector2d& s) const
{
    QJet J;
    J.q = 0.0;
    J.H.setZero();
    const double sc[2] = {a_, b_};
    const double m = m_, tau = tau_;
    for (int i = 0; i < 2; ++i) {
        double t = s(i) / sc[i];
        double at = std::abs(t);
        double sg = (t > 0) - (t < 0);
        J.q += (1.0 - tau) * t * t + tau * std::pow(at, m);
        J.g(i) = ((1.0 - tau) * 2.0 * t + tau * m * std::pow(at, m - 1.0) * sg) / sc[i];
        J.H(i, i) = ((1.0 - tau) * 2.0 + tau * m * (m - 1.0) * std::pow(at, m - 2.0)) / (sc[i] * sc[i]);
        double c3 = tau * m * (m - 1.0) * (m - 2.0);
        J.g_gkk(i) = c3 == 0.0 ? 0.0
                               : c3 / std::pow(sc[i], 4) *
                                     ((1.0 - tau) * 2.0 * std::pow(at, m - 2.0) + tau * m * std::pow(at, 2.0 * m - 4.0));
    }
    return J;
}

double Blend::q(const Vec& p) const { return qjet_local(to_local(p)).q; }

DefiningEval Blend::eval(const Vec& p) const
{
    QJet J = qjet_local(to_local(p));
    const double f = 1.0 - J.q;
    // The closed body, including its rounded boundary, takes the inner branch.
    const bool in = f >= -1e-12;
    const Eigen::Vector2d& g = J.g;
    const Eigen::Matrix2d& H = J.H;

    double P = g.squaredNorm() + (in ? kappa_ * f : 0.0);
    Eigen::Vector2d DP = 2.0 * H * g - (in ? kappa_ : 0.0) * g;
    Eigen::Matrix2d D2P = 2.0 * (H * H + Eigen::Matrix2d(J.g_gkk.asDiagonal())) - (in ? kappa_ : 0.0) * H;

    double r = 1.0 / std::sqrt(P);
    double r3 = r * r * r, r5 = r3 * r * r;
    double h = f * r;
    Eigen::Vector2d dh = -g * r - 0.5 * f * r3 * DP;
    Eigen::Matrix2d d2h = -H * r + 0.5 * r3 * (g * DP.transpose() + DP * g.transpose()) - 0.5 * f * r3 * D2P +
                          0.75 * f * r5 * DP * DP.transpose();

    DefiningEval out;
    out.h = h;
    out.dh = rot_ * dh;
    out.d2h = rot_ * d2h * rot_.transpose();
    return out;
}

std::string Blend::describe() const
{
    std::ostringstream os;
    os << kind_ << "(a=" << a_ << ", b=" << b_;
    if (tau_ > 0.0) os << ", m=" << m_;
    os << ", angle=" << angle_ << ")";
    return os.str();
}

RadialSample Blend::radial(double theta) const
{
    Eigen::Vector2d e(std::cos(theta), std::sin(theta));
    Eigen::Vector2d el = rot_.transpose() * e;
    auto qr = [&](double r) { return qjet_local(r * el).q; };

    double lo = 0.0, hi = std::max(a_, b_);
    while (qr(hi) < 1.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (qr(mid) < 1.0 ? lo : hi) = mid;
    }
    double r = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        QJet J = qjet_local(r * el);
        double d = J.g.dot(el);
        if (d <= 0.0) break;
        double nr = r - (J.q - 1.0) / d;
        if (nr > lo && nr < hi) r = nr;
    }

    // Implicit differentiation of q(c + r e(theta)) = 1.
    QJet J = qjet_local(r * el);
    Eigen::Vector2d g = rot_ * J.g;
    Eigen::Matrix2d H = rot_ * J.H * rot_.transpose();
    Eigen::Vector2d ep(-e(1), e(0));
    double Fr = g.dot(e);
    double Ft = r * g.dot(ep);
    double Frr = e.dot(H * e);
    double Frt = g.dot(ep) + r * e.dot(H * ep);
    double Ftt = r * r * ep.dot(H * ep) - r * g.dot(e);
    double dr = -Ft / Fr;
    double d2r = -(Ftt + 2.0 * Frt * dr + Frr * dr * dr) / Fr;
    return {r, dr, d2r};
}

std::unique_ptr<ConvexBody> make_ball(const Vec& center, double radius) { return std::make_unique<Ball>(center, radius); }

std::unique_ptr<ConvexBody> make_ellipse(const Vec& center, double a, double b, double angle)
{
    return std::make_unique<Blend>(center, a, b, angle, 2.0, 0.0, "ellipse");
}

std::unique_ptr<ConvexBody> make_superellipse(const Vec& center, double a, double b, double exponent, double angle)
{
    return std::make_unique<Blend>(center, a, b, angle, exponent, 0.5, "superellipse");
}

}  // namespace khess
