#include <doctest.h>

#include <cmath>
#include <numbers>

#include "khess/error.hpp"
#include "khess/rotations.hpp"
#include "support.hpp"

using namespace khess;
using namespace testing_support;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// Boundary anchor and unit tangent of a planar body at angle theta.
std::pair<Vec, Vec> anchor(const ConvexBody& body, double theta)
{
    Vec y0 = body.boundary_point((Vec(1) << theta).finished());
    Vec nu = body.gradient(y0).normalized();
    return {y0, v2(-nu(1), nu(0))};
}

RotationField random_field(std::mt19937_64& rng, int n)
{
    Vec y0 = random_vec(rng, n, -0.8, 0.8);
    Vec xi = random_vec(rng, n, -1, 1).normalized();
    return make_field_unchecked(y0, xi, 1.2, Vec::Zero(n));
}

}  // namespace

TEST_CASE("north pole anchor")
{
    Ball disk(v2(0, 0), 0.5);
    RotationField f = make_field_unchecked(v2(0, 0), v2(1, 0), 0.5, v2(0, 0));
    Vec e1 = f.frame()[0];
    CHECK((e1 - Vec::Unit(3, 0) * -1.0).norm() <= 1e-15);
    CHECK((f.eval(v2(0, 0)) - v2(1, 0)).norm() <= 1e-15);
    CHECK(f.speed() == doctest::Approx(1.0));
    // Rotating the pole towards -E_1 by t lands at y = (tan t, 0).
    for (double t : {0.02, 0.1, 0.3}) {
        if (t > f.t_max()) continue;
        CHECK((f.flow(t, v2(0, 0)) - v2(std::tan(t), 0)).norm() <= 1e-14);
    }
}

TEST_CASE("frame is orthonormal and completes x0")
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 100; ++t) {
        int n = 2 + t % 3;
        RotationField f = random_field(rng, n);
        std::vector<Vec> all{f.x0()};
        for (const Vec& e : f.frame()) all.push_back(e);
        REQUIRE(static_cast<int>(all.size()) == n + 1);
        for (size_t i = 0; i < all.size(); ++i)
            for (size_t j = 0; j < all.size(); ++j) CHECK(std::abs(all[i].dot(all[j]) - (i == j)) <= 1e-13);
    }
}

TEST_CASE("tangency at the anchor on an ellipse")
{
    auto E = make_ellipse(v2(0.1, -0.05), 0.9, 0.55, 0.3);
    for (int j = 0; j < 24; ++j) {
        auto [y0, xi] = anchor(*E, 2 * std::numbers::pi * j / 24 + 0.1);
        RotationField f = make_field(y0, xi, *E);
        CHECK((f.eval(y0) - w_star(y0) * xi).norm() <= 1e-12);
        CHECK(f.t_max() > 0.0);
        // Equality case of the envelope at the anchor.
        CHECK(std::abs(f.eval(y0).squaredNorm() - (1 + y0.squaredNorm())) <= 1e-12);
    }
}

TEST_CASE("make_field checks its preconditions")
{
    auto E = make_ellipse(v2(0, 0), 0.9, 0.55, 0.0);
    auto [y0, xi] = anchor(*E, 0.7);
    CHECK_THROWS_AS(make_field(y0 * 0.9, xi, *E), BoundaryMismatch);
    CHECK_THROWS_AS(make_field(y0, (xi + 0.1 * E->gradient(y0)).normalized(), *E), BoundaryMismatch);
    CHECK_THROWS_AS(make_field(y0, 2.0 * xi, *E), BoundaryMismatch);
}

TEST_CASE("envelope bound fails away from the anchor")
{
    // |T|^2 = (1+|y|^2)(a0^2 + a1^2) would need an orthonormal chart frame;
    // the chart images of x0 and e1 have Gram matrix I + 2 y y^T instead.
    std::mt19937_64 rng(22);
    int violations = 0;
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        RotationField f = random_field(rng, 2);
        Vec y = random_vec(rng, 2, -1, 1);
        Vec a = f.components(y);
        double lhs = f.eval(y).squaredNorm();
        worst = std::max(worst, lhs / (1 + y.squaredNorm()));
        if (lhs > 1 + y.squaredNorm() + 1e-12) ++violations;
        CHECK(std::abs(a.squaredNorm() - 1.0) <= 1e-13);
    }
    MESSAGE("envelope violations " << violations << " / 1000, worst ratio " << worst);
    CHECK(violations > 0);
}

TEST_CASE("group law and identity")
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ud(0, 1);
    for (int t = 0; t < 1000; ++t) {
        int n = 2 + t % 2;
        RotationField f = random_field(rng, n);
        REQUIRE(f.t_max() > 0.0);
        double a = 0.5 * f.t_max() * ud(rng), b = 0.5 * f.t_max() * ud(rng);
        Vec y = random_vec(rng, n, -1, 1).normalized() * (1.2 * ud(rng));
        CHECK((f.flow(0.0, y) - y).norm() <= 1e-13 * (1 + y.norm()));
        Vec ab = f.flow(a + b, y);
        CHECK((f.flow(a, f.flow(b, y)) - ab).norm() <= 1e-10);
        CHECK((f.flow(b, f.flow(a, y)) - ab).norm() <= 1e-10);
        CHECK((f.flow(-a, f.flow(a, y)) - y).norm() <= 1e-10);
    }
}

TEST_CASE("field is the flow derivative at second order")
{
    std::mt19937_64 rng(24);
    for (int t = 0; t < 50; ++t) {
        int n = 2 + t % 2;
        RotationField f = random_field(rng, n);
        Vec y = random_vec(rng, n, -0.9, 0.9);
        auto err = [&](double dt) { return ((f.flow(dt, y) - f.flow(-dt, y)) / (2 * dt) - f.eval(y)).norm(); };
        double e1 = err(1e-3), e2 = err(5e-4);
        CHECK(e1 <= 1e-5);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("field components are quadratic polynomials")
{
    std::mt19937_64 rng(25);
    for (int t = 0; t < 50; ++t) {
        int n = 2 + t % 3;
        RotationField f = random_field(rng, n);
        Vec p = random_vec(rng, n, -1, 1), d = random_vec(rng, n, -1, 1);
        const double s = 0.3;
        Vec third = f.eval(p + 3 * s * d) - 3 * f.eval(p + 2 * s * d) + 3 * f.eval(p + s * d) - f.eval(p);
        CHECK(third.cwiseAbs().maxCoeff() <= 1e-10);
        // Coefficients reproduce the evaluation.
        Vec y = random_vec(rng, n, -1, 1);
        Vec poly = f.speed() * f.constant() + f.speed() * f.linear() * y;
        for (int m = 0; m < n; ++m) poly(m) += y.dot(f.quadratic(m) * y);
        CHECK((poly - f.eval(y)).norm() <= 1e-13);
        // The closed form through the frame components.
        Vec a = f.components(y);
        const Vec& x0 = f.x0();
        const Vec& e1 = f.frame()[0];
        Vec closed(n);
        for (int m = 0; m < n; ++m)
            closed(m) = w_star(y) * (a(1) * (x0(m) + y(m) * x0(n)) - a(0) * (e1(m) + y(m) * e1(n)));
        CHECK((f.speed() * closed - f.eval(y)).norm() <= 1e-13);
    }
}

TEST_CASE("flow transports first and second derivatives")
{
    std::mt19937_64 rng(26);
    for (int t = 0; t < 30; ++t) {
        const int n = 2;
        RotationField f = random_field(rng, n);
        Mat A = random_spd(rng, n, -1, 1);
        Vec b = random_vec(rng, n, -1, 1);
        Vec c3 = random_vec(rng, n, -1, 1);
        auto h = [&](const Vec& y) { return 0.5 * y.dot(A * y) + b.dot(y) + std::pow(c3.dot(y), 3); };
        Vec y = random_vec(rng, n, -0.7, 0.7);
        Jet2 J;
        J.point = y;
        J.value = h(y);
        J.gradient = A * y + b + 3 * std::pow(c3.dot(y), 2) * c3;
        J.hessian = A + 6 * c3.dot(y) * c3 * c3.transpose();
        AlongDerivatives D = derivative_along(f, J);
        auto err = [&](double dt) {
            double hp = h(f.flow(dt, y)), hm = h(f.flow(-dt, y)), h0 = h(y);
            return std::make_pair(std::abs((hp - hm) / (2 * dt) - D.Tu), std::abs((hp - 2 * h0 + hm) / (dt * dt) - D.TTu));
        };
        auto [a1, b1] = err(2e-3);
        auto [a2, b2] = err(1e-3);
        CHECK(a1 / a2 == doctest::Approx(4.0).epsilon(0.1));
        CHECK(b1 / b2 == doctest::Approx(4.0).epsilon(0.1));
    }
}

TEST_CASE("derivatives along the field")
{
    std::mt19937_64 rng(27);
    RotationField f = random_field(rng, 2);
    Vec y = v2(0.2, -0.3);
    Jet2 J;
    J.point = y;
    J.value = 3.0;
    J.gradient = Vec::Zero(2);
    J.hessian = Mat::Zero(2, 2);
    AlongDerivatives c = derivative_along(f, J);
    CHECK(c.Tu == 0.0);
    CHECK(c.TTu == 0.0);
    CHECK(c.D_TT_u == 0.0);

    J.gradient = v2(0.7, -1.1);
    AlongDerivatives l = derivative_along(f, J);
    CHECK(std::abs(l.TTu - (f.jacobian(y) * f.eval(y)).dot(J.gradient)) <= 1e-14);
    CHECK(l.D_TT_u == 0.0);

    for (int t = 0; t < 50; ++t) {
        int n = 2 + t % 2;
        RotationField g = random_field(rng, n);
        Mat A = random_spd(rng, n, -1, 1);
        Vec b = random_vec(rng, n, -1, 1);
        Vec p = random_vec(rng, n, -0.8, 0.8);
        auto Du = [&](const Vec& q) { return (A * q + b).eval(); };
        auto Tu = [&](const Vec& q) { return g.eval(q).dot(Du(q)); };
        Jet2 Q;
        Q.point = p;
        Q.value = 0.5 * p.dot(A * p) + b.dot(p);
        Q.gradient = Du(p);
        Q.hessian = A;
        AlongDerivatives d = derivative_along(g, Q);
        CHECK(std::abs(d.Tu - Tu(p)) <= 1e-13);
        CHECK(std::abs(d.D_TT_u - g.eval(p).dot(A * g.eval(p))) <= 1e-13);
        // Tu is cubic in y, so along the line p + s T(p) the five-point
        // derivative is exact.
        Vec T = g.eval(p);
        const double s = 0.05;
        double fd = (8 * (Tu(p + s * T) - Tu(p - s * T)) - (Tu(p + 2 * s * T) - Tu(p - 2 * s * T))) / (12 * s);
        CHECK(std::abs(d.TTu - fd) <= 1e-10);
    }
}

TEST_CASE("differentiated equation on exact cap states")
{
    const double R = std::sqrt(1.25);
    Ball disk(v2(0, 0), 0.5);
    PolarGrid g(disk, 32, 64);
    Vec us(g.size());
    for (int i = 0; i < g.size(); ++i) us(i) = R * w_star(g.node(i));
    PsiSpec psi = psi::constant(1.0 / R);
    auto [y0, xi] = anchor(disk, 0.4);
    RotationField f = make_field(y0, xi, disk);
    int node = g.index(10, 5);
    CHECK(differentiated_equation_check(f, g, us, node, 1, psi) <= 1e-8);
    CHECK(differentiated_equation_check(f.zero(), g, us, node, 1, psi) == 0.0);
    CHECK_THROWS_AS(differentiated_equation_check(f, g, us, g.index(32, 0), 1, psi), DomainError);
}
