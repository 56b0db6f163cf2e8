#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SparseLU>

#include "khess/duality.hpp"
#include "khess/error.hpp"
#include "khess/solver.hpp"

using namespace khess;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

const double kRho = 0.5;
const double kR = std::sqrt(1.0 + kRho * kRho);

Problem cap_problem(int k, int n_r)
{
    Problem p;
    p.omega = make_ball(v2(0, 0), kRho);
    p.omega_star = make_ball(v2(0, 0), kRho);
    p.k = k;
    p.psi = psi::constant(1.0);
    p.n_r = n_r;
    p.n_theta = 2 * n_r;
    return p;
}

// u* = R w* solves the problem exactly at this eps.
Problem manufactured(int n_r, double eps = 0.1)
{
    Problem p = cap_problem(1, n_r);
    p.continuation = false;
    p.psi = psi::manufactured_cap(kR, 1, 2, eps);
    return p;
}

Problem ellipse_problem(int n_r, double angle = 0.3)
{
    Problem p = cap_problem(1, n_r);
    p.omega_star = make_ellipse(v2(0, 0), 0.6, 0.35, angle);
    return p;
}

Vec exact_cap(const PolarGrid& g)
{
    Vec u(g.size());
    for (int i = 0; i < g.size(); ++i) u(i) = kR * w_star(g.node(i));
    return u;
}

Vec interior_rows(const DualSolver& s, const Vec& r)
{
    Vec out(r.size());
    int m = 0;
    for (int i = 0; i < r.size(); ++i)
        if (!s.grid().is_boundary(i)) out(m++) = r(i);
    return out.head(m);
}

}  // namespace

TEST_CASE("exact cap residual is second order")
{
    const int k = 2;
    std::vector<double> res;
    for (int n : {16, 32, 64}) {
        Problem p = cap_problem(k, n);
        p.continuation = false;
        p.psi = psi::constant(1.0 / kR);  // binom(2,2)^{1/2} / R
        DualSolver s(p);
        Vec r = s.residual(exact_cap(s.grid()), 0.0);
        res.push_back(r.lpNorm<Eigen::Infinity>());
        CHECK(res.back() <= 2.0 * s.grid().h() * s.grid().h());
    }
    MESSAGE("cap residuals " << res[0] << " " << res[1] << " " << res[2]);
    CHECK(res[1] / res[2] >= 3.0);
}

TEST_CASE("residual decreases as the constant grows")
{
    // psi* = exp(eps u*)/psi0 is increasing in u*, so F - psi* is decreasing.
    Problem p = cap_problem(1, 12);
    DualSolver s(p);
    Vec u(s.grid().size());
    for (int i = 0; i < u.size(); ++i) u(i) = 0.5 * s.grid().node(i).squaredNorm();
    Vec prev;
    for (double C : {0.0, 1.0, 2.0, 5.0, 20.0}) {
        Vec r = interior_rows(s, s.residual(u, 0.2, C));
        if (prev.size()) CHECK((r.array() < prev.array()).all());
        prev = r;
    }
}

TEST_CASE("residual grows linearly under small perturbations")
{
    Problem p = manufactured(12);
    DualSolver s(p);
    Vec u = exact_cap(s.grid());
    Vec r0 = s.residual(u, 0.1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-1, 1);
    Vec v(u.size());
    for (int i = 0; i < v.size(); ++i) v(i) = ud(rng);
    std::vector<double> d;
    // Stencil weights reach 1e5 next to the centre, so small means small
    // against that.
    for (double delta : {1e-9, 2e-9, 4e-9, 8e-9}) d.push_back((s.residual(u + delta * v, 0.1) - r0).lpNorm<Eigen::Infinity>());
    for (size_t i = 1; i < d.size(); ++i) CHECK(d[i] / d[i - 1] == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("Jacobian matches finite differences at random feasible states")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int t = 0; t < 20; ++t) {
        Problem p = t % 2 ? ellipse_problem(10) : cap_problem(1 + t % 3 / 2, 10);
        p.k = 1 + (t / 2) % 2;
        DualSolver s(p);
        double eps = 0.05 + 0.35 * (0.5 + 0.5 * ud(rng));
        Vec u = s.initial_guess(eps);
        Vec a = v2(ud(rng), ud(rng));
        for (int i = 0; i < u.size(); ++i) {
            const Vec& y = s.grid().node(i);
            u(i) += 0.2 * (a(0) * y(0) * y(0) * y(0) + a(1) * y(0) * y(1) * y(1)) + 0.1 * y.squaredNorm();
        }
        u = s.repair(u);
        double e = jacobian_fd_error(s, u, eps, 0.3 * ud(rng));
        CHECK(e <= 1e-6);
    }
}

TEST_CASE("cap Jacobian with eps > 0 is nonsingular")
{
    Problem p = manufactured(16);
    DualSolver s(p);
    SparseMat J = s.jacobian(exact_cap(s.grid()), 0.1);
    Eigen::SparseLU<SparseMat> lu(J);
    REQUIRE(lu.info() == Eigen::Success);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-1, 1);
    Vec b(J.rows());
    for (int i = 0; i < b.size(); ++i) b(i) = ud(rng);
    Vec x = lu.solve(b);
    CHECK((J * x - b).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("cap Jacobian commutes with the ray shift")
{
    Problem p = manufactured(16);
    DualSolver s(p);
    const PolarGrid& g = s.grid();
    Mat J = Mat(s.jacobian(exact_cap(g), 0.1));
    const int N = g.size();
    Mat P = Mat::Zero(N, N);
    for (int i = 0; i < N; ++i) P(g.index(g.ring_of(i), g.ray_of(i) + 1), i) = 1.0;
    double d = (P * J - J * P).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff();
    MESSAGE("relative commutator " << d);
    CHECK(d <= 1e-10);
}

TEST_CASE("Newton from a perturbed cap converges quadratically")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(-1e-3, 1e-3);
    for (int n : {16, 24, 32})
        for (int trial = 0; trial < 3; ++trial) {
            Problem p = manufactured(n);
            DualSolver s(p);
            const PolarGrid& g = s.grid();
            // Smooth perturbation of size 1e-3. Nodal noise of that size
            // moves the discrete Hessian next to the centre by O(100).
            const double a = ud(rng), b = ud(rng), c = ud(rng), d = ud(rng);
            Vec u = exact_cap(g);
            for (int i = 0; i < u.size(); ++i) {
                const Vec& y = g.node(i);
                u(i) += a + b * y(0) + c * y(1) * y(1) + d * std::sin(3 * y(0) + y(1));
            }
            NewtonReport rep = s.newton(u, 0.1);
            CHECK(rep.residual <= 1e-10);
            CHECK(rep.iterations <= 8);
            const auto& r = rep.residuals;
            for (size_t j = 0; j + 1 < r.size(); ++j)
                if (r[j] < 1e-2 && r[j + 1] > 1e-11) CHECK(r[j + 1] <= 10.0 * r[j] * r[j]);

            NewtonReport again = s.newton(rep.u, 0.1);
            CHECK(again.iterations <= 1);
            CHECK(again.rejected_steps == 0);
        }
}

TEST_CASE("concave start is repaired or stalls cleanly")
{
    Problem p = manufactured(12);
    DualSolver s(p);
    const PolarGrid& g = s.grid();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(-1e-3, 1e-3);
    for (int t = 0; t < 5; ++t) {
        Vec u = exact_cap(g);
        if (t < 3) {
            const double amp = t == 0 ? 0.5 : (t == 1 ? 2.0 : 8.0);
            for (int i = 0; i < u.size(); ++i) u(i) -= amp * std::exp(-20.0 * g.node(i).squaredNorm());
        } else {
            for (int i = 0; i < u.size(); ++i) u(i) += ud(rng);
        }
        try {
            NewtonReport rep = s.newton(u, 0.1);
            if (t < 3) CHECK(rep.repaired);
            CHECK(rep.residual <= 1e-10);
        } catch (const NonConvergence& e) {
            MESSAGE("clean stop: " << std::string(e.what()));
            CHECK(e.status() == Status::nonconvergence);
        }
    }
}

TEST_CASE("continuation on the cap recovers c")
{
    for (int k : {1, 2}) {
        const double exact = k == 1 ? 2.0 / kR : 1.0 / (kR * kR);
        std::vector<double> bound;
        for (int n : {16, 24}) {
            DualSolver s(cap_problem(k, n));
            SolverState st = s.solve();
            CHECK(st.converged);
            MESSAGE("k " << k << " n_r " << n << " c " << st.c_estimate);
            CHECK(std::abs(st.c_estimate / exact - 1.0) <= 0.005);
            double b = 0.0;
            const auto& m = st.level_mean_u;
            const double sign = m[1] > m[0] ? 1.0 : -1.0;
            for (size_t j = 0; j < m.size(); ++j) {
                if (j) CHECK(sign * (m[j] - m[j - 1]) > 0.0);
                b = std::max(b, std::abs(st.history[j].eps * m[j]));
            }
            bound.push_back(b);
            for (size_t j = 0; j < st.warm_residual.size(); ++j) CHECK(st.warm_residual[j] <= st.cold_residual[j]);
        }
        CHECK(bound[1] == doctest::Approx(bound[0]).epsilon(0.01));
    }
}

TEST_CASE("primal recovery on the manufactured cap")
{
    // Exact solution R w*, so the recovered primal is -sqrt(R^2 - |x|^2) up
    // to a constant.
    std::vector<double> errs;
    for (int n : {16, 32}) {
        DualSolver s(manufactured(n));
        SolverState st = s.solve();
        CHECK(st.converged);
        CHECK(std::isnan(st.c_estimate));
        PrimalRecovery rec = s.recover_primal(st.u_shape, st.level);
        Vec diff(rec.points.size());
        for (size_t i = 0; i < rec.points.size(); ++i)
            diff(i) = rec.values(i) + std::sqrt(kR * kR - rec.points[i].squaredNorm());
        diff.array() -= diff.mean();
        errs.push_back(diff.lpNorm<Eigen::Infinity>());
        const double h = s.grid().h();
        CHECK(errs.back() <= h * h);
        CHECK(rec.gauss.hausdorff <= 2 * h);
        PolarGrid src(*s.problem().omega, n, 2 * n);
        double m = 0.0;
        for (int i = 0; i < src.size(); ++i) m += src.quadrature()[i] * rec.normalized(i);
        CHECK(std::abs(m) <= 1e-12);
    }
    MESSAGE("primal errors " << errs[0] << " " << errs[1]);
    CHECK(errs[0] / errs[1] >= 3.0);
}

TEST_CASE("diagnostics on the cap")
{
    std::vector<double> em, et;
    for (int n : {16, 32}) {
        DualSolver s(manufactured(n));
        const double h = s.grid().h();
        Diagnostics d = s.diagnostics(exact_cap(s.grid()));
        CHECK(std::abs(d.chi_min - 1.0) <= 1e-6);
        CHECK(std::abs(d.chi_formula_min - 1.0) <= 1e-6);
        // Closed forms for u* = R w*: radii R, and (1 + rho^2) D_tt u* = R w*
        // = R^2 on |y| = rho.
        em.push_back(std::abs(d.M - kR));
        et.push_back(std::abs(d.M_tilde - kR * kR));
        CHECK(em.back() <= 2 * h * h);
        CHECK(et.back() <= 2 * h * h);
        CHECK(d.M >= d.M_tilde / (1.0 + d.max_y2));
    }
    MESSAGE("M errors " << em[0] << " " << em[1] << ", M~ errors " << et[0] << " " << et[1]);

    // The continuation state at eps = 0.025 is symmetric but not a cap.
    DualSolver s(cap_problem(1, 16));
    SolverState st = s.solve();
    CHECK(std::abs(st.diagnostics.chi_min - 1.0) <= 1e-6);
    CHECK(std::abs(st.diagnostics.chi_formula_min - 1.0) <= 1e-6);
}

TEST_CASE("ellipse target: strict obliqueness and the curvature sanity relation")
{
    DualSolver s(ellipse_problem(16));
    SolverState st = s.solve();
    CHECK(st.converged);
    const Diagnostics& d = st.diagnostics;
    MESSAGE("chi_min " << d.chi_min << " at angle " << d.chi_angle);
    CHECK(d.chi_min > 0.0);
    CHECK(d.chi_formula_min > 0.0);
    CHECK(d.M >= d.M_tilde / (1.0 + d.max_y2));
    for (size_t j = 0; j < st.warm_residual.size(); ++j) CHECK(st.warm_residual[j] <= st.cold_residual[j]);
}

TEST_CASE("rotating the target rotates the solution")
{
    const int n = 16;
    DualSolver a(ellipse_problem(n, 0.3));
    SolverState sa = a.solve();
    const int shift = 3;
    const double dtheta = 2 * std::numbers::pi / (2 * n);
    DualSolver b(ellipse_problem(n, 0.3 + shift * dtheta));
    SolverState sb = b.solve();
    double d = 0.0;
    for (int i = 0; i < a.grid().size(); ++i) {
        int j = b.grid().index(a.grid().ring_of(i), a.grid().ray_of(i) + shift);
        CHECK((b.grid().node(j) - Eigen::Rotation2Dd(shift * dtheta) * a.grid().node(i)).norm() <= 1e-12);
        d = std::max(d, std::abs(sb.u_star(j) - sa.u_star(i)));
    }
    MESSAGE("node-wise difference " << d);
    CHECK(d <= 1e-8);
    CHECK(sb.c_estimate == doctest::Approx(sa.c_estimate).epsilon(1e-9));
}

TEST_CASE("extrapolation and Hausdorff oracles")
{
    // eps mean_u = L0 + a eps exactly: the extrapolation returns exp(k L0).
    std::vector<double> eps{0.1, 0.05}, mu;
    for (double e : eps) mu.push_back((0.3 + 0.7 * e) / e);
    CHECK(extrapolate_c(eps, mu, 2) == doctest::Approx(std::exp(0.6)).epsilon(1e-14));
    CHECK(std::isnan(extrapolate_c({0.1}, {1.0}, 1)));

    std::vector<Vec> a, b;
    for (int j = 0; j < 64; ++j) {
        double t = 2 * std::numbers::pi * j / 64;
        a.push_back(v2(std::cos(t), std::sin(t)));
        b.push_back(1.1 * a.back());
    }
    CHECK(polyline_hausdorff(a, b) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(polyline_hausdorff(a, a) == 0.0);
    CHECK_THROWS_AS(polyline_hausdorff(a, {}), ArgumentError);
}

TEST_CASE("solver rejects bad problems")
{
    Problem p = cap_problem(3, 12);
    CHECK_THROWS_AS(DualSolver{p}, ConfigError);
    p = cap_problem(1, 12);
    p.schedule = {0.1, 0.2};
    CHECK_THROWS_AS(DualSolver{p}, ConfigError);
    p = cap_problem(1, 12);
    p.omega = make_ball(Vec::Zero(3), 0.5);
    CHECK_THROWS_AS(DualSolver{p}, CapabilityError);
    p = cap_problem(1, 12);
    DualSolver s(p);
    CHECK_THROWS_AS(s.residual(Vec::Zero(5), 0.1), ArgumentError);
}

TEST_CASE("unreachable tolerance reports the completed levels")
{
    Problem p = cap_problem(1, 12);
    p.options.newton_tol = 1e-30;
    p.options.max_iterations = 12;
    DualSolver s(p);
    try {
        s.solve();
        FAIL("expected a partial solve");
    } catch (const PartialSolve& e) {
        CHECK(e.cause == Status::nonconvergence);
        CHECK(e.status() == Status::nonconvergence);
        REQUIRE(!e.history.empty());
        CHECK(e.history.front().eps == 0.4);
    }
}
