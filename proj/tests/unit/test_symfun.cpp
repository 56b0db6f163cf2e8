#include <doctest.h>

#include <cmath>

#include "khess/error.hpp"
#include "khess/symfun.hpp"
#include "support.hpp"

using namespace khess;
using namespace testing_support;

namespace {

double sigma_brute(const Vec& lam, int k)
{
    const int n = static_cast<int>(lam.size());
    double s = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        double p = 1.0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) p *= lam(i);
        s += p;
    }
    return s;
}

Mat fd_gradient(const Mat& A, int k, Mode mode, double h)
{
    const int n = static_cast<int>(A.rows());
    Mat G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            Mat P = A, M = A;
            P(i, j) += h; M(i, j) -= h;
            if (i != j) { P(j, i) += h; M(j, i) -= h; }
            double d = (eval_operator(P, k, mode).value - eval_operator(M, k, mode).value) / (2 * h);
            G(i, j) = G(j, i) = (i == j) ? d : d / 2;
        }
    return G;
}

}  // namespace

TEST_CASE("sigma_k closed values")
{
    Vec l(3);
    l << 1, 2, 3;
    CHECK(sigma_k(l, 2) == doctest::Approx(11.0).epsilon(1e-15));
    for (int n = 1; n <= 8; ++n)
        for (int k = 1; k <= n; ++k) CHECK(sigma_k(Vec::Ones(n), k) == doctest::Approx(binomial(n, k)));
    CHECK_THROWS_AS(sigma_k(l, 0), ArgumentError);
    CHECK_THROWS_AS(sigma_k(l, 4), ArgumentError);
}

TEST_CASE("sigma_k matches subset enumeration")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Vec l = random_vec(rng, 10, 0.1, 2.0);
        double ref = sigma_brute(l, 4);
        CHECK(std::abs(sigma_k(l, 4) - ref) <= 1e-12 * ref);
    }
    Vec mixed(6);
    mixed << 1e-6, -3.0, 2.5, 1e4, -0.7, 0.2;
    for (int k = 1; k <= 6; ++k) {
        double ref = sigma_brute(mixed, k);
        CHECK(std::abs(sigma_k(mixed, k) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("operator examples")
{
    CHECK(eval_operator(Mat::Identity(3, 3), 2, Mode::primal).value == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
    Mat D = Vec((Vec(3) << 1, 0.5, 1.0 / 3).finished()).asDiagonal();
    CHECK(eval_operator(D, 2, Mode::dual).value == doctest::Approx(std::sqrt(1.0 / 11)).epsilon(1e-14));
}

TEST_CASE("cone violation carries the spectrum")
{
    Mat A = Mat::Identity(2, 2);
    A(1, 1) = -0.5;
    try {
        eval_operator(A, 1, Mode::primal);
        FAIL("expected ConeViolation");
    } catch (const ConeViolation& e) {
        CHECK(e.lambda.minCoeff() == doctest::Approx(-0.5));
    }
    CHECK_THROWS_AS(eval_operator(A, 2, Mode::dual), ConeViolation);
}

TEST_CASE("gradient matches central differences, both modes")
{
    std::mt19937_64 rng(3);
    for (Mode mode : {Mode::primal, Mode::dual}) {
        for (int trial = 0; trial < 10; ++trial) {
            Mat A = random_spd(rng, 4);
            Mat G = eval_operator(A, 2, mode).gradient;
            Mat F = fd_gradient(A, 2, mode, 1e-6);
            CHECK((G - F).norm() <= 1e-6 * G.norm());
        }
        // near-degenerate pair, gap 1e-9
        Mat Q = random_orthogonal(rng, 4);
        Vec d(4);
        d << 1.0, 1.0 + 1e-9, 2.0, 3.0;
        Mat A = Q * d.asDiagonal() * Q.transpose();
        A = symmetrize(A);
        Mat G = eval_operator(A, 2, mode).gradient;
        Mat F = fd_gradient(A, 2, mode, 1e-6);
        CHECK((G - F).norm() <= 1e-6 * G.norm());
    }
}

TEST_CASE("second directional derivative matches differences, including a degenerate pair")
{
    std::mt19937_64 rng(5);
    for (Mode mode : {Mode::primal, Mode::dual}) {
        for (int trial = 0; trial < 6; ++trial) {
            Mat A = random_spd(rng, 4);
            if (trial == 5) {
                Mat Q = random_orthogonal(rng, 4);
                Vec d(4);
                d << 1.0, 1.0 + 1e-12, 1.5, 2.0;
                A = symmetrize(Q * d.asDiagonal() * Q.transpose());
            }
            Mat B = random_spd(rng, 4) - Mat::Identity(4, 4);
            B = symmetrize(B);
            OperatorValue op = eval_operator(A, 3, mode);
            double an = second_directional(op, B, 3, mode);
            double h = 1e-4;
            double fd = (eval_operator(symmetrize(A + h * B), 3, mode).value - 2 * op.value +
                         eval_operator(symmetrize(A - h * B), 3, mode).value) / (h * h);
            CHECK(std::abs(an - fd) <= 1e-5 * std::max(1.0, std::abs(an)));
            CHECK(an <= 1e-12);  // concavity
        }
    }
}

TEST_CASE("duality product equals one")
{
    std::mt19937_64 rng(17);
    Vec k3(3);
    k3 << 1, 2, 3;
    CHECK(duality_product(k3, 2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(duality_product(Vec::Constant(4, 2.7), 3) == doctest::Approx(1.0).epsilon(1e-14));
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + trial % 6;
        Vec kap = random_vec(rng, n, 0.05, 20.0);
        for (int k = 1; k <= n; ++k) worst = std::max(worst, std::abs(duality_product(kap, k) - 1.0));
    }
    CHECK(worst <= 1e-12);
    Vec bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(duality_product(bad, 1), ConeViolation);
}

TEST_CASE("cone_check report")
{
    Vec a(2), b(2), c(3);
    a << 1, 1;
    b << 1, -0.5;
    c << 0.0, 1.0, 2.0;
    CHECK(cone_check(a).inside);
    ConeReport rb = cone_check(b);
    CHECK_FALSE(rb.inside);
    CHECK(rb.lambda_min < 0);
    CHECK_FALSE(rb.strictly_convex);
    ConeReport rc = cone_check(c);
    CHECK(rc.on_boundary);
    CHECK_FALSE(rc.inside);
    CHECK_FALSE(rc.sigma_positive[2]);
}

TEST_CASE("Newton-Maclaurin monotonicity")
{
    std::mt19937_64 rng(23);
    int bad = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 2 + trial % 6;
        Vec l = random_vec(rng, n, 0.01, 5.0);
        Vec e = sigma_all(l);
        double prev = 1e300;
        for (int k = 1; k <= n; ++k) {
            double m = std::pow(e(k) / binomial(n, k), 1.0 / k);
            if (m > prev * (1 + 1e-13)) ++bad;
            prev = m;
        }
    }
    CHECK(bad == 0);
}

TEST_CASE("concavity and orthogonal invariance")
{
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (Mode mode : {Mode::primal, Mode::dual})
        for (int trial = 0; trial < 200; ++trial) {
            int n = 2 + trial % 5;
            int k = 1 + trial % n;
            Mat A = random_spd(rng, n), B = random_spd(rng, n);
            double t = ud(rng);
            double lhs = eval_operator(symmetrize(t * A + (1 - t) * B), k, mode).value;
            double rhs = t * eval_operator(A, k, mode).value + (1 - t) * eval_operator(B, k, mode).value;
            CHECK(lhs >= rhs - 1e-12);
            Mat Q = random_orthogonal(rng, n);
            double f0 = eval_operator(A, k, mode).value;
            double f1 = eval_operator(symmetrize(Q.transpose() * A * Q), k, mode).value;
            CHECK(std::abs(f0 - f1) <= 1e-12 * std::max(1.0, f0));
        }
}

TEST_CASE("Jacobi eigen solver")
{
    std::mt19937_64 rng(31);
    for (int n = 1; n <= 8; ++n) {
        Mat A = random_spd(rng, n, -2.0, 3.0);
        SymEig e = jacobi_eigen(A);
        CHECK((A * e.vectors - e.vectors * e.values.asDiagonal()).norm() <= 1e-12 * A.norm());
        for (int i = 1; i < n; ++i) CHECK(e.values(i) >= e.values(i - 1));
    }
}
