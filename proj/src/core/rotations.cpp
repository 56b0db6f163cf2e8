#include "khess/rotations.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "khess/error.hpp"
#include "khess/symfun.hpp"

namespace khess {

namespace {

// Unnormalized dP^{-1}(xi) at y0: (-xi, 0)/w0 - x0 (y0.xi)/w0^2.
Vec dP_inverse(const Vec& y0, const Vec& xi)
{
    const int n = static_cast<int>(y0.size());
    const double w = w_star(y0);
    Vec d = Vec::Zero(n + 1);
    d.head(n) = -xi / w;
    return d - unproject(y0) * (y0.dot(xi) / (w * w));
}

// Largest t <= 0.5 on a 0.005 ladder such that every probe keeps
// x_{n+1} >= 0.1 under rotation by angles in [-t, t].
double compute_t_max(const RotationField& f, double radius, const Vec& center)
{
    const int n = f.dim();
    std::vector<Vec> probes{center};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 400; ++i) {
        Vec d(n);
        for (int j = 0; j < n; ++j) d(j) = nd(rng);
        probes.push_back(center + radius * d.normalized());
    }
    const Vec& x0 = f.x0();
    const Vec& e1 = f.frame()[0];
    // Height of a probe rotated by ang: rest_top + a0 (cos x0_top + sin e1_top)
    // + a1 (cos e1_top - sin x0_top).
    struct Probe {
        double a0, a1, rest_top;
    };
    std::vector<Probe> pr;
    pr.reserve(probes.size());
    for (const Vec& y : probes) {
        Vec x = unproject(y);
        double a0 = x.dot(x0), a1 = x.dot(e1);
        pr.push_back({a0, a1, x(n) - a0 * x0(n) - a1 * e1(n)});
    }
    double best = 0.0;
    for (int step = 1; step <= 100; ++step) {
        double t = 0.005 * step;
        bool ok = true;
        for (double ang : {t * f.speed(), -t * f.speed()}) {
            const double c = std::cos(ang), s = std::sin(ang);
            for (const Probe& q : pr)
                if (q.rest_top + (q.a0 * c - q.a1 * s) * x0(n) + (q.a0 * s + q.a1 * c) * e1(n) < 0.1) {
                    ok = false;
                    break;
                }
            if (!ok) break;
        }
        if (!ok) break;
        best = t;
    }
    return best;
}

}  // namespace

RotationField make_field_unchecked(const Vec& y0, const Vec& xi, double bounding_radius, const Vec& center)
{
    const int n = static_cast<int>(y0.size());
    if (xi.size() != n) throw ArgumentError("make_field: xi and y0 differ in dimension");
    RotationField f;
    f.y0_ = y0;
    f.xi_ = xi;
    f.x0_ = unproject(y0);
    Vec d = dP_inverse(y0, xi);
    const double dn = d.norm();
    if (!(dn > 0.0)) throw ArgumentError("make_field: xi must be nonzero");
    f.frame_.push_back(d / dn);
    f.speed_ = w_star(y0) * dn;

    // Complete by Gram-Schmidt over E_1..E_{n+1} in index order.
    std::vector<Vec> basis{f.x0_, f.frame_[0]};
    for (int a = 0; a <= n && static_cast<int>(basis.size()) < n + 1; ++a) {
        Vec v = Vec::Unit(n + 1, a);
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) v -= v.dot(b) * b;
        if (v.norm() > 1e-8) {
            v.normalize();
            basis.push_back(v);
            f.frame_.push_back(v);
        }
    }

    const Vec& x0 = f.x0_;
    const Vec& e1 = f.frame_[0];
    f.c_ = Vec(n);
    f.L_ = Mat(n, n);
    for (int m = 0; m < n; ++m) {
        f.c_(m) = e1(n) * x0(m) - x0(n) * e1(m);
        for (int j = 0; j < n; ++j) f.L_(m, j) = e1(m) * x0(j) - x0(m) * e1(j);
    }
    f.t_max_ = compute_t_max(f, bounding_radius, center);
    return f;
}

RotationField make_field(const Vec& y0, const Vec& xi, const ConvexBody& body)
{
    if (y0.size() != body.dim()) throw ArgumentError("make_field: anchor dimension does not match the body");
    DefiningEval e = body.eval(y0);
    if (std::abs(e.h) > 1e-10) {
        std::ostringstream os;
        os << "make_field: anchor is off the boundary, |h(y0)| = " << std::abs(e.h);
        throw BoundaryMismatch(os.str(), std::abs(e.h));
    }
    double tang = std::abs(xi.dot(e.dh)) / e.dh.norm();
    double unit = std::abs(xi.norm() - 1.0);
    if (tang > 1e-10 || unit > 1e-10) {
        std::ostringstream os;
        os << "make_field: xi is not a unit tangent (normal component " << tang << ", norm defect " << unit << ")";
        throw BoundaryMismatch(os.str(), std::max(tang, unit));
    }
    return make_field_unchecked(y0, xi, body.bounding_radius(), body.interior_point());
}

Vec RotationField::eval(const Vec& y) const { return speed_ * (c_ + L_ * y + c_.dot(y) * y); }

Mat RotationField::jacobian(const Vec& y) const
{
    const int n = dim();
    return speed_ * (L_ + y * c_.transpose() + c_.dot(y) * Mat::Identity(n, n));
}

Mat RotationField::quadratic(int m) const
{
    const int n = dim();
    Mat Q = Mat::Zero(n, n);
    // (c.y) y_m = sum_{j,l} (delta_mj c_l + delta_ml c_j)/2 y_j y_l
    for (int l = 0; l < n; ++l) {
        Q(m, l) += 0.5 * speed_ * c_(l);
        Q(l, m) += 0.5 * speed_ * c_(l);
    }
    return Q;
}

Vec RotationField::components(const Vec& y) const
{
    const int n = dim();
    Vec x = unproject(y);
    Vec a(n + 1);
    a(0) = x.dot(x0_);
    for (int i = 0; i < n; ++i) a(i + 1) = x.dot(frame_[i]);
    return a;
}

Vec RotationField::flow(double t, const Vec& y) const
{
    if (std::abs(t) > t_max_ + 1e-12) {
        std::ostringstream os;
        os << "flow: |t| = " << std::abs(t) << " exceeds the validity interval " << t_max_;
        throw ArgumentError(os.str());
    }
    const int n = dim();
    Vec x = unproject(y);
    const Vec& e1 = frame_[0];
    double a0 = x.dot(x0_), a1 = x.dot(e1);
    double ang = speed_ * t, c = std::cos(ang), s = std::sin(ang);
    Vec r = x + (a0 * c - a1 * s - a0) * x0_ + (a0 * s + a1 * c - a1) * e1;
    if (r(n) < 1e-10) {
        std::ostringstream os;
        os << "flow: rotated point leaves the upper hemisphere (x_{n+1} = " << r(n) << ")";
        throw DomainError(os.str());
    }
    return -r.head(n) / r(n);
}

RotationField RotationField::zero() const
{
    RotationField z = *this;
    z.speed_ = 0.0;
    return z;
}

Vec flow(const RotationField& f, double t, const Vec& y) { return f.flow(t, y); }
Vec field_eval(const RotationField& f, const Vec& y) { return f.eval(y); }

AlongDerivatives derivative_along(const RotationField& f, const Jet2& jet)
{
    const Vec T = f.eval(jet.point);
    const Vec DTT = f.jacobian(jet.point) * T;  // D_T T
    AlongDerivatives a;
    a.Tu = T.dot(jet.gradient);
    a.D_TT_u = T.dot(jet.hessian * T);
    a.TTu = a.D_TT_u + DTT.dot(jet.gradient);
    return a;
}

namespace {

void check_flow_inside(const RotationField& f, const PolarGrid& grid, int node)
{
    if (grid.is_boundary(node)) throw DomainError("differentiated_equation_check: node is on the boundary");
    const Vec& y = grid.node(node);
    const double dt = grid.h();
    for (double t : {dt, -dt}) {
        Vec z = f.flow(t, y);
        if (!(grid.body().value(z) > 0.0)) {
            std::ostringstream os;
            os << "differentiated_equation_check: sigma_t leaves the domain at t = " << t;
            throw DomainError(os.str());
        }
    }
}

// v = u*/w* sampled at the nodes; q is scratch of grid size, zero on entry
// and on exit.
double defect_at(const RotationField& f, const PolarGrid& grid, const Vec& u_star, const Vec& v, Vec& q, int node,
                 int k, const PsiStar& ps)
{
    // q = w* T(u*/w*), differentiating the sampled u*/w* itself.
    const Vec& y = grid.node(node);
    const Stencil& st = grid.stencil(node);
    for (int i : st.idx) {
        const Vec& p = grid.node(i);
        q(i) = w_star(p) * f.eval(p).dot(grid.gradient(v, i));
    }

    Jet2 J;
    J.point = y;
    J.value = u_star(node);
    J.gradient = grid.gradient(u_star, node);
    J.hessian = grid.hessian(u_star, node);
    DualChartPack d = dual_chart_pack(J);
    OperatorValue F = eval_operator(d.dual_matrix, k, Mode::dual);
    Mat B = d.w_star * d.b_star;  // w* b*, applied once on each side below
    double lhs = (F.gradient.cwiseProduct(d.b_star * grid.hessian(q, node) * B)).sum();
    for (int i : st.idx) q(i) = 0.0;

    Vec T = f.eval(y);
    double Tpsi = T.dot(ps.d_y(y, J.value));
    double Tu = T.dot(J.gradient);
    return std::abs(lhs - Tpsi - ps.d_z(y, J.value) * Tu);
}

Vec chart_support(const PolarGrid& grid, const Vec& u_star)
{
    Vec v(grid.size());
    for (int i = 0; i < grid.size(); ++i) v(i) = u_star(i) / w_star(grid.node(i));
    return v;
}

}  // namespace

double differentiated_equation_check(const RotationField& f, const PolarGrid& grid, const Vec& u_star, int node,
                                     int k, const PsiSpec& psi)
{
    check_flow_inside(f, grid, node);
    Vec v = chart_support(grid, u_star);
    Vec q = Vec::Zero(grid.size());
    return defect_at(f, grid, u_star, v, q, node, k, psi_conversions(psi));
}

Vec differentiated_equation_defects(const RotationField& f, const PolarGrid& grid, const Vec& u_star, int k,
                                    const PsiSpec& psi)
{
    Vec v = chart_support(grid, u_star);
    Vec q = Vec::Zero(grid.size());
    PsiStar ps = psi_conversions(psi);
    Vec out = Vec::Constant(grid.size(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < grid.size(); ++i) {
        try {
            check_flow_inside(f, grid, i);
        } catch (const DomainError&) {
            continue;
        }
        out(i) = defect_at(f, grid, u_star, v, q, i, k, ps);
    }
    return out;
}

}  // namespace khess
