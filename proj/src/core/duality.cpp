#include "khess/duality.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <string>

#include "khess/error.hpp"
#include "khess/symfun.hpp"

namespace khess {

namespace {
std::atomic<bool> g_bstar_fault{false};
}

void set_bstar_fault(bool on) { g_bstar_fault = on; }
bool bstar_fault() { return g_bstar_fault; }

Vec project(const Vec& x)
{
    const int n = static_cast<int>(x.size()) - 1;
    if (n < 1) throw ArgumentError("project: need a point of R^{n+1}, n >= 1");
    if (!(x(n) > 0.0)) {
        std::ostringstream os;
        os << "project: x_{n+1} = " << x(n) << " is not on the open upper hemisphere";
        throw DomainError(os.str());
    }
    return -x.head(n) / x(n);
}

Vec unproject(const Vec& y)
{
    const int n = static_cast<int>(y.size());
    Vec x(n + 1);
    x.head(n) = -y;
    x(n) = 1.0;
    return x / std::sqrt(1.0 + y.squaredNorm());
}

Vec gauss_image(const Jet2& jet) { return jet.gradient; }

double w_star(const Vec& y) { return std::sqrt(1.0 + y.squaredNorm()); }

Mat b_star(const Vec& y)
{
    const int n = static_cast<int>(y.size());
    double s = bstar_fault() ? -1.0 : 1.0;
    return Mat::Identity(n, n) + s * y * y.transpose() / (1.0 + w_star(y));
}

DualChartPack dual_chart_pack(const Jet2& jet_star)
{
    const int n = static_cast<int>(jet_star.point.size());
    DualChartPack d;
    d.y = jet_star.point;
    d.w_star = w_star(d.y);
    d.b_star = b_star(d.y);
    d.g_y = Mat::Identity(n, n) + d.y * d.y.transpose();
    d.dual_matrix = symmetrize(d.w_star * d.b_star * jet_star.hessian * d.b_star);
    d.radii = jacobi_eigen(d.dual_matrix).values;
    return d;
}

double dual_residual(const Jet2& jet_star, int k, const PsiSpec& psi)
{
    DualChartPack d = dual_chart_pack(jet_star);
    OperatorValue F = eval_operator(d.dual_matrix, k, Mode::dual);
    return F.value - psi_conversions(psi).value(d.y, jet_star.value);
}

SupportData spherical_hessian(const Jet2& v_chart)
{
    const Vec& y = v_chart.point;
    const double w = w_star(y);
    const Mat B = w * b_star(y);
    SupportData s;
    s.v = v_chart.value / w;
    // d(V/w*) = DV/w* - V y / w*^3
    Vec df = v_chart.gradient / w - v_chart.value * y / (w * w * w);
    s.grad_v = B * df;
    s.lambda_matrix = symmetrize(w * b_star(y) * v_chart.hessian * b_star(y));
    return s;
}

Mat christoffel(const Vec& y, int k)
{
    const int n = static_cast<int>(y.size());
    const double w2 = 1.0 + y.squaredNorm();
    Mat G = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = -(y(i) * (k == j) + y(j) * (k == i)) / w2;
    return G;
}

double PsiStar::tilde(const Vec& x, double v) const { return 1.0 / psi.evaluate(v, x); }

double PsiStar::value(const Vec& y, double z) const
{
    const double w = w_star(y);
    return 1.0 / psi.evaluate(z / w, unproject(y));
}

double PsiStar::d_z(const Vec& y, double z) const
{
    const double w = w_star(y);
    const Vec p = unproject(y);
    const double v = psi.evaluate(z / w, p);
    return -psi.d_z(z / w, p) / (w * v * v);
}

Vec PsiStar::d_y(const Vec& y, double z) const
{
    const int n = static_cast<int>(y.size());
    const double w = w_star(y), w3 = w * w * w;
    const Vec p = unproject(y);
    const double Z = z / w;
    const double v = psi.evaluate(Z, p);
    const double pz = psi.d_z(Z, p);
    const Vec pp = psi.d_p(Z, p);
    Vec g(n);
    for (int i = 0; i < n; ++i) {
        double dZ = -z * y(i) / w3;
        double dpsi = pz * dZ - pp(i) / w - pp(n) * y(i) / w3;
        for (int m = 0; m < n; ++m) dpsi += pp(m) * y(m) * y(i) / w3;
        g(i) = -dpsi / (v * v);
    }
    return g;
}

PsiStar psi_conversions(const PsiSpec& psi)
{
    if (!psi.evaluate) throw ArgumentError("psi_conversions: psi has no evaluator");
    return PsiStar{psi};
}

// Sampled functions

SampledFunction::SampledFunction(const PolarGrid& grid, Vec values) : grid_(grid), u_(std::move(values))
{
    if (u_.size() != grid.size()) throw ArgumentError("SampledFunction: value count does not match the grid");
    grad_.resize(grid.size());
    hess_.resize(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        grad_[i] = grid.gradient(u_, i);
        hess_[i] = grid.hessian(u_, i);
    }
}

bool SampledFunction::evaluate(const Vec& p, double& value, Vec& gradient, Mat& hessian) const
{
    double xi, th;
    const double dxi = grid_.xi(2) - grid_.xi(1);
    if (!grid_.invert(p, xi, th, 1.0 + dxi)) return false;
    InterpWeights iw = grid_.locate(xi, th);
    value = 0.0;
    gradient = Vec::Zero(2);
    hessian = Mat::Zero(2, 2);
    for (int k = 0; k < 4; ++k) {
        const int i = iw.idx[k];
        const double w = iw.w[k];
        value += w * u_(i);
        gradient += w * grad_[i];
        hessian += w * hess_[i];
    }
    return true;
}

int SampledFunction::nearest_by_gradient(const Vec& y) const
{
    int best = 0;
    double bd = 1e300;
    for (int i = 0; i < grid_.size(); ++i) {
        double d = (grad_[i] - y).squaredNorm();
        if (d < bd) { bd = d; best = i; }
    }
    return best;
}

namespace {

// Derivative of the interpolated gradient field by central differences. It is
// exact inside a cell, where the interpolated nodal Hessians are only a first
// order guess; with those alone Newton creeps across cell edges.
bool field_jacobian(const SampledFunction& f, const Vec& x, Mat& J)
{
    const double d = 1e-7 * f.grid().h();
    J.resize(2, 2);
    for (int c = 0; c < 2; ++c) {
        Vec e = Vec::Unit(2, c) * d;
        double u;
        Vec gp, gm;
        Mat H;
        if (!f.evaluate(x + e, u, gp, H) || !f.evaluate(x - e, u, gm, H)) return false;
        J.col(c) = (gp - gm) / (2 * d);
    }
    return std::abs(J.determinant()) > 0.0;
}

// Damped Newton on the interpolated gradient map from seed x. Returns the
// iteration count, or -1 when the target is not reached.
int invert_gradient(const SampledFunction& f, const Vec& y, Vec& x, double& u, std::string& why)
{
    const double tol = 1e-12 * (1.0 + y.norm());
    const int max_it = 100;
    Vec g;
    Mat H;
    if (!f.evaluate(x, u, g, H)) {
        why = "seed left the domain";
        return -1;
    }
    double r = (g - y).norm();
    int it = 0;
    while (r > tol) {
        if (++it > max_it) {
            why = "gradient inversion stalled";
            return -1;
        }
        SymEig e = jacobi_eigen(H);
        if (!(e.values(0) > 0.0)) {
            why = "interpolated Hessian is not positive definite";
            return -1;
        }
        std::vector<Vec> steps;
        Mat J;
        if (field_jacobian(f, x, J)) steps.push_back(-J.partialPivLu().solve(g - y));
        steps.push_back(-e.vectors * (e.values.cwiseInverse().asDiagonal() * (e.vectors.transpose() * (g - y))));
        bool accepted = false;
        for (const Vec& step : steps) {
            double lam = 1.0;
            for (int ls = 0; ls < 40 && !accepted; ++ls, lam *= 0.5) {
                Vec xn = x + lam * step;
                double un;
                Vec gn;
                Mat Hn;
                if (!f.evaluate(xn, un, gn, Hn)) continue;
                double rn = (gn - y).norm();
                if (rn < r) {
                    x = xn; u = un; g = gn; H = Hn; r = rn;
                    accepted = true;
                }
            }
            if (accepted) break;
        }
        if (!accepted) {
            if (r <= 1e3 * tol) break;  // interpolant kink at round-off scale
            std::ostringstream os;
            os << "target outside the gradient image (residual " << r << ")";
            why = os.str();
            return -1;
        }
    }
    return it;
}

}  // namespace

LegendreResult legendre(const SampledFunction& f, const std::vector<Vec>& targets)
{
    LegendreResult out;
    out.values.resize(targets.size());
    out.points.resize(targets.size());
    Vec prev;
    for (size_t t = 0; t < targets.size(); ++t) {
        const Vec& y = targets[t];
        double u = 0.0;
        std::string why;
        Vec x;
        int it = -1;
        // Consecutive targets are usually neighbours; reuse the last solution
        // as seed and fall back to the nearest sample in gradient.
        if (prev.size()) {
            x = prev;
            it = invert_gradient(f, y, x, u, why);
        }
        if (it < 0) {
            x = f.grid().node(f.nearest_by_gradient(y));
            it = invert_gradient(f, y, x, u, why);
        }
        if (it < 0) throw OutOfImage("legendre: " + why, y);
        out.max_iterations = std::max(out.max_iterations, it);
        out.points[t] = x;
        out.values[t] = x.dot(y) - u;
        prev = x;
    }
    return out;
}

NodalLegendre legendre_nodal(const SampledFunction& f)
{
    const PolarGrid& g = f.grid();
    Vec us(g.size());
    for (int i = 0; i < g.size(); ++i) us(i) = g.node(i).dot(f.nodal_gradients()[i]) - f.values()(i);
    return {g.pushed(f.nodal_gradients()), us};
}

}  // namespace khess
