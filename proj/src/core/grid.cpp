#include "khess/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "khess/error.hpp"

namespace khess {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Monomials x^a y^b with a + b <= degree, graded order.
std::vector<std::pair<int, int>> monomials(int degree)
{
    std::vector<std::pair<int, int>> m;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a) m.push_back({a, d - a});
    return m;
}

double ipow(double x, int p)
{
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

}  // namespace

PolarGrid::PolarGrid(const ConvexBody& body, int n_r, int n_theta)
    : body_(body.clone()), n_r_(n_r), n_theta_(n_theta)
{
    if (body.dim() != 2) throw CapabilityError("polar grid: planar bodies only");
    if (n_r < 8 || n_theta < 16 || n_theta % 2 != 0) {
        std::ostringstream os;
        os << "polar grid: need n_r >= 8 and even n_theta >= 16, got " << n_r << "x" << n_theta;
        throw ConfigError(os.str());
    }
    dxi_ = 1.0 / (n_r - 0.5);
    dtheta_ = kTwoPi / n_theta;
    build_nodes();
    build_stencils();
    build_quadrature();
}

PolarGrid::PolarGrid(const PolarGrid& o)
    : body_(o.body_->clone()), n_r_(o.n_r_), n_theta_(o.n_theta_), dxi_(o.dxi_), dtheta_(o.dtheta_),
      alpha_(o.alpha_), nodes_(o.nodes_), stencils_(o.stencils_), quad_(o.quad_), rho_e_(o.rho_e_),
      rho_o_(o.rho_o_), rho_bar_(o.rho_bar_), h_(o.h_), stencil_defect_(o.stencil_defect_), pushed_(o.pushed_)
{
}

PolarGrid PolarGrid::pushed(std::vector<Vec> nodes) const
{
    if (static_cast<int>(nodes.size()) != size()) throw ArgumentError("pushed grid: node count mismatch");
    PolarGrid g(*this);
    g.nodes_ = std::move(nodes);
    g.pushed_ = true;
    g.stencil_defect_ = 0.0;
    g.h_ = 0.0;
    for (int i = 1; i <= n_r_; ++i)
        for (int j = 0; j < n_theta_; ++j) {
            const Vec& p = g.nodes_[index(i, j)];
            g.h_ = std::max(g.h_, (p - g.nodes_[index(i, j + 1)]).norm());
            if (i < n_r_) g.h_ = std::max(g.h_, (p - g.nodes_[index(i + 1, j)]).norm());
        }
    g.build_stencils();
    return g;
}

int PolarGrid::index(int ring, int ray) const
{
    int r = ((ray % n_theta_) + n_theta_) % n_theta_;
    return (ring - 1) * n_theta_ + r;
}

double PolarGrid::theta(int ray) const { return ray * dtheta_; }

double PolarGrid::S(double xi) const { return std::sin(alpha_ * xi) / std::sin(alpha_); }
double PolarGrid::dS(double xi) const { return alpha_ * std::cos(alpha_ * xi) / std::sin(alpha_); }

void PolarGrid::rho_parts(double theta, double& re, double& ro) const
{
    double a = body_->radial(theta).r;
    double b = body_->radial(theta + std::numbers::pi).r;
    re = 0.5 * (a + b);
    ro = 0.5 * (a - b);
}

double PolarGrid::radius(double s, double re, double ro) const
{
    return s * (rho_bar_ + s * s * (re - rho_bar_) + s * ro);
}

double PolarGrid::radius_ds(double s, double re, double ro) const
{
    return rho_bar_ + 3.0 * s * s * (re - rho_bar_) + 2.0 * s * ro;
}

Vec PolarGrid::map(double xi, double theta) const
{
    if (pushed_) throw CapabilityError("pushed grid has no coordinate map");
    double re, ro;
    rho_parts(theta, re, ro);
    Vec e(2);
    e << std::cos(theta), std::sin(theta);
    return body_->interior_point() + radius(S(xi), re, ro) * e;
}

bool PolarGrid::invert(const Vec& y, double& xi, double& theta, double xi_max) const
{
    if (pushed_) throw CapabilityError("pushed grid has no coordinate map");
    Vec d = y - body_->interior_point();
    double r = d.norm();
    theta = std::atan2(d(1), d(0));
    if (theta < 0) theta += kTwoPi;
    if (r == 0.0) {
        xi = 0.0;
        return true;
    }
    double re, ro;
    rho_parts(theta, re, ro);
    // radius(s) is increasing on [0, s_hi]; safeguarded Newton.
    const double s_hi = 1.0 / std::sin(alpha_);
    if (radius(s_hi, re, ro) < r) return false;
    double lo = 0.0, hi = s_hi, s = std::min(r / (re + ro), s_hi);
    for (int it = 0; it < 100; ++it) {
        double f = radius(s, re, ro) - r;
        if (f > 0) hi = s; else lo = s;
        double df = radius_ds(s, re, ro);
        double sn = s - f / df;
        if (!(sn > lo && sn < hi) || !(df > 0)) sn = 0.5 * (lo + hi);
        if (std::abs(sn - s) <= 1e-16 * (1.0 + s)) {
            s = sn;
            break;
        }
        s = sn;
    }
    double arg = s * std::sin(alpha_);
    if (arg >= 1.0) return false;
    xi = std::asin(arg) / alpha_;
    return xi <= xi_max;
}

InterpWeights PolarGrid::locate(double xi, double theta) const
{
    if (pushed_) throw CapabilityError("pushed grid has no coordinate map");
    InterpWeights out;
    double s = xi / dxi_ + 0.5;  // ring coordinate: ring i at s = i
    int i0 = static_cast<int>(std::floor(s));
    if (i0 >= n_r_) i0 = n_r_ - 1;
    double fr = s - i0;
    double t = theta / dtheta_;
    int j0 = static_cast<int>(std::floor(t));
    double ft = t - j0;

    auto node_at = [&](int ring, int ray) {
        if (ring <= 0) return index(1 - ring, ray + n_theta_ / 2);
        return index(ring, ray);
    };
    out.idx = {node_at(i0, j0), node_at(i0, j0 + 1), node_at(i0 + 1, j0), node_at(i0 + 1, j0 + 1)};
    out.w = {(1 - fr) * (1 - ft), (1 - fr) * ft, fr * (1 - ft), fr * ft};
    return out;
}

void PolarGrid::build_nodes()
{
    const Vec& c = body_->interior_point();
    rho_e_.resize(n_theta_);
    rho_o_.resize(n_theta_);
    std::vector<double> rho(n_theta_);
    for (int j = 0; j < n_theta_; ++j) rho[j] = body_->radial(theta(j)).r;
    for (int j = 0; j < n_theta_; ++j) {
        double b = rho[(j + n_theta_ / 2) % n_theta_];
        rho_e_[j] = 0.5 * (rho[j] + b);
        rho_o_[j] = 0.5 * (rho[j] - b);
        if (!(rho[j] > 0.0)) {
            std::ostringstream os;
            os << "polar grid: body is not star-shaped about its interior point at theta=" << theta(j);
            throw DomainError(os.str());
        }
    }
    rho_bar_ = *std::min_element(rho_e_.begin(), rho_e_.end());
    for (int j = 0; j < n_theta_; ++j)
        for (int q = 0; q <= 20; ++q)
            if (!(radius_ds(0.05 * q, rho_e_[j], rho_o_[j]) > 0.0)) {
                std::ostringstream os;
                os << "polar grid: body is not star-shaped enough about its interior point at theta=" << theta(j);
                throw DomainError(os.str());
            }
    nodes_.resize(size());
    for (int i = 1; i <= n_r_; ++i)
        for (int j = 0; j < n_theta_; ++j) {
            Vec e(2);
            e << std::cos(theta(j)), std::sin(theta(j));
            double s = S(xi(i));
            double r = (i == n_r_) ? rho[j] : radius(s, rho_e_[j], rho_o_[j]);
            nodes_[index(i, j)] = c + r * e;
        }

    h_ = 0.0;
    for (int i = 1; i <= n_r_; ++i)
        for (int j = 0; j < n_theta_; ++j) {
            const Vec& p = nodes_[index(i, j)];
            h_ = std::max(h_, (p - nodes_[index(i, j + 1)]).norm());
            if (i < n_r_) h_ = std::max(h_, (p - nodes_[index(i + 1, j)]).norm());
        }
}

// Five rings by five rays, fitted to cubics, with the ring window shifted
// inward at the boundary. Fewer rings or rays fail as the grid refines: nodes
// on three nearly parallel arcs (or three lines through the centre) almost
// annihilate a cubic, and the weights then grow like 1/h.
std::vector<int> PolarGrid::neighbors(int ring, int ray) const
{
    std::vector<int> out;
    int lo = std::min(ring - 2, n_r_ - 4);
    for (int r = lo; r <= lo + 4; ++r)
        for (int dj = -2; dj <= 2; ++dj)
            out.push_back(r >= 1 ? index(r, ray + dj) : index(1 - r, ray + dj + n_theta_ / 2));
    return out;
}

// Ring-alternating pattern over the block of neighbors(ring, ray). A
// cubic-exact block of five rings barely sees it, and the Newton Jacobian
// then carries near-null radial odd-even modes. The pattern is pinned to the
// response of the compact three-point difference, -4 g g^T, where g is the
// gradient of the ring index estimated from neighbouring nodes. The same
// treatment in the ray direction costs weights of order 1/(r dtheta)^2 on
// the inner rings and lifts the round-off floor above the Newton tolerance.
std::vector<PolarGrid::Mode> PolarGrid::checkerboards(int ring, int ray) const
{
    auto node = [&](int r, int j) -> const Vec& {
        return r >= 1 ? nodes_[index(r, j)] : nodes_[index(1 - r, j + n_theta_ / 2)];
    };
    Mat D(2, 2);
    D.col(0) = 0.5 * (node(ring + 1, ray) - node(ring - 1, ray));
    D.col(1) = 0.5 * (node(ring, ray + 1) - node(ring, ray - 1));
    Vec g = D.inverse().row(0).transpose();

    const int lo = std::min(ring - 2, n_r_ - 4);
    Mode m{Vec(25), -4.0 * g * g.transpose()};
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) m.pattern(5 * a + b) = ((lo + a - ring) % 2 == 0) ? 1.0 : -1.0;
    return {m};
}

// Weighted minimum-norm weights exact on all monomials up to `degree`,
// solved in coordinates scaled by the stencil radius. Hessian weights also
// reproduce the given modes; gradient weights do not see them.
Stencil PolarGrid::make_stencil(int center, const std::vector<int>& nbrs, int degree, const std::vector<Mode>& modes)
{
    const Vec& y0 = nodes_[center];
    const int K = static_cast<int>(nbrs.size());
    double scale = 0.0;
    for (int k : nbrs) scale = std::max(scale, (nodes_[k] - y0).norm());

    std::vector<Vec> d(K);
    for (int k = 0; k < K; ++k) d[k] = (nodes_[nbrs[k]] - y0) / scale;

    auto mons = monomials(degree);
    const int M = static_cast<int>(mons.size());
    const int P = static_cast<int>(modes.size());
    Mat V(M + P, K);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) V(m, k) = ipow(d[k](0), mons[m].first) * ipow(d[k](1), mons[m].second);
    for (int p = 0; p < P; ++p) V.row(M + p) = modes[p].pattern.transpose();

    // min sum w_k^2 / omega_k subject to V w = L, via w = Omega^{1/2} pinv(V Omega^{1/2}) L
    // with one step of iterative refinement.
    Vec sq(K);
    for (int k = 0; k < K; ++k) sq(k) = 1.0 / std::sqrt(d[k].squaredNorm() + 0.1);
    Mat VS = V * sq.asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Mat> cod_first(VS.topRows(M));
    Eigen::CompleteOrthogonalDecomposition<Mat> cod_second(VS);

    auto solve_for = [&](int a, int b) {
        const bool second = a + b == 2;
        const int rows = second ? M + P : M;
        const auto& cod = second ? cod_second : cod_first;
        Vec L = Vec::Zero(rows);
        for (int m = 0; m < M; ++m)
            if (mons[m].first == a && mons[m].second == b) L(m) = (a == 2 || b == 2) ? 2.0 : 1.0;
        if (second) {
            const int r = a == 2 ? 0 : (b == 2 ? 1 : 0), c = a == 2 ? 0 : 1;
            for (int p = 0; p < P; ++p) L(M + p) = modes[p].hessian(r, c) * scale * scale;
        }
        Vec z = cod.solve(L);
        z += cod.solve(L - VS.topRows(rows) * z);
        Vec w = sq.asDiagonal() * z;
        stencil_defect_ = std::max(stencil_defect_, (V.topRows(M) * w - L.head(M)).cwiseAbs().maxCoeff());
        return w;
    };
    Vec w1 = solve_for(1, 0), w2 = solve_for(0, 1), w11 = solve_for(2, 0), w12 = solve_for(1, 1),
        w22 = solve_for(0, 2);

    Stencil s;
    s.idx = nbrs;
    s.center = static_cast<int>(std::find(nbrs.begin(), nbrs.end(), center) - nbrs.begin());
    if (s.center == K) throw InvariantViolation("polar grid: stencil block misses its own node");
    for (int k = 0; k < K; ++k) {
        s.d1.push_back(w1(k) / scale);
        s.d2.push_back(w2(k) / scale);
        s.d11.push_back(w11(k) / (scale * scale));
        s.d12.push_back(w12(k) / (scale * scale));
        s.d22.push_back(w22(k) / (scale * scale));
    }
    for (auto* d : {&s.d1, &s.d2, &s.d11, &s.d12, &s.d22}) {
        double sum = 0.0;
        for (int k = 0; k < K; ++k)
            if (k != s.center) sum += (*d)[k];
        (*d)[s.center] = -sum;
    }
    return s;
}

void PolarGrid::build_stencils()
{
    stencils_.resize(size());
    for (int i = 1; i <= n_r_; ++i)
        for (int j = 0; j < n_theta_; ++j) {
            int c = index(i, j);
            std::vector<Mode> modes;
            if (i < n_r_) modes = checkerboards(i, j);
            stencils_[c] = make_stencil(c, neighbors(i, j), 3, modes);
        }
    if (stencil_defect_ > 1e-11) {
        std::ostringstream os;
        os << "polar grid: stencil exactness defect " << stencil_defect_;
        throw InvariantViolation(os.str());
    }
}

void PolarGrid::build_quadrature()
{
    quad_.resize(size());
    for (int i = 1; i <= n_r_; ++i)
        for (int j = 0; j < n_theta_; ++j) {
            double x = xi(i), s = S(x);
            double re = rho_e_[j], ro = rho_o_[j];
            double jac = dS(x) * radius_ds(s, re, ro) * radius(s, re, ro);
            quad_[index(i, j)] = std::abs(jac) * dxi_ * dtheta_ * (i == n_r_ ? 0.5 : 1.0);
        }
}

Vec PolarGrid::gradient(const Vec& u, int i) const
{
    const Stencil& s = stencils_[i];
    const double uc = u(i);
    Vec g = Vec::Zero(2);
    for (size_t k = 0; k < s.idx.size(); ++k) {
        double v = u(s.idx[k]) - uc;
        g(0) += s.d1[k] * v;
        g(1) += s.d2[k] * v;
    }
    return g;
}

Mat PolarGrid::hessian(const Vec& u, int i) const
{
    const Stencil& s = stencils_[i];
    const double uc = u(i);
    double a = 0, b = 0, c = 0;
    for (size_t k = 0; k < s.idx.size(); ++k) {
        double v = u(s.idx[k]) - uc;
        a += s.d11[k] * v;
        b += s.d12[k] * v;
        c += s.d22[k] * v;
    }
    Mat H(2, 2);
    H << a, b, b, c;
    return H;
}

}  // namespace khess
