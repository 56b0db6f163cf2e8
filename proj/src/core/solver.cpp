#include "khess/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>

#include "khess/duality.hpp"
#include "khess/geometry.hpp"
#include "khess/symfun.hpp"

namespace khess {

namespace {

double lambda_min2(const Mat& H)
{
    double m = 0.5 * (H(0, 0) + H(1, 1));
    double d = 0.5 * (H(0, 0) - H(1, 1));
    return m - std::sqrt(d * d + H(0, 1) * H(0, 1));
}

// Solves log psi*(y, z0 + g) = target for g by Newton; psi* is increasing in z.
double solve_shift(const PsiStar& ps, const Vec& y, double z0, double target)
{
    double g = 0.0;
    for (int it = 0; it < 60; ++it) {
        double v = ps.value(y, z0 + g);
        double dz = ps.d_z(y, z0 + g);
        if (!(dz > 0.0) || !(v > 0.0)) return g;
        double f = std::log(v) - target;
        if (std::abs(f) < 1e-14) break;
        g -= f / (dz / v);
    }
    return g;
}

double point_segment(const Vec& p, const Vec& a, const Vec& b)
{
    Vec ab = b - a;
    double l2 = ab.squaredNorm();
    double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    return (p - a - t * ab).norm();
}

double one_sided(const std::vector<Vec>& a, const std::vector<Vec>& b)
{
    double worst = 0.0;
    for (const Vec& p : a) {
        double best = 1e300;
        for (size_t j = 0; j < b.size(); ++j) best = std::min(best, point_segment(p, b[j], b[(j + 1) % b.size()]));
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

double polyline_hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b)
{
    if (a.empty() || b.empty()) throw ArgumentError("polyline_hausdorff: empty polyline");
    return std::max(one_sided(a, b), one_sided(b, a));
}

double extrapolate_c(const std::vector<double>& eps, const std::vector<double>& mean_u, int k)
{
    const size_t m = eps.size();
    if (m < 2 || mean_u.size() != m) return std::numeric_limits<double>::quiet_NaN();
    double ea = eps[m - 2], eb = eps[m - 1];
    double La = ea * mean_u[m - 2], Lb = eb * mean_u[m - 1];
    double L0 = (ea * Lb - eb * La) / (ea - eb);
    return std::exp(k * L0);
}

double jacobian_fd_error(const DualSolver& s, const Vec& u, double eps, double level, double step)
{
    Mat J = Mat(s.jacobian(u, eps, level));
    Mat F(J.rows(), J.cols());
    Vec v = u;
    for (int c = 0; c < u.size(); ++c) {
        v(c) = u(c) + step;
        Vec rp = s.residual(v, eps, level);
        v(c) = u(c) - step;
        Vec rm = s.residual(v, eps, level);
        v(c) = u(c);
        F.col(c) = (rp - rm) / (2.0 * step);
    }
    return (J - F).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff();
}

DualSolver::DualSolver(Problem p) : p_(std::move(p))
{
    if (!p_.omega || !p_.omega_star) throw ConfigError("solver: both bodies are required");
    if (p_.omega->dim() != 2 || p_.omega_star->dim() != 2) throw CapabilityError("solver: planar problems only");
    if (p_.k < 1 || p_.k > 2) {
        std::ostringstream os;
        os << "solver: k = " << p_.k << " is outside 1..2";
        throw ConfigError(os.str());
    }
    if (!p_.psi.evaluate) throw ConfigError("solver: psi has no evaluator");
    if (p_.continuation) {
        if (p_.schedule.empty()) throw ConfigError("solver: empty continuation schedule");
        for (size_t i = 0; i < p_.schedule.size(); ++i) {
            if (!(p_.schedule[i] > 0.0)) throw ConfigError("solver: continuation levels must be positive");
            if (i && !(p_.schedule[i] < p_.schedule[i - 1]))
                throw ConfigError("solver: continuation schedule must be strictly decreasing");
        }
    }
    grid_ = std::make_shared<const PolarGrid>(*p_.omega_star, p_.n_r, p_.n_theta);
}

PsiSpec DualSolver::psi_at(double eps) const
{
    return p_.continuation ? psi::exponential(eps, p_.psi) : p_.psi;
}

ResidualEval DualSolver::evaluate(const Vec& u, double eps, double level) const
{
    const PolarGrid& g = *grid_;
    if (u.size() != g.size()) throw ArgumentError("solver: state size does not match the grid");
    PsiStar ps = psi_conversions(psi_at(eps));
    ResidualEval out;
    out.r.resize(g.size());
    out.lambda_min = 1e300;
    for (int i = 0; i < g.size(); ++i) {
        Mat H = g.hessian(u, i);
        double lm = lambda_min2(H);
        out.lambda_min = std::min(out.lambda_min, lm);
        bool bad = !(lm >= p_.options.spd_floor);
        if (bad) out.violations.push_back(i);
        if (g.is_boundary(i)) {
            out.r(i) = p_.omega->value(g.gradient(u, i));
            continue;
        }
        if (!(lm > 0.0)) {
            out.r(i) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        Jet2 J;
        J.point = g.node(i);
        J.value = u(i);
        J.hessian = H;
        DualChartPack d = dual_chart_pack(J);
        out.r(i) = eval_operator(d.dual_matrix, p_.k, Mode::dual).value - ps.value(J.point, u(i) + level);
    }
    return out;
}

Vec DualSolver::residual(const Vec& u, double eps, double level) const
{
    ResidualEval e = evaluate(u, eps, level);
    if (!e.violations.empty()) {
        int i = e.violations.front();
        std::ostringstream os;
        os << "solver: node Hessian below the SPD floor at " << e.violations.size() << " node(s), first " << i;
        Mat H = grid_->hessian(u, i);
        throw ConeViolation(os.str(), jacobi_eigen(H).values);
    }
    return e.r;
}

SparseMat DualSolver::jacobian(const Vec& u, double eps, double level) const
{
    const PolarGrid& g = *grid_;
    PsiStar ps = psi_conversions(psi_at(eps));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(g.size()) * 26);
    for (int i = 0; i < g.size(); ++i) {
        const Stencil& st = g.stencil(i);
        if (g.is_boundary(i)) {
            Vec dh = p_.omega->eval(g.gradient(u, i)).dh;
            for (size_t m = 0; m < st.idx.size(); ++m) trip.emplace_back(i, st.idx[m], dh(0) * st.d1[m] + dh(1) * st.d2[m]);
            continue;
        }
        Jet2 J;
        J.point = g.node(i);
        J.value = u(i);
        J.hessian = g.hessian(u, i);
        DualChartPack d = dual_chart_pack(J);
        OperatorValue F = eval_operator(d.dual_matrix, p_.k, Mode::dual);
        Mat M = d.w_star * d.b_star * F.gradient * d.b_star;
        for (size_t m = 0; m < st.idx.size(); ++m)
            trip.emplace_back(i, st.idx[m], M(0, 0) * st.d11[m] + 2.0 * M(0, 1) * st.d12[m] + M(1, 1) * st.d22[m]);
        trip.emplace_back(i, i, -ps.d_z(J.point, u(i) + level));
    }
    SparseMat A(g.size(), g.size());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

Vec DualSolver::initial_guess(double eps) const
{
    const ConvexBody& os = *p_.omega_star;
    const int ns = 16;
    Mat A = Mat::Zero(2 * ns, 3);
    Vec b(2 * ns);
    for (int j = 0; j < ns; ++j) {
        Vec ang(1);
        ang << 2.0 * std::numbers::pi * j / ns;
        Vec y = os.boundary_point(ang);
        Vec n = -os.gradient(y).normalized();
        Vec x = p_.omega->support_point(n);
        Vec q = y / w_star(y);
        for (int c = 0; c < 2; ++c) {
            A(2 * j + c, 0) = q(c);
            A(2 * j + c, 1 + c) = 1.0;
            b(2 * j + c) = x(c);
        }
    }
    Vec sol = A.colPivHouseholderQr().solve(b);
    double alpha = std::max(sol(0), 0.1);
    Vec beta = sol.tail(2);

    const Vec& c = os.interior_point();
    const double wc = w_star(c);
    Jet2 J;
    J.point = c;
    J.hessian = alpha * (Mat::Identity(2, 2) / wc - c * c.transpose() / (wc * wc * wc));
    double F = eval_operator(dual_chart_pack(J).dual_matrix, p_.k, Mode::dual).value;
    PsiStar ps = psi_conversions(psi_at(eps));
    double gamma = solve_shift(ps, c, alpha * wc + beta.dot(c), std::log(F));

    const PolarGrid& g = *grid_;
    Vec u(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const Vec& y = g.node(i);
        u(i) = alpha * w_star(y) + beta.dot(y) + gamma;
    }
    return u;
}

Vec DualSolver::repair(const Vec& u) const
{
    const PolarGrid& g = *grid_;
    auto lowest = [&](const Vec& v) {
        double lm = 1e300;
        for (int i = 0; i < g.size(); ++i) lm = std::min(lm, lambda_min2(g.hessian(v, i)));
        return lm;
    };
    double lm = lowest(u);
    if (lm >= p_.options.spd_floor) return u;
    const Vec& c = p_.omega_star->interior_point();
    Vec bump(g.size());
    for (int i = 0; i < g.size(); ++i) bump(i) = 0.5 * (g.node(i) - c).squaredNorm();
    double beta = 2.0 * (p_.options.spd_floor - lm) + 1e-3;
    for (int t = 0; t < 60; ++t, beta *= 2.0) {
        Vec v = u + beta * bump;
        if (lowest(v) >= p_.options.spd_floor) return v;
    }
    throw ConeViolation("solver: SPD repair failed", Vec::Constant(1, lm));
}

NewtonReport DualSolver::newton(const Vec& u0, double eps, double level) const
{
    const SolverOptions& o = p_.options;
    NewtonReport rep;
    rep.u = u0;
    ResidualEval ev = evaluate(rep.u, eps, level);
    if (!ev.violations.empty()) {
        rep.u = repair(rep.u);
        rep.repaired = true;
        ev = evaluate(rep.u, eps, level);
    }
    double r = ev.norm();
    auto history = [&]() { return std::vector<LevelRecord>{{eps, rep.iterations, r}}; };

    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    rep.residuals.push_back(r);
    while (!(r <= o.newton_tol)) {
        if (rep.iterations >= o.max_iterations) {
            std::ostringstream os;
            os << "solver: no convergence in " << o.max_iterations << " Newton iterations at eps = " << eps
               << " (residual " << r << ")";
            throw NonConvergence(os.str(), history());
        }
        SparseMat J = jacobian(rep.u, eps, level);
        if (!analyzed) {
            lu.analyzePattern(J);
            analyzed = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) {
            Eigen::SparseQR<SparseMat, Eigen::COLAMDOrdering<int>> qr(J);
            double smin = qr.matrixR().diagonal().cwiseAbs().minCoeff();
            std::ostringstream os;
            os << "solver: singular Jacobian at eps = " << eps << " (smallest singular value estimate " << smin << ")";
            throw NonConvergence(os.str(), history());
        }
        Vec step = lu.solve(-ev.r);

        double lam = 1.0;
        bool accepted = false;
        for (int t = 0; t <= o.max_halvings; ++t, lam *= 0.5) {
            Vec trial = rep.u + lam * step;
            ResidualEval et = evaluate(trial, eps, level);
            double rt = et.norm();
            if (et.violations.empty() && rt <= (1.0 - o.armijo * lam) * r) {
                rep.u = std::move(trial);
                ev = std::move(et);
                r = rt;
                accepted = true;
                break;
            }
            ++rep.rejected_steps;
        }
        ++rep.iterations;
        rep.residuals.push_back(r);
        if (!accepted) {
            std::ostringstream os;
            os << "solver: line search stalled at eps = " << eps << " after " << rep.iterations
               << " iterations (residual " << r << ")";
            throw StallError(os.str(), history());
        }
    }
    rep.residual = r;
    return rep;
}

double DualSolver::shift_for(const Vec& u, double level, double eps_from, double eps_to) const
{
    const Vec& y = grid_->node(0);
    PsiStar from = psi_conversions(psi_at(eps_from));
    PsiStar to = psi_conversions(psi_at(eps_to));
    const double z = u(0) + level;
    return solve_shift(to, y, z, std::log(from.value(y, z)));
}

SolverState DualSolver::solve() const
{
    SolverState st;
    st.grid = grid_;
    std::vector<double> levels = p_.continuation ? p_.schedule : std::vector<double>{p_.psi.eps};
    std::vector<double> done;
    Vec u;
    double level = 0.0;
    for (size_t j = 0; j < levels.size(); ++j) {
        double eps = levels[j];
        if (j == 0) {
            u = initial_guess(eps);
            level = u(0);
            u.array() -= level;
        } else {
            level += shift_for(u, level, levels[j - 1], eps);
            st.warm_residual.push_back(evaluate(u, eps, level).norm());
            st.cold_residual.push_back(evaluate(initial_guess(eps), eps).norm());
        }
        NewtonReport rep;
        try {
            rep = newton(u, eps, level);
        } catch (const NonConvergence& e) {
            std::vector<LevelRecord> h = st.history;
            h.insert(h.end(), e.history.begin(), e.history.end());
            throw PartialSolve(e.what(), std::move(h), e.status());
        } catch (const Error& e) {
            std::vector<LevelRecord> h = st.history;
            h.push_back({eps, 0, std::numeric_limits<double>::quiet_NaN()});
            throw PartialSolve(e.what(), std::move(h), e.status());
        }
        u = rep.u;
        st.history.push_back({eps, rep.iterations, rep.residual});
        st.level_mean_u.push_back(primal_mean(u, level));
        done.push_back(eps);
    }
    st.u_shape = u;
    st.level = level;
    st.u_star = u.array() + level;
    st.eps = levels.back();
    st.residual_norm = st.history.back().residual;
    st.converged = st.residual_norm <= p_.options.newton_tol;
    st.mean_u = st.level_mean_u.back();
    if (p_.continuation) st.c_estimate = extrapolate_c(done, st.level_mean_u, p_.k);
    st.diagnostics = diagnostics(u, level);
    return st;
}

double DualSolver::primal_mean(const Vec& u, double level) const
{
    const PolarGrid& g = *grid_;
    const auto& q = g.quadrature();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < g.size(); ++i) {
        const Vec& y = g.node(i);
        double det = g.hessian(u, i).determinant();
        num += q[i] * (y.dot(g.gradient(u, i)) - u(i)) * det;
        den += q[i] * det;
    }
    return num / den - level;
}

PrimalRecovery DualSolver::recover_primal(const Vec& u, double level) const
{
    PolarGrid src(*p_.omega, p_.n_r, p_.n_theta);
    SampledFunction f(*grid_, u);
    LegendreResult lr = legendre(f, src.nodes());

    PrimalRecovery out;
    out.points = src.nodes();
    out.values = Vec::Map(lr.values.data(), static_cast<Eigen::Index>(lr.values.size())).array() - level;
    out.gradients = lr.points;
    const auto& q = src.quadrature();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < src.size(); ++i) {
        num += q[i] * out.values(i);
        den += q[i];
    }
    out.normalized = out.values.array() - num / den;

    std::vector<Vec> image, target;
    double defect = 0.0;
    for (int j = 0; j < src.n_theta(); ++j) {
        const Vec& y = out.gradients[src.index(src.n_r(), j)];
        image.push_back(y);
        defect = std::max(defect, std::abs(p_.omega_star->value(y)));
        target.push_back(grid_->node(grid_->index(grid_->n_r(), j)));
    }
    out.gauss.hausdorff = polyline_hausdorff(image, target);
    out.gauss.defect = defect;
    return out;
}

Diagnostics DualSolver::diagnostics(const Vec& u, double level) const
{
    const PolarGrid& g = *grid_;
    Diagnostics d;
    d.M = 0.0;
    d.M_tilde = 0.0;
    d.max_y2 = 0.0;
    double chi = 1e300, chif = 1e300;
    for (int i = 0; i < g.size(); ++i) {
        const Vec& y = g.node(i);
        Mat H = g.hessian(u, i);
        d.max_y2 = std::max(d.max_y2, y.squaredNorm());
        Jet2 Js;
        Js.point = y;
        Js.value = u(i) + level;
        Js.hessian = H;
        d.M = std::max(d.M, dual_chart_pack(Js).radii.maxCoeff());
        if (!g.is_boundary(i)) continue;

        Vec dh = p_.omega_star->gradient(y);
        Vec eta(2);
        eta << -dh(1), dh(0);
        eta.normalize();
        d.M_tilde = std::max(d.M_tilde, (1.0 + y.squaredNorm()) * eta.dot(H * eta));

        Vec x = g.gradient(u, i);
        Vec nu = p_.omega->gradient(x);
        if (!(nu.norm() > 0.0) || !(lambda_min2(H) > 0.0)) continue;
        nu.normalize();
        Jet2 J;
        J.point = x;
        J.value = x.dot(y) - u(i) - level;
        J.gradient = y;
        J.hessian = H.inverse();
        try {
            ObliquenessChi c = obliqueness_chi(J, nu, *p_.omega_star, 1e-6);
            if (c.chi_def < chi) {
                chi = c.chi_def;
                Vec r = y - p_.omega_star->interior_point();
                d.chi_angle = std::atan2(r(1), r(0));
            }
            chif = std::min(chif, c.chi_formula);
        } catch (const BoundaryMismatch&) {
        }
    }
    if (chi < 1e300) d.chi_min = chi;
    if (chif < 1e300) d.chi_formula_min = chif;
    return d;
}

}  // namespace khess
