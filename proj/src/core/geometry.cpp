#include "khess/geometry.hpp"

#include <cmath>
#include <sstream>

#include "khess/error.hpp"
#include "khess/symfun.hpp"

namespace khess {

CurvaturePack curvature_pack(const Jet2& jet)
{
    const int n = static_cast<int>(jet.gradient.size());
    const Vec& Du = jet.gradient;
    const Mat I = Mat::Identity(n, n);
    const Mat uu = Du * Du.transpose();

    CurvaturePack c;
    c.w = std::sqrt(1.0 + Du.squaredNorm());
    const double w = c.w;
    c.g = I + uu;
    c.g_inv = I - uu / (w * w);
    c.b = I - uu / (w * (1.0 + w));
    c.b_inv = I + uu / (1.0 + w);
    c.normal = Vec(n + 1);
    c.normal.head(n) = -Du / w;
    c.normal(n) = 1.0 / w;
    c.second_form = jet.hessian / w;
    c.curvature_matrix = symmetrize(c.b * c.second_form * c.b);
    c.kappa = jacobi_eigen(c.curvature_matrix).values;
    return c;
}

double support_value(const Jet2& jet)
{
    double w = std::sqrt(1.0 + jet.gradient.squaredNorm());
    return (jet.point.dot(jet.gradient) - jet.value) / w;
}

double primal_residual(const Jet2& jet, int k, const PsiSpec& psi)
{
    CurvaturePack c = curvature_pack(jet);
    OperatorValue F = eval_operator(c.curvature_matrix, k, Mode::primal);
    return F.value - psi.evaluate(support_value(jet), c.normal);
}

PrimalLinearization primal_linearization(const Jet2& jet, int k, const PsiSpec& psi)
{
    if (!psi.has_partials()) throw CapabilityError("primal_linearization: psi lacks partial-derivative oracles");
    const int n = static_cast<int>(jet.gradient.size());
    CurvaturePack c = curvature_pack(jet);
    for (int i = 0; i < n; ++i)
        if (!(c.kappa(i) > 0.0)) throw ConeViolation("primal_linearization: curvature outside the positive cone", c.kappa);

    const Vec& u = jet.gradient;
    const Vec& x = jet.point;
    const double w = c.w;
    const Mat& a = c.curvature_matrix;
    const Mat& b = c.b;
    SigmaValue sk = sigma_matrix(a, k);
    const Mat& S = sk.gradient;  // sigma_k^{ij}

    PrimalLinearization L;
    L.Gij = symmetrize(b * S * b / w);

    // The second term pairs sum_{i,j,t} sigma^{ij} a_{it} (w u_t b^{sj} + u_j b^{ts}):
    // the first summand contracts to w (b S a u)_s, the second to (b a S u)_s.
    // The first term carries 1/w^2, from d(1/w)/du_s acting on a = (1/w) b D^2u b.
    double trace_Sa = (S.cwiseProduct(a)).sum();
    Vec Sau = S * (a * u);
    Vec aSu = a * (S * u);
    L.Gs = -(u / (w * w)) * trace_Sa - (2.0 / (w * (1.0 + w))) * (w * (b * Sau) + b * aSu);

    const double z = (x.dot(u) - jet.value) / w;
    const Vec& p = c.normal;
    const double pz = psi.d_z(z, p);
    const Vec pp = psi.d_p(z, p);
    L.psis = Vec(n);
    const double w3 = w * w * w;
    for (int s = 0; s < n; ++s) {
        double v = pz * (x(s) / w - (x.dot(u) - jet.value) / w3 * u(s));
        for (int i = 0; i < n; ++i) v += pp(i) * (-(i == s ? 1.0 : 0.0) / w + u(i) * u(s) / w3);
        v -= pp(n) * u(s) / w3;
        L.psis(s) = v;
    }
    return L;
}

Vec gs_as_printed(const Jet2& jet, int k)
{
    CurvaturePack c = curvature_pack(jet);
    SigmaValue sk = sigma_matrix(c.curvature_matrix, k);
    Mat Gij = c.b * sk.gradient * c.b / c.w;
    const Vec& u = jet.gradient;
    const Mat& a = c.curvature_matrix;
    const Mat& b = c.b;
    const Mat& S = sk.gradient;
    double w = c.w;
    Vec second = -(2.0 / (w * (1.0 + w))) * (w * (b * (S * (a * u))) + b * (a * (S * u)));
    return -(u / w) * (Gij.cwiseProduct(jet.hessian)).sum() + second;
}

ObliquenessChi obliqueness_chi(const Jet2& jet, const Vec& nu, const ConvexBody& target, double tol)
{
    DefiningEval e = target.eval(jet.gradient);
    if (std::abs(e.h) > tol) {
        std::ostringstream os;
        os << "obliqueness_chi: Du is off the target boundary by " << std::abs(e.h);
        throw BoundaryMismatch(os.str(), std::abs(e.h));
    }
    ObliquenessChi out;
    out.chi_def = e.dh.dot(nu);
    const Mat& H = jet.hessian;
    Eigen::FullPivLU<Mat> lu(H);
    double inv_nn = lu.isInvertible() ? nu.dot(lu.solve(nu)) : 0.0;
    double hh = e.dh.dot(H * e.dh);
    double prod = inv_nn * hh;
    out.chi_formula = prod > 0.0 ? std::sqrt(prod) : 0.0;
    return out;
}

}  // namespace khess
