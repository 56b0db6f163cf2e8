#pragma once

#include <limits>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "khess/body.hpp"
#include "khess/error.hpp"
#include "khess/grid.hpp"
#include "khess/linalg.hpp"
#include "khess/psi.hpp"

namespace khess {

using SparseMat = Eigen::SparseMatrix<double>;

struct SolverOptions {
    double newton_tol = 1e-10;  // residual infinity norm
    double spd_floor = 1e-8;    // lambda_min(D^2u*) accepted at every node
    int max_iterations = 200;
    double armijo = 1e-4;
    int max_halvings = 40;
};

struct Problem {
    std::shared_ptr<const ConvexBody> omega;       // source domain, defining function h*
    std::shared_ptr<const ConvexBody> omega_star;  // target domain, carries the grid
    int k = 1;
    // With continuation on, psi is the base psi0 and level eps solves against
    // psi::exponential(eps, psi). Otherwise psi is the full right-hand side.
    PsiSpec psi;
    bool continuation = true;
    std::vector<double> schedule{0.4, 0.2, 0.1, 0.05, 0.025};
    int n_r = 64, n_theta = 128;
    SolverOptions options;
};

struct ResidualEval {
    Vec r;
    std::vector<int> violations;  // nodes with lambda_min(D^2u*) below the floor
    double lambda_min = 0.0;
    double norm() const { return r.lpNorm<Eigen::Infinity>(); }
};

struct NewtonReport {
    Vec u;  // shape part; the level is unchanged by Newton
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residuals;  // before each step, then the final value
    int rejected_steps = 0;
    bool repaired = false;
};

struct GaussImageReport {
    double hausdorff = std::numeric_limits<double>::quiet_NaN();
    double defect = std::numeric_limits<double>::quiet_NaN();  // max |h(Du(x))| on boundary samples of Omega
};

struct PrimalRecovery {
    std::vector<Vec> points;  // nodes of a polar grid on Omega
    Vec values;               // u at the points
    Vec normalized;           // u minus its mean over Omega
    std::vector<Vec> gradients;
    GaussImageReport gauss;
};

struct Diagnostics {
    double chi_min = std::numeric_limits<double>::quiet_NaN();
    double chi_formula_min = std::numeric_limits<double>::quiet_NaN();
    double chi_angle = std::numeric_limits<double>::quiet_NaN();  // polar angle of the minimizing boundary node
    double M = std::numeric_limits<double>::quiet_NaN();
    double M_tilde = std::numeric_limits<double>::quiet_NaN();
    double max_y2 = std::numeric_limits<double>::quiet_NaN();  // max |y|^2 over the nodes
};

struct SolverState {
    std::shared_ptr<const PolarGrid> grid;
    Vec u_star;  // u_shape + level, for reporting
    Vec u_shape;
    double level = 0.0;
    double eps = 0.0;
    double residual_norm = 0.0;
    bool converged = false;
    std::vector<LevelRecord> history;
    std::vector<double> level_mean_u;  // one per completed level
    // From the second level on: residual norm of the warm start, and of the
    // cold start initial_guess(eps) at the same level.
    std::vector<double> warm_residual, cold_residual;
    double mean_u = std::numeric_limits<double>::quiet_NaN();
    // sigma_k = c psi0^k in the limit; NaN when no continuation was run.
    double c_estimate = std::numeric_limits<double>::quiet_NaN();
    Diagnostics diagnostics;
};

// Carries the completed levels of a failed continuation.
struct PartialSolve : NonConvergence {
    PartialSolve(const std::string& m, std::vector<LevelRecord> h, Status cause)
        : NonConvergence(m, std::move(h)), cause(cause) {}
    Status cause;
};

// F_dual(w* b* D^2u* b*) = psi*(y, u*) in Omega*, h*(Du*) = 0 on its boundary.
class DualSolver {
public:
    explicit DualSolver(Problem p);

    const Problem& problem() const { return p_; }
    const PolarGrid& grid() const { return *grid_; }
    std::shared_ptr<const PolarGrid> grid_ptr() const { return grid_; }
    PsiSpec psi_at(double eps) const;

    // States are u* = u + level. Small epsilon pushes u* to order 1/eps, and
    // a constant carried in the node values would cost its rounding error
    // times the Hessian weights, about 1e-10 at the finer grids; the scalar
    // level keeps it out.

    // Never throws on cone violations; they are listed instead.
    ResidualEval evaluate(const Vec& u, double eps, double level = 0.0) const;
    // Throws ConeViolation when a node Hessian is below the floor.
    Vec residual(const Vec& u, double eps, double level = 0.0) const;
    SparseMat jacobian(const Vec& u, double eps, double level = 0.0) const;

    // alpha w* + beta.y + gamma, fitted to the boundary data and the equation
    // at the interior point.
    Vec initial_guess(double eps) const;
    // Adds b |y - c|^2 / 2 until every node Hessian clears the floor.
    Vec repair(const Vec& u) const;
    NewtonReport newton(const Vec& u0, double eps, double level = 0.0) const;
    SolverState solve() const;

    // Mean of the primal u over Omega, through x = Du*(y), dx = det D^2u* dy.
    double primal_mean(const Vec& u, double level = 0.0) const;
    PrimalRecovery recover_primal(const Vec& u, double level = 0.0) const;
    Diagnostics diagnostics(const Vec& u, double level = 0.0) const;

private:
    double shift_for(const Vec& u, double level, double eps_from, double eps_to) const;

    Problem p_;
    std::shared_ptr<const PolarGrid> grid_;
};

// c from the last two levels: L = eps mean_u extrapolated linearly to eps = 0,
// then c = exp(k L).
double extrapolate_c(const std::vector<double>& eps, const std::vector<double>& mean_u, int k);

// max |J - J_fd| / max |J| with J_fd from central differences of the
// residual, step `step` per node. The state must stay feasible under the
// probes.
double jacobian_fd_error(const DualSolver& s, const Vec& u, double eps, double level = 0.0, double step = 1e-6);

// Symmetric Hausdorff distance between two closed polylines.
double polyline_hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b);

}  // namespace khess
