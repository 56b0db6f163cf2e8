#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "khess/body.hpp"
#include "khess/error.hpp"
#include "khess/psi.hpp"
#include "khess/solver.hpp"
#include "khess/verify.hpp"

namespace khess {

struct BodyConfig {
    std::string kind = "ball";  // ball | ellipse | superellipse
    std::vector<double> center;
    double radius = 0.0;                // ball
    std::vector<double> semi_axes;      // ellipse, superellipse
    double angle = 0.0;
    double exponent = 0.0;              // superellipse
};

struct PsiConfig {
    std::string kind = "constant";  // constant | normal-only | exponential
    double value = 1.0;
    double c0 = 1.0;
    std::vector<double> linear;
    std::vector<std::vector<double>> quadratic;
    double eps = 0.0;
    std::shared_ptr<PsiConfig> base;  // exponential only
};

struct ProblemConfig {
    int dimension = 2;
    int k = 1;
    BodyConfig omega, omega_star;
    PsiConfig psi;
    int n_r = 64, n_theta = 128;
    std::vector<double> continuation{0.4, 0.2, 0.1, 0.05, 0.025};
    double newton_tol = 1e-10;
    double spd_floor = 1e-8;
};

// Throws ConfigError naming the offending key path, e.g. "omega.radius".
ProblemConfig parse_config(const std::string& text);
std::string config_to_json(const ProblemConfig& c);

std::unique_ptr<ConvexBody> make_body(const BodyConfig& b);
PsiSpec make_psi(const PsiConfig& p, int dimension);
// Dimension 2 only; CapabilityError otherwise. An exponential psi is a full
// right-hand side and runs without continuation.
Problem make_problem(const ProblemConfig& c);

struct SolveReport {
    double c_estimate = std::numeric_limits<double>::quiet_NaN();
    std::vector<LevelRecord> residual_history;
    double chi_min = std::numeric_limits<double>::quiet_NaN();
    double M = std::numeric_limits<double>::quiet_NaN();
    double M_tilde = std::numeric_limits<double>::quiet_NaN();
    double mean_u = std::numeric_limits<double>::quiet_NaN();
    std::string grid_dump_path;
    double wall_time = 0.0;
    bool convergence_flag = false;
};

// NaN is written as null and read back as NaN.
std::string report_to_json(const SolveReport& r);
SolveReport parse_report(const std::string& text);

struct GridRow {
    double y1, y2, u_star, du1, du2, lambda_min, lambda_max;
};
std::vector<GridRow> grid_rows(const PolarGrid& g, const Vec& u_star);
void write_grid_csv(const std::string& path, const std::vector<GridRow>& rows);
std::vector<GridRow> read_grid_csv(const std::string& path);

struct SolveRun {
    SolveReport report;
    SolverState state;
    PrimalRecovery primal;
};

// Writes <out_dir>/report.json and <out_dir>/grid.csv. On a solver failure
// the partial report (completed levels, convergence_flag false) is written
// before the error is rethrown.
SolveRun run_solve(const ProblemConfig& c, const std::string& out_dir);

struct Instance {
    std::string name;
    ProblemConfig config;
    double c_exact = std::numeric_limits<double>::quiet_NaN();
};
const std::vector<Instance>& instances();
const Instance& find_instance(const std::string& name);

// Rotation-field dump over a 16x32 polar grid of the body: y1, y2, T1, T2.
void write_field_csv(const std::string& path, const Vec& y0, const Vec& xi, const BodyConfig& body);
BodyConfig parse_body(const std::string& text);

// {"suite", "seed", "passed", "entries": [{name, passed, value, tolerance, detail}]}
std::string verify_to_json(const VerifyReport& r);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace khess
