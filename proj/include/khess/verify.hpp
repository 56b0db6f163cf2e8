#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace khess {

// One measured invariant. value is the worst quantity found and tolerance
// the bound it was held to; detail carries counts and ratios.
struct VerifyEntry {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<VerifyEntry> entries;
    bool passed() const;
    int failures() const;
};

namespace verify {

// symfun
VerifyEntry duality_product(std::uint64_t seed, int samples = 1000, int max_n = 6);
VerifyEntry newton_maclaurin(std::uint64_t seed, int samples = 10000);
VerifyEntry operator_concavity(std::uint64_t seed);
VerifyEntry operator_gradient(std::uint64_t seed);
VerifyEntry operator_invariance(std::uint64_t seed);

// geometry
VerifyEntry metric_factorization(std::uint64_t seed);
VerifyEntry curvature_similarity(std::uint64_t seed);
VerifyEntry curvature_invariance(std::uint64_t seed);
VerifyEntry primal_linearization_fd(std::uint64_t seed, int jets = 100);

// duality
VerifyEntry reciprocal_spectrum(std::uint64_t seed);
VerifyEntry residual_zero_sets();
VerifyEntry matrix_formula(std::uint64_t seed, int points = 12);
VerifyEntry support_reconstruction(std::uint64_t seed);
// Cap on B_0.5 at n_r = coarse and 2 coarse.
VerifyEntry legendre_involution(int coarse = 64);
VerifyEntry hessian_inversion(int coarse = 64);

// rotations, any dimension >= 2
VerifyEntry field_tangency(std::uint64_t seed, int dim);
VerifyEntry envelope_at_anchor(std::uint64_t seed, int dim);
VerifyEntry envelope_bound(std::uint64_t seed, int dim, int samples = 1000);
VerifyEntry group_law(std::uint64_t seed, int dim, int samples = 1000);
VerifyEntry flow_derivative(std::uint64_t seed, int dim);
VerifyEntry polynomial_structure(std::uint64_t seed, int dim);
VerifyEntry unit_components(std::uint64_t seed, int dim);
VerifyEntry derivative_transport(std::uint64_t seed, int dim);

// solver
VerifyEntry stencil_exactness();
VerifyEntry jacobian_fd(std::uint64_t seed, int states = 20);
// Manufactured cap at n_r = coarse and 2 coarse.
VerifyEntry convergence_order(int coarse = 32);
VerifyEntry c_mesh_independence(int coarse = 32);
VerifyEntry rotational_equivariance();
// Shipped instances at a reduced grid: warm start no worse than cold, every
// accepted state above the SPD floor, chi_min > 0.
std::vector<VerifyEntry> continuation_checks(int n_r = 24);

// Differentiated equation on the exact cap state; defect at n_r = 128 and
// the ratio between n_r = 64 and 128.
VerifyEntry differentiated_equation_defect(int n_r = 128);
VerifyEntry differentiated_equation_ratio();

}  // namespace verify

// Suites: identities, rotations, duality, solver, all. Unknown names throw
// ArgumentError. Never throws on failed invariants.
VerifyReport run_verify(const std::string& suite, std::uint64_t seed = 1);

}  // namespace khess
