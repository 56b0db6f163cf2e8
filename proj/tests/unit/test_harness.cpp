#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <map>
#include <random>

#include "khess/duality.hpp"
#include "khess/error.hpp"
#include "khess/harness.hpp"
#include "khess/symfun.hpp"

using namespace khess;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"dimension": 2, "k": 1,
  "omega": {"kind": "ball", "radius": 0.5}, "omega_star": {"kind": "ball", "radius": 0.5},
  "psi": {"kind": "constant", "value": 1}})";

std::string config_error(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string patched(const std::string& from, const std::string& to)
{
    std::string s = kMinimal;
    size_t at = s.rfind(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct FaultGuard {
    FaultGuard() { set_bstar_fault(true); }
    ~FaultGuard() { set_bstar_fault(false); }
};

}  // namespace

TEST_CASE("config defaults and validation")
{
    ProblemConfig c = parse_config(kMinimal);
    CHECK(c.n_r == 64);
    CHECK(c.n_theta == 128);
    CHECK(c.newton_tol == 1e-10);
    CHECK(c.spd_floor == 1e-8);
    CHECK(c.continuation == std::vector<double>{0.4, 0.2, 0.1, 0.05, 0.025});
    CHECK(c.omega.center == std::vector<double>{0.0, 0.0});
    CHECK(parse_config(config_to_json(c)).n_r == 64);
    CHECK(config_to_json(parse_config(config_to_json(c))) == config_to_json(c));

    CHECK(config_error(patched("\"k\": 1", "\"k\": 3")).rfind("k:", 0) == 0);
    CHECK(config_error(patched("\"k\": 1", "\"k\": 0")).rfind("k:", 0) == 0);
    CHECK(config_error(patched("\"radius\": 0.5}", "\"radius\": 0.5, \"axes\": 1}")).rfind("omega_star.axes", 0) == 0);
    CHECK(config_error(patched("\"radius\": 0.5}", "\"radius\": -1}")).rfind("omega_star.radius", 0) == 0);
    CHECK(config_error(patched("\"value\": 1", "\"value\": \"one\"")).rfind("psi.value", 0) == 0);
    CHECK(config_error(patched("{\"kind\": \"ball\", \"radius\": 0.5}",
                               R"({"kind": "superellipse", "semi_axes": [0.6, 0.5], "exponent": 1.5})"))
              .rfind("omega_star.exponent", 0) == 0);
    CHECK(config_error(patched("\"dimension\": 2", "\"dimension\": 2, \"continuation\": [0.1, 0.2]"))
              .rfind("continuation", 0) == 0);
    CHECK(config_error(patched("\"value\": 1}", "\"value\": 1, \"eps\": 0.1}")).rfind("psi.eps", 0) == 0);
    CHECK(config_error(patched("{\"kind\": \"ball\", \"radius\": 0.5}, \"omega_star\"",
                               "{\"kind\": \"ball\", \"center\": [0, 0, 0], \"radius\": 0.5}, \"omega_star\""))
              .rfind("omega.center", 0) == 0);
    CHECK_FALSE(config_error("[1, 2]").empty());

    // Dimension 3 parses for verify but cannot be solved on the planar grid.
    std::string d3 = R"({"dimension": 3, "k": 2,
      "omega": {"kind": "ball", "radius": 0.5}, "omega_star": {"kind": "ball", "radius": 0.5},
      "psi": {"kind": "normal-only", "c0": 2, "linear": [0.1, 0, 0, 0.2]}})";
    ProblemConfig c3 = parse_config(d3);
    CHECK(c3.omega.center.size() == 3);
    CHECK_THROWS_AS(make_problem(c3), CapabilityError);

    ProblemConfig e = parse_config(patched("{\"kind\": \"constant\", \"value\": 1}",
                                           R"({"kind": "exponential", "eps": 0.3, "base": {"kind": "constant", "value": 2}})"));
    Problem p = make_problem(e);
    CHECK_FALSE(p.continuation);
    CHECK(p.psi.eps == 0.3);
}

TEST_CASE("report round trip is byte-identical, NaN as null")
{
    SolveReport r;
    r.c_estimate = 1.7890915012345678;
    r.residual_history = {{0.4, 5, 3.1e-12}, {0.2, 3, 1.0000000000000002e-11}};
    r.chi_min = 0.1 + 0.2;
    r.M = std::numeric_limits<double>::quiet_NaN();
    r.M_tilde = 1e-300;
    r.mean_u = -12.5;
    r.grid_dump_path = "out/grid.csv";
    r.wall_time = 9.81;
    r.convergence_flag = true;
    std::string a = report_to_json(r);
    CHECK(a.find("\"M\": null") != std::string::npos);
    SolveReport b = parse_report(a);
    CHECK(std::isnan(b.M));
    CHECK(same_bits(b.chi_min, r.chi_min));
    CHECK(report_to_json(b) == a);
    // Every key, in report order.
    const char* keys[] = {"c_estimate", "residual_history", "chi_min", "M", "M_tilde",
                          "mean_u", "grid_dump_path", "wall_time", "convergence_flag"};
    size_t pos = 0;
    for (const char* k : keys) {
        size_t at = a.find(std::string("\n  \"") + k + "\"");
        REQUIRE(at != std::string::npos);
        CHECK(at >= pos);
        pos = at;
    }
    CHECK_THROWS_AS(parse_report("{\"c_estimate\": 1}"), ArgumentError);
}

TEST_CASE("grid CSV reproduces values exactly")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-1, 1);
    std::vector<GridRow> rows;
    for (int i = 0; i < 500; ++i) {
        double s = std::pow(10.0, 30 * ud(rng));
        rows.push_back({ud(rng), ud(rng) * s, ud(rng) / 3, 1.0 / 7 * ud(rng), ud(rng) * 1e-17, ud(rng), -0.0});
    }
    fs::path p = fs::temp_directory_path() / "khess_unit_grid.csv";
    write_grid_csv(p.string(), rows);
    std::vector<GridRow> back = read_grid_csv(p.string());
    REQUIRE(back.size() == rows.size());
    bool exact = true;
    for (size_t i = 0; i < rows.size(); ++i) {
        const double* x = &rows[i].y1;
        const double* y = &back[i].y1;
        for (int c = 0; c < 7; ++c) exact = exact && same_bits(x[c], y[c]);
    }
    CHECK(exact);
    write_file(p.string(), "y1,y2\n1,2\n");
    CHECK_THROWS_AS(read_grid_csv(p.string()), IoError);
}

TEST_CASE("registry instances are valid configs")
{
    const auto& list = instances();
    CHECK(list.size() >= 7);
    int caps = 0;
    for (const Instance& i : list) {
        CHECK(parse_config(config_to_json(i.config)).k == i.config.k);
        if (i.name.rfind("cap-", 0) == 0) {
            ++caps;
            double rho = i.config.omega.radius;
            CHECK(i.c_exact == doctest::Approx(binomial(2, i.config.k) / std::pow(1 + rho * rho, 0.5 * i.config.k)));
        }
    }
    CHECK(caps >= 3);
    CHECK(find_instance("cap-r0.5-k1").c_exact == doctest::Approx(1.7888543));
    CHECK(find_instance("superellipse-pair").config.omega_star.exponent == 3.0);
    CHECK_THROWS_AS(find_instance("missing"), ArgumentError);
}

TEST_CASE("run_solve writes the partial report on failure")
{
    ProblemConfig c = parse_config(kMinimal);
    c.n_r = 12;
    c.n_theta = 24;
    c.newton_tol = 1e-30;
    fs::path out = fs::temp_directory_path() / "khess_unit_partial";
    fs::remove_all(out);
    CHECK_THROWS_AS(run_solve(c, out.string()), NonConvergence);
    SolveReport r = parse_report(read_file((out / "report.json").string()));
    CHECK_FALSE(r.convergence_flag);
    REQUIRE(r.residual_history.size() >= 1);
    CHECK(r.residual_history.front().eps == 0.4);
    CHECK(r.grid_dump_path.empty());

    c.newton_tol = 1e-10;
    SolveRun ok = run_solve(c, out.string());
    CHECK(ok.report.convergence_flag);
    CHECK(ok.report.residual_history.back().residual <= c.newton_tol);
    CHECK(read_grid_csv(ok.report.grid_dump_path).size() == 12u * 24u);
}

TEST_CASE("b* sign flip fails the duality suite only")
{
    std::map<std::string, bool> clean, faulty;
    for (const char* s : {"identities", "rotations", "duality"})
        for (const VerifyEntry& e : run_verify(s, 1).entries) clean[e.name] = e.passed;
    {
        FaultGuard fault;
        for (const char* s : {"identities", "rotations", "duality"})
            for (const VerifyEntry& e : run_verify(s, 1).entries) faulty[e.name] = e.passed;
    }
    REQUIRE(clean.size() == faulty.size());
    int duality_flips = 0;
    for (const auto& [name, ok] : clean) {
        bool is_duality = name.rfind("duality.", 0) == 0;
        if (is_duality) {
            CHECK(ok);
            if (!faulty[name]) ++duality_flips;
        } else {
            CHECK_MESSAGE(faulty[name] == ok, name);
        }
    }
    CHECK(duality_flips >= 1);
    CHECK_FALSE(run_verify("identities", 1).entries.empty());
    CHECK_THROWS_AS(run_verify("bogus", 1), ArgumentError);
}
