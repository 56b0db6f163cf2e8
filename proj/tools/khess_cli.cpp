// khess: solve, verify and rotation-field dumps over the C API.
//
// Exit codes: 0 success, 2 bad input (config, arguments, files), 3 solver
// failure, 4 invariant violation (including failed verify entries).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "khess/khess.h"

namespace {

int exit_code(int status)
{
    switch (status) {
    case KHESS_OK: return 0;
    case KHESS_E_NONCONVERGENCE:
    case KHESS_E_CONE:
    case KHESS_E_OUT_OF_IMAGE: return 3;
    case KHESS_E_INVARIANT: return 4;
    default: return 2;
    }
}

int report_error(int status)
{
    std::cerr << "khess: " << khess_status_name(status) << ": " << khess_last_error() << "\n";
    return exit_code(status);
}

bool read_text(const std::string& path, std::string& out)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream os;
    os << in.rdbuf();
    out = os.str();
    return true;
}

bool parse_pair(const std::string& s, double out[2])
{
    std::istringstream in(s);
    char comma = 0;
    return static_cast<bool>(in >> out[0] >> comma >> out[1]) && comma == ',' && (in >> std::ws).eof();
}

int cmd_solve(const std::string& config, const std::string& instance, const std::string& out_dir)
{
    khess_config* cfg = nullptr;
    int st;
    if (!instance.empty()) {
        st = khess_config_from_instance(instance.c_str(), &cfg);
    } else {
        std::string text;
        if (!read_text(config, text)) {
            std::cerr << "khess: cannot read config " << config << "\n";
            return 2;
        }
        st = khess_config_parse(text.c_str(), &cfg);
    }
    if (st != KHESS_OK) return report_error(st);
    khess_result* res = nullptr;
    st = khess_solve(cfg, out_dir.c_str(), &res);
    khess_config_free(cfg);
    if (st != KHESS_OK) {
        int code = report_error(st);
        if (code == 3) std::cerr << "khess: partial report written to " << out_dir << "/report.json\n";
        return code;
    }
    char* json = nullptr;
    st = khess_result_report_json(res, &json);
    if (st == KHESS_OK) {
        std::cout << json;
        khess_string_free(json);
    }
    int converged = khess_result_converged(res);
    khess_result_free(res);
    if (st != KHESS_OK) return report_error(st);
    return converged ? 0 : 3;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& json_path)
{
    khess_verify* v = nullptr;
    int st = khess_verify_run(suite.c_str(), seed, &v);
    if (st != KHESS_OK) return report_error(st);
    const int n = khess_verify_count(v);
    for (int i = 0; i < n; ++i) {
        const char *name, *detail;
        int passed;
        double value, tol;
        khess_verify_entry(v, i, &name, &passed, &value, &tol, &detail);
        std::printf("%s %-44s value %-12.4g tol %-10.3g %s\n", passed ? "PASS" : "FAIL", name, value, tol, detail);
    }
    const int failures = khess_verify_failures(v);
    std::printf("suite %s seed %llu: %d entries, %d failed\n", suite.c_str(), static_cast<unsigned long long>(seed), n,
                failures);
    if (!json_path.empty()) {
        char* json = nullptr;
        st = khess_verify_json(v, &json);
        if (st == KHESS_OK) {
            std::ofstream out(json_path, std::ios::binary);
            out << json;
            khess_string_free(json);
            if (!out) st = KHESS_E_IO;
        }
        if (st != KHESS_OK) {
            khess_verify_free(v);
            std::cerr << "khess: cannot write " << json_path << "\n";
            return 2;
        }
    }
    khess_verify_free(v);
    return failures ? 4 : 0;
}

int cmd_field(const std::string& y0s, const std::string& xis, const std::string& body, const std::string& out)
{
    double y0[2], xi[2];
    if (!parse_pair(y0s, y0) || !parse_pair(xis, xi)) {
        std::cerr << "khess: --y0 and --xi take two comma-separated numbers\n";
        return 2;
    }
    std::string spec = body;
    // A body spec may also be given as @file.
    if (!spec.empty() && spec[0] == '@' && !read_text(spec.substr(1), spec)) {
        std::cerr << "khess: cannot read body spec " << body.substr(1) << "\n";
        return 2;
    }
    int st = khess_field_dump(y0, xi, spec.c_str(), out.c_str());
    return st == KHESS_OK ? 0 : report_error(st);
}

int cmd_instances(const std::string& dump)
{
    if (!dump.empty()) {
        khess_config* cfg = nullptr;
        int st = khess_config_from_instance(dump.c_str(), &cfg);
        if (st != KHESS_OK) return report_error(st);
        char* json = nullptr;
        st = khess_config_to_json(cfg, &json);
        khess_config_free(cfg);
        if (st != KHESS_OK) return report_error(st);
        std::cout << json;
        khess_string_free(json);
        return 0;
    }
    for (int i = 0; i < khess_instance_count(); ++i) std::cout << khess_instance_name(i) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual k-Hessian solver with continuation, verification suites and rotation-field dumps"};
    app.require_subcommand(1);
    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "Seed for every randomized sweep")->capture_default_str();

    std::string config, instance, out_dir;
    auto* solve = app.add_subcommand("solve", "Run continuation, primal recovery and diagnostics");
    auto* copt = solve->add_option("--config", config, "Problem config (JSON)");
    auto* iopt = solve->add_option("--instance", instance, "Shipped instance name instead of a config");
    copt->excludes(iopt);
    solve->add_option("--out", out_dir, "Output directory for report.json and grid.csv")->required();
    solve->add_option("--seed", seed, "Seed (unused by the solver)");

    std::string suite = "all", json_path;
    auto* verify = app.add_subcommand("verify", "Run invariant suites");
    verify->add_option("--suite", suite, "identities | rotations | duality | solver | all")->capture_default_str();
    verify->add_option("--json", json_path, "Also write the machine-readable report here");
    verify->add_option("--seed", seed, "Seed for every randomized sweep");

    std::string y0, xi, body, field_out;
    auto* field = app.add_subcommand("field", "Dump a rotation field over a planar body");
    field->add_option("--y0", y0, "Boundary anchor a,b")->required();
    field->add_option("--xi", xi, "Unit tangent a,b")->required();
    field->add_option("--body", body, "Body spec as JSON, or @file")->required();
    field->add_option("--out", field_out, "Output CSV")->required();

    std::string dump;
    auto* inst = app.add_subcommand("instances", "List shipped instances, or print one as a config");
    inst->add_option("--dump", dump, "Instance to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*solve) {
        if (config.empty() && instance.empty()) {
            std::cerr << "khess: solve needs --config or --instance\n";
            return 2;
        }
        return cmd_solve(config, instance, out_dir);
    }
    if (*verify) return cmd_verify(suite, seed, json_path);
    if (*field) return cmd_field(y0, xi, body, field_out);
    return cmd_instances(dump);
}
