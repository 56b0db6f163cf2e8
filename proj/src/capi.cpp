#include "khess/khess.h"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "khess/error.hpp"
#include "khess/harness.hpp"

using namespace khess;

struct khess_config {
    ProblemConfig cfg;
};

struct khess_result {
    SolveRun run;
};

struct khess_verify {
    VerifyReport report;
};

namespace {

thread_local std::string last_error;

int fail(int status, const std::string& msg)
{
    last_error = msg;
    return status;
}

// Runs f, mapping exceptions to status codes.
template <class F>
int guarded(F&& f)
{
    try {
        last_error.clear();
        f();
        return KHESS_OK;
    } catch (const Error& e) {
        return fail(static_cast<int>(e.status()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(KHESS_E_INVARIANT, "out of memory");
    } catch (const std::exception& e) {
        return fail(KHESS_E_INVARIANT, std::string("internal error: ") + e.what());
    }
}

char* dup(const std::string& s)
{
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

}  // namespace

extern "C" {

const char* khess_last_error(void) { return last_error.c_str(); }

const char* khess_status_name(int status)
{
    switch (status) {
    case KHESS_OK: return "ok";
    case KHESS_E_ARGUMENT: return "argument";
    case KHESS_E_CONFIG: return "config";
    case KHESS_E_NONCONVERGENCE: return "nonconvergence";
    case KHESS_E_INVARIANT: return "invariant";
    case KHESS_E_CONE: return "cone";
    case KHESS_E_DOMAIN: return "domain";
    case KHESS_E_IO: return "io";
    case KHESS_E_CAPABILITY: return "capability";
    case KHESS_E_OUT_OF_IMAGE: return "out_of_image";
    default: return "unknown";
    }
}

void khess_string_free(char* s) { std::free(s); }

int khess_config_parse(const char* json, khess_config** out)
{
    if (!json || !out) return fail(KHESS_E_ARGUMENT, "khess_config_parse: null argument");
    *out = nullptr;
    return guarded([&] { *out = new khess_config{parse_config(json)}; });
}

int khess_config_from_instance(const char* name, khess_config** out)
{
    if (!name || !out) return fail(KHESS_E_ARGUMENT, "khess_config_from_instance: null argument");
    *out = nullptr;
    return guarded([&] { *out = new khess_config{find_instance(name).config}; });
}

int khess_config_to_json(const khess_config* cfg, char** out)
{
    if (!cfg || !out) return fail(KHESS_E_ARGUMENT, "khess_config_to_json: null argument");
    return guarded([&] { *out = dup(config_to_json(cfg->cfg)); });
}

void khess_config_free(khess_config* cfg) { delete cfg; }

int khess_instance_count(void)
{
    try {
        return static_cast<int>(instances().size());
    } catch (...) {
        return 0;
    }
}

const char* khess_instance_name(int index)
{
    if (index < 0 || index >= khess_instance_count()) return nullptr;
    return instances()[index].name.c_str();
}

int khess_solve(const khess_config* cfg, const char* out_dir, khess_result** out)
{
    if (!cfg || !out_dir || !out) return fail(KHESS_E_ARGUMENT, "khess_solve: null argument");
    *out = nullptr;
    return guarded([&] { *out = new khess_result{run_solve(cfg->cfg, out_dir)}; });
}

int khess_result_report_json(const khess_result* r, char** out)
{
    if (!r || !out) return fail(KHESS_E_ARGUMENT, "khess_result_report_json: null argument");
    return guarded([&] { *out = dup(report_to_json(r->run.report)); });
}

double khess_result_c_estimate(const khess_result* r)
{
    return r ? r->run.report.c_estimate : std::numeric_limits<double>::quiet_NaN();
}

int khess_result_converged(const khess_result* r) { return r && r->run.report.convergence_flag ? 1 : 0; }

double khess_result_hausdorff(const khess_result* r)
{
    return r ? r->run.primal.gauss.hausdorff : std::numeric_limits<double>::quiet_NaN();
}

double khess_result_grid_h(const khess_result* r)
{
    return r && r->run.state.grid ? r->run.state.grid->h() : std::numeric_limits<double>::quiet_NaN();
}

void khess_result_free(khess_result* r) { delete r; }

int khess_verify_run(const char* suite, uint64_t seed, khess_verify** out)
{
    if (!suite || !out) return fail(KHESS_E_ARGUMENT, "khess_verify_run: null argument");
    *out = nullptr;
    return guarded([&] { *out = new khess_verify{run_verify(suite, seed)}; });
}

int khess_verify_count(const khess_verify* v) { return v ? static_cast<int>(v->report.entries.size()) : 0; }

int khess_verify_failures(const khess_verify* v) { return v ? v->report.failures() : 0; }

int khess_verify_entry(const khess_verify* v, int index, const char** name, int* passed, double* value,
                       double* tolerance, const char** detail)
{
    if (!v) return fail(KHESS_E_ARGUMENT, "khess_verify_entry: null report");
    if (index < 0 || index >= khess_verify_count(v)) return fail(KHESS_E_ARGUMENT, "khess_verify_entry: index out of range");
    const VerifyEntry& e = v->report.entries[index];
    if (name) *name = e.name.c_str();
    if (passed) *passed = e.passed ? 1 : 0;
    if (value) *value = e.value;
    if (tolerance) *tolerance = e.tolerance;
    if (detail) *detail = e.detail.c_str();
    return KHESS_OK;
}

int khess_verify_json(const khess_verify* v, char** out)
{
    if (!v || !out) return fail(KHESS_E_ARGUMENT, "khess_verify_json: null argument");
    return guarded([&] { *out = dup(verify_to_json(v->report)); });
}

void khess_verify_free(khess_verify* v) { delete v; }

int khess_field_dump(const double y0[2], const double xi[2], const char* body_json, const char* out_csv)
{
    if (!y0 || !xi || !body_json || !out_csv) return fail(KHESS_E_ARGUMENT, "khess_field_dump: null argument");
    return guarded([&] {
        Vec a(2), b(2);
        a << y0[0], y0[1];
        b << xi[0], xi[1];
        write_field_csv(out_csv, a, b, parse_body(body_json));
    });
}

int khess_report_normalize(const char* json, char** out)
{
    if (!json || !out) return fail(KHESS_E_ARGUMENT, "khess_report_normalize: null argument");
    return guarded([&] { *out = dup(report_to_json(parse_report(json))); });
}

}  // extern "C"
