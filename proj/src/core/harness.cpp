#include "khess/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "khess/duality.hpp"
#include "khess/rotations.hpp"
#include "khess/symfun.hpp"

namespace khess {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) bad(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json& need(const json& j, const std::string& path, const char* key)
{
    if (!j.contains(key)) bad(join(path, key), "missing");
    return j.at(key);
}

double number(const json& j, const std::string& path)
{
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& path)
{
    if (!j.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> v;
    for (size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

BodyConfig body_from(const json& j, const std::string& path, int dimension)
{
    if (!j.is_object()) bad(path, "expected an object");
    BodyConfig b;
    const json& kind = need(j, path, "kind");
    if (!kind.is_string()) bad(join(path, "kind"), "expected a string");
    b.kind = kind.get<std::string>();
    if (b.kind == "ball") {
        only_keys(j, path, {"kind", "center", "radius"});
        b.radius = number(need(j, path, "radius"), join(path, "radius"));
        if (!(b.radius > 0.0)) bad(join(path, "radius"), "must be positive");
    } else if (b.kind == "ellipse" || b.kind == "superellipse") {
        if (b.kind == "ellipse")
            only_keys(j, path, {"kind", "center", "semi_axes", "angle"});
        else
            only_keys(j, path, {"kind", "center", "semi_axes", "angle", "exponent"});
        if (dimension != 2) bad(join(path, "kind"), b.kind + " is planar; dimension must be 2");
        b.semi_axes = numbers(need(j, path, "semi_axes"), join(path, "semi_axes"));
        if (b.semi_axes.size() != 2) bad(join(path, "semi_axes"), "expected two entries");
        if (!(b.semi_axes[0] > 0.0 && b.semi_axes[1] > 0.0)) bad(join(path, "semi_axes"), "must be positive");
        if (j.contains("angle")) b.angle = number(j["angle"], join(path, "angle"));
        if (b.kind == "superellipse") {
            b.exponent = number(need(j, path, "exponent"), join(path, "exponent"));
            if (!(b.exponent >= 2.0))
                bad(join(path, "exponent"), "must be >= 2; below 2 the body is not strictly convex with a smooth "
                                            "uniformly concave defining function");
        }
    } else {
        bad(join(path, "kind"), "unknown body kind '" + b.kind + "'");
    }
    b.center = j.contains("center") ? numbers(j["center"], join(path, "center")) : std::vector<double>(dimension, 0.0);
    if (static_cast<int>(b.center.size()) != dimension) bad(join(path, "center"), "length must equal dimension");
    return b;
}

PsiConfig psi_from(const json& j, const std::string& path, int dimension, bool allow_exponential)
{
    if (!j.is_object()) bad(path, "expected an object");
    PsiConfig p;
    const json& kind = need(j, path, "kind");
    if (!kind.is_string()) bad(join(path, "kind"), "expected a string");
    p.kind = kind.get<std::string>();
    if (p.kind == "constant") {
        only_keys(j, path, {"kind", "value"});
        p.value = number(need(j, path, "value"), join(path, "value"));
        if (!(p.value > 0.0)) bad(join(path, "value"), "must be positive");
    } else if (p.kind == "normal-only") {
        only_keys(j, path, {"kind", "c0", "linear", "quadratic"});
        p.c0 = number(need(j, path, "c0"), join(path, "c0"));
        p.linear = j.contains("linear") ? numbers(j["linear"], join(path, "linear"))
                                        : std::vector<double>(dimension + 1, 0.0);
        if (static_cast<int>(p.linear.size()) != dimension + 1) bad(join(path, "linear"), "length must be dimension + 1");
        if (j.contains("quadratic")) {
            const json& q = j["quadratic"];
            if (!q.is_array() || static_cast<int>(q.size()) != dimension + 1)
                bad(join(path, "quadratic"), "expected dimension + 1 rows");
            for (size_t r = 0; r < q.size(); ++r) {
                p.quadratic.push_back(numbers(q[r], join(path, "quadratic") + "[" + std::to_string(r) + "]"));
                if (static_cast<int>(p.quadratic.back().size()) != dimension + 1)
                    bad(join(path, "quadratic"), "rows must have dimension + 1 entries");
            }
        } else {
            p.quadratic.assign(dimension + 1, std::vector<double>(dimension + 1, 0.0));
        }
    } else if (p.kind == "exponential" && allow_exponential) {
        only_keys(j, path, {"kind", "eps", "base"});
        p.eps = number(need(j, path, "eps"), join(path, "eps"));
        if (!(p.eps >= 0.0)) bad(join(path, "eps"), "must be nonnegative");
        p.base = std::make_shared<PsiConfig>(psi_from(need(j, path, "base"), join(path, "base"), dimension, false));
    } else {
        bad(join(path, "kind"), "unknown psi kind '" + p.kind + "'");
    }
    return p;
}

json body_json(const BodyConfig& b)
{
    json j;
    j["kind"] = b.kind;
    j["center"] = b.center;
    if (b.kind == "ball") {
        j["radius"] = b.radius;
    } else {
        j["semi_axes"] = b.semi_axes;
        j["angle"] = b.angle;
        if (b.kind == "superellipse") j["exponent"] = b.exponent;
    }
    return j;
}

json psi_json(const PsiConfig& p)
{
    json j;
    j["kind"] = p.kind;
    if (p.kind == "constant") {
        j["value"] = p.value;
    } else if (p.kind == "normal-only") {
        j["c0"] = p.c0;
        j["linear"] = p.linear;
        j["quadratic"] = p.quadratic;
    } else {
        j["eps"] = p.eps;
        j["base"] = psi_json(*p.base);
    }
    return j;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j, const char* key)
{
    if (!j.contains(key)) throw ArgumentError(std::string("report: missing key ") + key);
    const json& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) throw ArgumentError(std::string("report: ") + key + " is not a number");
    return v.get<double>();
}

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ProblemConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    only_keys(j, "", {"dimension", "k", "omega", "omega_star", "psi", "grid", "continuation", "tolerances"});
    ProblemConfig c;
    c.dimension = integer(need(j, "", "dimension"), "dimension");
    if (c.dimension < 2) bad("dimension", "must be at least 2");
    c.k = integer(need(j, "", "k"), "k");
    if (c.k < 1 || c.k > c.dimension) bad("k", "must satisfy 1 <= k <= dimension");
    c.omega = body_from(need(j, "", "omega"), "omega", c.dimension);
    c.omega_star = body_from(need(j, "", "omega_star"), "omega_star", c.dimension);
    c.psi = psi_from(need(j, "", "psi"), "psi", c.dimension, true);
    if (j.contains("grid")) {
        const json& g = j["grid"];
        only_keys(g, "grid", {"n_r", "n_theta"});
        if (g.contains("n_r")) c.n_r = integer(g["n_r"], "grid.n_r");
        c.n_theta = g.contains("n_theta") ? integer(g["n_theta"], "grid.n_theta") : 2 * c.n_r;
        if (c.n_r < 6) bad("grid.n_r", "must be at least 6");
        if (c.n_theta < 8) bad("grid.n_theta", "must be at least 8");
    }
    if (j.contains("continuation")) {
        c.continuation = numbers(j["continuation"], "continuation");
        if (c.continuation.size() < 2) bad("continuation", "needs at least two levels");
        for (size_t i = 0; i < c.continuation.size(); ++i) {
            if (!(c.continuation[i] > 0.0)) bad("continuation", "levels must be positive");
            if (i && !(c.continuation[i] < c.continuation[i - 1])) bad("continuation", "levels must decrease");
        }
    }
    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        only_keys(t, "tolerances", {"newton_tol", "spd_floor"});
        if (t.contains("newton_tol")) c.newton_tol = number(t["newton_tol"], "tolerances.newton_tol");
        if (t.contains("spd_floor")) c.spd_floor = number(t["spd_floor"], "tolerances.spd_floor");
        if (!(c.newton_tol > 0.0)) bad("tolerances.newton_tol", "must be positive");
        if (!(c.spd_floor > 0.0)) bad("tolerances.spd_floor", "must be positive");
    }
    // Construction runs the strict-convexity probe.
    for (auto [b, name] : {std::pair{&c.omega, "omega"}, std::pair{&c.omega_star, "omega_star"}}) {
        try {
            make_body(*b);
        } catch (const ConfigError& e) {
            bad(name, e.what());
        }
    }
    try {
        make_psi(c.psi, c.dimension);
    } catch (const ConfigError& e) {
        bad("psi", e.what());
    }
    return c;
}

std::string config_to_json(const ProblemConfig& c)
{
    json j;
    j["dimension"] = c.dimension;
    j["k"] = c.k;
    j["omega"] = body_json(c.omega);
    j["omega_star"] = body_json(c.omega_star);
    j["psi"] = psi_json(c.psi);
    j["grid"] = {{"n_r", c.n_r}, {"n_theta", c.n_theta}};
    j["continuation"] = c.continuation;
    j["tolerances"] = {{"newton_tol", c.newton_tol}, {"spd_floor", c.spd_floor}};
    return j.dump(2) + "\n";
}

std::unique_ptr<ConvexBody> make_body(const BodyConfig& b)
{
    Vec c = Eigen::Map<const Vec>(b.center.data(), static_cast<Eigen::Index>(b.center.size()));
    if (b.kind == "ball") return make_ball(c, b.radius);
    if (b.semi_axes.size() != 2) throw ConfigError(b.kind + ": semi_axes must have two entries");
    if (b.kind == "ellipse") return make_ellipse(c, b.semi_axes[0], b.semi_axes[1], b.angle);
    if (b.kind == "superellipse") return make_superellipse(c, b.semi_axes[0], b.semi_axes[1], b.exponent, b.angle);
    throw ConfigError("unknown body kind '" + b.kind + "'");
}

PsiSpec make_psi(const PsiConfig& p, int dimension)
{
    if (p.kind == "constant") return psi::constant(p.value);
    if (p.kind == "normal-only") {
        const int m = dimension + 1;
        Vec a = Eigen::Map<const Vec>(p.linear.data(), static_cast<Eigen::Index>(p.linear.size()));
        Mat Q = Mat::Zero(m, m);
        for (int r = 0; r < m && r < static_cast<int>(p.quadratic.size()); ++r)
            for (int s = 0; s < m && s < static_cast<int>(p.quadratic[r].size()); ++s) Q(r, s) = p.quadratic[r][s];
        return psi::normal_only(p.c0, a, Q);
    }
    if (p.kind == "exponential" && p.base) return psi::exponential(p.eps, make_psi(*p.base, dimension));
    throw ConfigError("unknown psi kind '" + p.kind + "'");
}

Problem make_problem(const ProblemConfig& c)
{
    if (c.dimension != 2) throw CapabilityError("solve: only dimension 2 is supported by the grid");
    Problem p;
    p.omega = make_body(c.omega);
    p.omega_star = make_body(c.omega_star);
    p.k = c.k;
    p.psi = make_psi(c.psi, c.dimension);
    p.continuation = c.psi.kind != "exponential";
    p.schedule = c.continuation;
    p.n_r = c.n_r;
    p.n_theta = c.n_theta;
    p.options.newton_tol = c.newton_tol;
    p.options.spd_floor = c.spd_floor;
    return p;
}

std::string report_to_json(const SolveReport& r)
{
    json j;
    j["c_estimate"] = num_or_null(r.c_estimate);
    json h = json::array();
    for (const LevelRecord& l : r.residual_history)
        h.push_back({{"eps", num_or_null(l.eps)}, {"iterations", l.iterations}, {"residual", num_or_null(l.residual)}});
    j["residual_history"] = h;
    j["chi_min"] = num_or_null(r.chi_min);
    j["M"] = num_or_null(r.M);
    j["M_tilde"] = num_or_null(r.M_tilde);
    j["mean_u"] = num_or_null(r.mean_u);
    j["grid_dump_path"] = r.grid_dump_path;
    j["wall_time"] = num_or_null(r.wall_time);
    j["convergence_flag"] = r.convergence_flag;
    return j.dump(2) + "\n";
}

SolveReport parse_report(const std::string& text)
{
    try {
        json j = json::parse(text);
        SolveReport r;
        r.c_estimate = num_from(j, "c_estimate");
        for (const json& l : j.at("residual_history"))
            r.residual_history.push_back({num_from(l, "eps"), l.at("iterations").get<int>(), num_from(l, "residual")});
        r.chi_min = num_from(j, "chi_min");
        r.M = num_from(j, "M");
        r.M_tilde = num_from(j, "M_tilde");
        r.mean_u = num_from(j, "mean_u");
        r.grid_dump_path = j.at("grid_dump_path").get<std::string>();
        r.wall_time = num_from(j, "wall_time");
        r.convergence_flag = j.at("convergence_flag").get<bool>();
        return r;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("report: ") + e.what());
    }
}

std::vector<GridRow> grid_rows(const PolarGrid& g, const Vec& u_star)
{
    std::vector<GridRow> rows;
    rows.reserve(g.size());
    for (int i = 0; i < g.size(); ++i) {
        Vec d = g.gradient(u_star, i);
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(g.hessian(u_star, i)), Eigen::EigenvaluesOnly);
        const Vec& y = g.node(i);
        rows.push_back({y(0), y(1), u_star(i), d(0), d(1), es.eigenvalues()(0), es.eigenvalues()(1)});
    }
    return rows;
}

void write_grid_csv(const std::string& path, const std::vector<GridRow>& rows)
{
    std::string out = "y1,y2,u_star,du1,du2,lambda_min,lambda_max\n";
    for (const GridRow& r : rows)
        out += fmt17(r.y1) + "," + fmt17(r.y2) + "," + fmt17(r.u_star) + "," + fmt17(r.du1) + "," + fmt17(r.du2) +
               "," + fmt17(r.lambda_min) + "," + fmt17(r.lambda_max) + "\n";
    write_file(path, out);
}

std::vector<GridRow> read_grid_csv(const std::string& path)
{
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "y1,y2,u_star,du1,du2,lambda_min,lambda_max")
        throw IoError(path + ": unexpected grid CSV header");
    std::vector<GridRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v[7];
        const char* p = line.c_str();
        for (int c = 0; c < 7; ++c) {
            char* end = nullptr;
            v[c] = std::strtod(p, &end);
            if (end == p || (c < 6 && *end != ',') || (c == 6 && *end != '\0'))
                throw IoError(path + ": malformed row '" + line + "'");
            p = end + 1;
        }
        rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    }
    return rows;
}

SolveRun run_solve(const ProblemConfig& c, const std::string& out_dir)
{
    Problem p = make_problem(c);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    const std::string report_path = (std::filesystem::path(out_dir) / "report.json").string();
    const std::string grid_path = (std::filesystem::path(out_dir) / "grid.csv").string();

    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    SolveRun run;
    SolveReport& rep = run.report;
    try {
        DualSolver solver(p);
        run.state = solver.solve();
        run.primal = solver.recover_primal(run.state.u_shape, run.state.level);
        rep.wall_time = elapsed();
        const SolverState& st = run.state;
        rep.c_estimate = st.c_estimate;
        rep.residual_history = st.history;
        rep.chi_min = st.diagnostics.chi_min;
        rep.M = st.diagnostics.M;
        rep.M_tilde = st.diagnostics.M_tilde;
        rep.mean_u = st.mean_u;
        rep.convergence_flag = st.converged && st.residual_norm <= p.options.newton_tol;
        write_grid_csv(grid_path, grid_rows(solver.grid(), st.u_star));
        rep.grid_dump_path = grid_path;
    } catch (const NonConvergence& e) {
        rep.wall_time = elapsed();
        rep.residual_history = e.history;
        rep.convergence_flag = false;
        write_file(report_path, report_to_json(rep));
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const Error&) {
        rep.wall_time = elapsed();
        rep.convergence_flag = false;
        write_file(report_path, report_to_json(rep));
        throw;
    }
    write_file(report_path, report_to_json(rep));
    return run;
}

const std::vector<Instance>& instances()
{
    static const std::vector<Instance> list = [] {
        auto cfg = [](const std::string& text) { return parse_config(text); };
        auto cap = [&](const std::string& name, double rho, int k) {
            std::ostringstream os;
            os << R"({"dimension": 2, "k": )" << k << R"(, "omega": {"kind": "ball", "radius": )" << rho
               << R"(}, "omega_star": {"kind": "ball", "radius": )" << rho
               << R"(}, "psi": {"kind": "constant", "value": 1}})";
            return Instance{name, cfg(os.str()), binomial(2, k) / std::pow(1 + rho * rho, 0.5 * k)};
        };
        std::vector<Instance> v;
        v.push_back(cap("cap-r0.5-k1", 0.5, 1));
        v.push_back(cap("cap-r0.5-k2", 0.5, 2));
        v.push_back(cap("cap-r0.3-k1", 0.3, 1));
        v.push_back(cap("cap-r0.8-k2", 0.8, 2));
        v.push_back({"ellipse-target", cfg(R"({"dimension": 2, "k": 1,
            "omega": {"kind": "ball", "radius": 0.5},
            "omega_star": {"kind": "ellipse", "semi_axes": [0.6, 0.35], "angle": 0.3},
            "psi": {"kind": "constant", "value": 1}})")});
        v.push_back({"ellipse-pair", cfg(R"({"dimension": 2, "k": 2,
            "omega": {"kind": "ellipse", "semi_axes": [0.5, 0.4]},
            "omega_star": {"kind": "ellipse", "semi_axes": [0.6, 0.45], "angle": 0.7},
            "psi": {"kind": "constant", "value": 1}})")});
        v.push_back({"superellipse-pair", cfg(R"({"dimension": 2, "k": 2,
            "omega": {"kind": "superellipse", "semi_axes": [0.5, 0.4], "exponent": 4},
            "omega_star": {"kind": "superellipse", "semi_axes": [0.6, 0.5], "exponent": 3, "angle": 0.2},
            "psi": {"kind": "constant", "value": 1}})")});
        return v;
    }();
    return list;
}

const Instance& find_instance(const std::string& name)
{
    for (const Instance& i : instances())
        if (i.name == name) return i;
    throw ArgumentError("unknown instance '" + name + "'");
}

BodyConfig parse_body(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("body: malformed JSON: ") + e.what());
    }
    BodyConfig b = body_from(j, "body", 2);
    try {
        make_body(b);
    } catch (const ConfigError& e) {
        bad("body", e.what());
    }
    return b;
}

void write_field_csv(const std::string& path, const Vec& y0, const Vec& xi, const BodyConfig& body)
{
    auto B = make_body(body);
    RotationField f = make_field(y0, xi, *B);
    PolarGrid g(*B, 16, 32);
    std::string out = "y1,y2,T1,T2\n";
    auto row = [&](const Vec& y) {
        Vec T = f.eval(y);
        out += fmt17(y(0)) + "," + fmt17(y(1)) + "," + fmt17(T(0)) + "," + fmt17(T(1)) + "\n";
    };
    row(y0);
    for (const Vec& y : g.nodes()) row(y);
    write_file(path, out);
}

std::string verify_to_json(const VerifyReport& r)
{
    json j;
    j["suite"] = r.suite;
    j["seed"] = r.seed;
    j["passed"] = r.passed();
    json e = json::array();
    for (const VerifyEntry& v : r.entries)
        e.push_back({{"name", v.name},
                     {"passed", v.passed},
                     {"value", num_or_null(v.value)},
                     {"tolerance", num_or_null(v.tolerance)},
                     {"detail", v.detail}});
    j["entries"] = e;
    return j.dump(2) + "\n";
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace khess
