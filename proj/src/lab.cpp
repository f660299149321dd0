#include "nilab/lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "json.hpp"
#include "nilab/ergodic.hpp"
#include "nilab/rng.hpp"
#include "nilab/spectral.hpp"

namespace nilab {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
bool parse_int(const std::string& s, T& out)
{
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

bool parse_double(const std::string& s, double& out)
{
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

struct Field {
    std::string key;
    std::function<bool(ExperimentConfig&, const std::string&)> set;
    std::function<json(const ExperimentConfig&)> get;
};

template <class T>
Field int_field(const std::string& key, T ExperimentConfig::*m)
{
    return {key, [m](ExperimentConfig& c, const std::string& v) { return parse_int(v, c.*m); },
            [m](const ExperimentConfig& c) { return json(c.*m); }};
}

Field real_field(const std::string& key, double ExperimentConfig::*m)
{
    return {key, [m](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.*m); },
            [m](const ExperimentConfig& c) { return json(c.*m); }};
}

Field opt_field(const std::string& key, std::optional<double> ExperimentConfig::*m)
{
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                if (v == "none") {
                    (c.*m).reset();
                    return true;
                }
                double x;
                if (!parse_double(v, x)) return false;
                c.*m = x;
                return true;
            },
            [m](const ExperimentConfig& c) { return (c.*m) ? json(*(c.*m)) : json(nullptr); }};
}

Field string_field(const std::string& key, std::string ExperimentConfig::*m)
{
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                c.*m = v;
                return true;
            },
            [m](const ExperimentConfig& c) { return json(c.*m); }};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> f = {
        string_field("schema", &ExperimentConfig::schema),
        int_field("a", &ExperimentConfig::a),
        int_field("b", &ExperimentConfig::b),
        int_field("c", &ExperimentConfig::c),
        int_field("d", &ExperimentConfig::d),
        int_field("E", &ExperimentConfig::E),
        {"modes",
         [](ExperimentConfig& c, const std::string& v) {
             auto m = parse_mode_list(v);
             if (!m) return false;
             c.modes = *m;
             return true;
         },
         [](const ExperimentConfig& c) { return json(c.modes); }},
        string_field("method", &ExperimentConfig::method),
        int_field("bands", &ExperimentConfig::bands),
        int_field("cutoff", &ExperimentConfig::cutoff),
        real_field("r", &ExperimentConfig::r),
        real_field("band_tol", &ExperimentConfig::band_tol),
        int_field("grid", &ExperimentConfig::grid),
        int_field("quad_order", &ExperimentConfig::quad_order),
        real_field("quad_panel", &ExperimentConfig::quad_panel),
        real_field("tol", &ExperimentConfig::tol),
        real_field("t_min", &ExperimentConfig::t_min),
        real_field("t_max", &ExperimentConfig::t_max),
        int_field("t_points", &ExperimentConfig::t_points),
        opt_field("fit_from", &ExperimentConfig::fit_from),
        real_field("base_x", &ExperimentConfig::base_x),
        real_field("base_y", &ExperimentConfig::base_y),
        real_field("base_z", &ExperimentConfig::base_z),
        string_field("observable", &ExperimentConfig::observable),
        {"seed", [](ExperimentConfig& c, const std::string& v) { return parse_int(v, c.seed); },
         // as a string so that 64-bit seeds survive JSON readers that use doubles
         [](const ExperimentConfig& c) { return json(std::to_string(c.seed)); }},
        int_field("samples", &ExperimentConfig::samples),
        int_field("sites", &ExperimentConfig::sites),
        int_field("coh_kmax", &ExperimentConfig::coh_kmax),
        real_field("coh_tol", &ExperimentConfig::coh_tol),
        int_field("verify_samples", &ExperimentConfig::verify_samples),
        real_field("verify_tol", &ExperimentConfig::verify_tol),
        string_field("expect_verdict", &ExperimentConfig::expect_verdict),
        int_field("norm_nmax", &ExperimentConfig::norm_nmax),
        real_field("norm_width", &ExperimentConfig::norm_width),
        int_field("norm_y_points", &ExperimentConfig::norm_y_points),
        opt_field("expect_slope_lo", &ExperimentConfig::expect_slope_lo),
        opt_field("expect_slope_hi", &ExperimentConfig::expect_slope_hi),
        opt_field("expect_r2", &ExperimentConfig::expect_r2),
        string_field("out", &ExperimentConfig::out),
        int_field("jobs", &ExperimentConfig::jobs),
    };
    return f;
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

std::optional<std::vector<int>> parse_mode_list(const std::string& s)
{
    std::vector<int> out;
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        int lo, hi;
        if (!parse_int(trim(s.substr(0, dots)), lo) || !parse_int(trim(s.substr(dots + 2)), hi) || hi < lo)
            return std::nullopt;
        if (hi - lo > 10000) return std::nullopt;
        for (int n = lo; n <= hi; ++n) out.push_back(n);
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int n;
        if (!parse_int(trim(item), n)) return std::nullopt;
        out.push_back(n);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::optional<ConfigError> set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    for (const auto& f : fields()) {
        if (f.key != key) continue;
        if (!f.set(cfg, value)) return ConfigError{key, "cannot parse value '" + value + "'"};
        return std::nullopt;
    }
    return ConfigError{key, "unknown key"};
}

std::vector<ConfigError> parse_config(const std::string& text, ExperimentConfig& cfg)
{
    std::vector<ConfigError> errors;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    bool saw_schema = false;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back({"line " + std::to_string(lineno), "expected key = value"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        if (key == "schema") saw_schema = true;
        if (auto e = set_config_value(cfg, key, trim(line.substr(eq + 1)))) errors.push_back(*e);
    }
    if (!saw_schema) errors.push_back({"schema", "missing; expected " + std::string(kSchemaVersion)});
    return errors;
}

std::vector<ConfigError> validate_config(const ExperimentConfig& cfg, const std::string& command)
{
    std::vector<ConfigError> e;
    auto need = [&](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) e.push_back({field, msg});
    };
    need(cfg.schema == kSchemaVersion, "schema", "unsupported schema '" + cfg.schema + "', expected " + kSchemaVersion);
    const IntMat2 M{cfg.a, cfg.b, cfg.c, cfg.d};
    need(M.det() == 1, "matrix", "determinant must be 1, got " + std::to_string(M.det()));
    need(M.trace() > 2, "matrix", "trace must exceed 2, got " + std::to_string(M.trace()));
    need(cfg.E >= 1, "E", "must be at least 1");
    if (M.det() == 1 && cfg.E >= 1)
        need(preserves_lattice(M, LatticeSpec{cfg.E}), "E",
             "the matrix does not preserve the lattice at E = " + std::to_string(cfg.E));
    need(!cfg.modes.empty(), "modes", "must not be empty");
    need(cfg.method == "exact" || cfg.method == "numeric" || cfg.method == "both", "method",
         "must be exact, numeric or both");
    need(cfg.bands >= 1, "bands", "must be at least 1");
    need(cfg.cutoff >= 1, "cutoff", "must be at least 1");
    need(cfg.r > 1.0, "r", "must exceed 1");
    need(cfg.band_tol > 0.0 && cfg.band_tol < 0.5, "band_tol", "must lie in (0, 0.5)");
    need(cfg.grid >= 0, "grid", "must be nonnegative (0 = automatic)");
    need(cfg.quad_order >= 4 && cfg.quad_order <= 64, "quad_order", "must lie in [4, 64]");
    need(cfg.quad_panel > 0.0, "quad_panel", "must be positive");
    need(cfg.tol > 0.0, "tol", "must be positive");
    need(cfg.t_min > 0.0, "t_min", "must be positive");
    need(cfg.t_max > cfg.t_min, "t_max", "must exceed t_min");
    need(cfg.t_points >= 8, "t_points", "must be at least 8");
    if (cfg.fit_from) need(*cfg.fit_from >= cfg.t_min && *cfg.fit_from < cfg.t_max, "fit_from", "must lie in [t_min, t_max)");
    need(cfg.samples >= 1, "samples", "must be at least 1");
    need(cfg.sites >= 1 && cfg.sites <= 64, "sites", "must lie in [1, 64]");
    need(cfg.coh_kmax >= 0, "coh_kmax", "must be nonnegative");
    need(cfg.coh_tol > 0.0, "coh_tol", "must be positive");
    need(cfg.verify_samples >= 0, "verify_samples", "must be nonnegative");
    need(cfg.verify_tol > 0.0, "verify_tol", "must be positive");
    need(cfg.expect_verdict == "converged" || cfg.expect_verdict == "diverged" || cfg.expect_verdict == "any",
         "expect_verdict", "must be converged, diverged or any");
    need(cfg.norm_nmax >= 2, "norm_nmax", "must be at least 2");
    need(cfg.norm_width > 0.0, "norm_width", "must be positive");
    need(cfg.norm_y_points == 0 || cfg.norm_y_points >= 2, "norm_y_points", "must be 0 or at least 2");
    need(!cfg.out.empty(), "out", "must not be empty");
    need(cfg.jobs >= 1, "jobs", "must be at least 1");

    if (command == "spectrum") {
        for (int n : cfg.modes)
            need(n != 0, "modes",
                 "N = 0 has no twisted spectrum: the action on constants is the single eigenvalue lambda of "
                 "the weighted operator");
        if (cfg.method != "numeric") need(parity_condition(M), "matrix", "exact propagator needs ab = cd = 0 mod 2");
    }
    if (command == "deviation" || command == "cohomology")
        need(!cfg.observable.empty(), "observable", "an observable file is required");
    return e;
}

std::string config_to_json(const ExperimentConfig& cfg, int indent)
{
    json j = json::object();
    for (const auto& f : fields()) j[f.key] = f.get(cfg);
    return j.dump(indent);
}

std::string config_hash(const ExperimentConfig& cfg)
{
    json j = json::object();
    for (const auto& f : fields())
        if (f.key != "out" && f.key != "jobs") j[f.key] = f.get(cfg);
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string errors_to_json(const std::vector<ConfigError>& errors)
{
    json j;
    j["schema"] = kSchemaVersion;
    j["errors"] = json::array();
    for (const auto& e : errors) j["errors"].push_back({{"field", e.field}, {"message", e.message}});
    return j.dump(2);
}

void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename into " + path + ": " + ec.message());
    }
}

AlgebraDefects group_algebra_defects(const Automorphism& A, const LatticeSpec& L, std::uint64_t seed, int n)
{
    CounterRng rng(seed, 1);
    auto point = [&] { return HeisPoint{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)}; };
    AlgebraDefects out;
    for (int i = 0; i < n; ++i) {
        const HeisPoint g = point(), h = point(), k = point();
        out.associativity = std::max(out.associativity, max_abs_diff(mul(mul(g, h), k), mul(g, mul(h, k))));
        out.inverse = std::max(out.inverse, std::max(max_abs_diff(mul(g, inverse(g)), HeisPoint{}),
                                                     max_abs_diff(mul(inverse(g), g), HeisPoint{})));
        const HeisPoint r1 = reduce(g, L).rep;
        out.reduction = std::max(out.reduction, max_abs_diff(reduce(r1, L).rep, r1));
        const double s = rng.uniform(-10, 10), t = rng.uniform(-10, 10);
        out.semigroup = std::max(out.semigroup, max_abs_diff(flow(flow(g, s, A), t, A), flow(g, s + t, A)));
    }
    return out;
}

double partition_sum_defect(double T, int n, int points)
{
    const ZoomPartition P(T, n);
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        const double t = T * i / (points - 1);
        double s = 0.0;
        for (int k = -n; k <= n; ++k) s += P.phi(k, t);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

double renorm_identity_defect(const Automorphism& A, const LatticeSpec& L, std::uint64_t seed, int samples)
{
    CounterRng rng(seed, 2);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const HeisPoint x{rng.uniform(), rng.uniform(), rng.uniform()};
        const double t = rng.uniform(-10, 10);
        const HeisPoint lhs = apply_aut(A, flow(x, A.lambda * t, A));
        const HeisPoint rhs = flow(apply_aut(A, x), t, A);
        worst = std::max(worst, quotient_distance(lhs, rhs, L));
    }
    return worst;
}

} // namespace nilab
