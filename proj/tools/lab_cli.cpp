#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nilab/bargmann.hpp"
#include "nilab/cohomology.hpp"
#include "nilab/ergodic.hpp"
#include "nilab/heis.hpp"
#include "nilab/lab.hpp"
#include "nilab/observables.hpp"
#include "nilab/parallel.hpp"
#include "nilab/rng.hpp"
#include "nilab/spectral.hpp"

using namespace nilab;
using json = nlohmann::json;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    std::vector<ConfigError> errors;
    explicit UsageError(std::vector<ConfigError> e) : std::runtime_error("config error"), errors(std::move(e)) {}
    UsageError(const std::string& field, const std::string& msg) : UsageError(std::vector<ConfigError>{{field, msg}}) {}
};

struct Run {
    ExperimentConfig cfg;
    std::string command;
    std::string hash;
    json payload = json::object();
    json checks = json::array();
    std::vector<std::string> files;

    Automorphism A() const { return stable_generator(cfg.a, cfg.b, cfg.c, cfg.d); }
    LatticeSpec L() const { return LatticeSpec{cfg.E}; }
    QuadratureSpec quad() const
    {
        QuadratureSpec q;
        q.order = cfg.quad_order;
        q.panel = cfg.quad_panel;
        q.tol = cfg.tol;
        return q;
    }
    std::string path(const std::string& name) const { return cfg.out + "/" + name; }

    void check(const std::string& name, bool pass, const std::string& detail)
    {
        checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    }
    std::string csv_head(const std::string& columns) const
    {
        return "# schema=" + std::string(kSchemaVersion) + " config_hash=" + hash + "\n" + columns + "\n";
    }
    void write(const std::string& name, const std::string& content)
    {
        write_atomic(path(name), content);
        files.push_back(name);
    }
    void write_json(const std::string& name, json j)
    {
        j["schema"] = kSchemaVersion;
        j["config_hash"] = hash;
        write(name, j.dump(2) + "\n");
    }
};

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Observable load_observable_checked(const Run& run)
{
    try {
        return load_observable(run.cfg.observable);
    } catch (const std::exception& e) {
        throw UsageError("observable", e.what());
    }
}

// ---- selftest

void cmd_selftest(Run& run)
{
    const auto A = run.A();
    const auto d = group_algebra_defects(A, run.L(), run.cfg.seed, 10000);
    run.payload["algebra"] = {{"cases", 10000},
                              {"associativity", d.associativity},
                              {"inverse", d.inverse},
                              {"reduction", d.reduction},
                              {"semigroup", d.semigroup}};
    run.check("associativity", d.associativity < 1e-12, fmt("%.3e", d.associativity));
    run.check("inverse", d.inverse < 1e-12, fmt("%.3e", d.inverse));
    run.check("reduction_idempotent", d.reduction < 1e-12, fmt("%.3e", d.reduction));
    run.check("flow_semigroup", d.semigroup < 1e-12, fmt("%.3e", d.semigroup));
    json parts = json::array();
    for (auto [T, n] : std::vector<std::pair<double, int>>{{64.0, 3}, {1e3, 4}, {1e6, 9}}) {
        const double def = partition_sum_defect(T, n, 10000);
        parts.push_back({{"T", T}, {"n", n}, {"sum_defect", def}});
        run.check("partition_sum T=" + num(T), def < 1e-12, fmt("%.3e", def));
    }
    run.payload["partition"] = parts;
}

// ---- spectrum

void write_spectrum_csv(Run& run, const std::string& name, int N, const ResonanceSet& rs)
{
    std::string s = run.csv_head("N,E,source,band,re,im,modulus,phase,multiplicity");
    for (const auto& r : rs.items)
        s += std::to_string(N) + "," + std::to_string(run.cfg.E) + "," + to_string(rs.source) + "," +
             std::to_string(r.band) + "," + num(r.value.real()) + "," + num(r.value.imag()) + "," + num(r.modulus) +
             "," + num(r.phase) + "," + std::to_string(r.multiplicity) + "\n";
    run.write(name, s);
}

void cmd_spectrum(Run& run)
{
    const auto A = run.A();
    const auto& cfg = run.cfg;
    const bool want_exact = cfg.method != "numeric", want_numeric = cfg.method != "exact";
    const std::size_t nm = cfg.modes.size();
    std::vector<ResonanceSet> exact(nm), numeric(nm);
    parallel_for(nm, cfg.jobs, [&](std::size_t i) {
        const int N = cfg.modes[i];
        const int D = cfg.E * std::abs(N);
        if (want_exact) exact[i] = resonances_exact(A, N, cfg.E, cfg.bands - 1);
        if (want_numeric) {
            const auto M = transfer_matrix(A, N, cfg.E, build_basis(D, cfg.cutoff), cfg.r, cfg.grid);
            numeric[i] = resonances_numeric(M, cfg.band_tol);
        }
    });
    json per = json::array();
    for (std::size_t i = 0; i < nm; ++i) {
        const int N = cfg.modes[i];
        const int D = cfg.E * std::abs(N);
        json jn = {{"N", N}, {"D", D}};
        if (want_exact) {
            write_spectrum_csv(run, "spectrum_N" + std::to_string(N) + "_exact.csv", N, exact[i]);
            json counts = json::array();
            bool ok = true;
            for (int k = 0; k < cfg.bands; ++k) {
                counts.push_back(exact[i].count_in_band(k));
                ok = ok && exact[i].count_in_band(k) == D;
            }
            jn["exact_band_counts"] = counts;
            run.check("exact_band_counts N=" + std::to_string(N), ok, "expected " + std::to_string(D) + " per band");
        }
        if (want_numeric) {
            write_spectrum_csv(run, "spectrum_N" + std::to_string(N) + "_numeric.csv", N, numeric[i]);
            const int c0 = numeric[i].count_in_band(0);
            jn["numeric_band0_count"] = c0;
            jn["numeric_unassigned_fraction"] = numeric[i].unassigned_fraction();
            run.check("numeric_band0_count N=" + std::to_string(N), c0 == D,
                      std::to_string(c0) + " vs " + std::to_string(D));
        }
        if (want_exact && want_numeric) {
            const auto cmp = compare_band(exact[i], numeric[i], 0);
            jn["comparison"] = {{"band", 0},
                                {"count_exact", cmp.count_ref},
                                {"count_numeric", cmp.count_other},
                                {"max_modulus_rel", cmp.max_modulus_rel},
                                {"max_phase", cmp.max_phase}};
            run.check("band0_agreement N=" + std::to_string(N), cmp.max_modulus_rel < 0.05 && cmp.max_phase < 0.05,
                      "modulus " + fmt("%.3e", cmp.max_modulus_rel) + ", phase " + fmt("%.3e", cmp.max_phase));
        }
        per.push_back(jn);
    }
    run.payload["modes"] = per;
    if (want_exact && want_numeric) {
        json cmp = json::array();
        for (const auto& jn : per) cmp.push_back({{"N", jn["N"]}, {"comparison", jn["comparison"]}});
        run.write_json("spectrum_comparison.json", {{"modes", cmp}});
    }
}

// ---- deviation

void cmd_deviation(Run& run)
{
    const auto& cfg = run.cfg;
    const Observable h = load_observable_checked(run);
    const HeisPoint x{cfg.base_x, cfg.base_y, cfg.base_z};
    const auto grid = geometric_grid(cfg.t_min, cfg.t_max, cfg.t_points);
    const auto fit = deviation_fit(h, run.A(), x, grid, run.quad(), true, cfg.fit_from.value_or(cfg.t_min));
    std::string s = run.csv_head("t,H_re,H_im,H_abs,k_used,evals");
    for (const auto& p : fit.samples)
        s += num(p.t) + "," + num(p.H.real()) + "," + num(p.H.imag()) + "," + num(std::abs(p.H)) + "," +
             std::to_string(p.k) + "," + std::to_string(p.evals) + "\n";
    run.write("deviation.csv", s);
    const json jf = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r_squared},
                     {"t_min", fit.t_min}, {"t_max", fit.t_max}};
    run.write_json("deviation_fit.json", jf);
    run.payload["fit"] = jf;
    run.check("fit_finite", std::isfinite(fit.slope) && std::isfinite(fit.r_squared), fmt("slope %.4f", fit.slope));
    if (cfg.expect_slope_lo)
        run.check("slope_lo", fit.slope >= *cfg.expect_slope_lo, fmt("%.4f", fit.slope) + " >= " + fmt("%g", *cfg.expect_slope_lo));
    if (cfg.expect_slope_hi)
        run.check("slope_hi", fit.slope <= *cfg.expect_slope_hi, fmt("%.4f", fit.slope) + " <= " + fmt("%g", *cfg.expect_slope_hi));
    if (cfg.expect_r2)
        run.check("r2", fit.r_squared >= *cfg.expect_r2, fmt("%.4f", fit.r_squared) + " >= " + fmt("%g", *cfg.expect_r2));
}

// ---- cohomology

void cmd_cohomology(Run& run)
{
    const auto& cfg = run.cfg;
    const Observable h = load_observable_checked(run);
    if (std::abs(mean(h)) > 1e-12) throw UsageError("observable", "mean is nonzero; the constant is an obstruction");
    const auto A = run.A();
    const auto q = run.quad();
    const BumpPair bp(A.lambda);
    std::vector<HeisPoint> sites;
    const int n = cfg.sites;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) sites.push_back({(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n});
    const auto sol = solve(h, A, sites, cfg.coh_kmax, cfg.coh_tol, bp, q, cfg.jobs);

    std::string s = run.csv_head("x,y,z,g_re,g_im");
    for (std::size_t i = 0; i < sites.size(); ++i)
        s += num(sites[i].x) + "," + num(sites[i].y) + "," + num(sites[i].z) + "," + num(sol.g_values[i].real()) + "," +
             num(sol.g_values[i].imag()) + "\n";
    run.write("cohomology_solution.csv", s);

    double residual = 0.0;
    const bool verify = sol.verdict == Verdict::converged && cfg.verify_samples > 0;
    if (verify) {
        CounterRng rng(cfg.seed, 3);
        const double ts[3] = {0.1, 1.0, 10.0};
        std::vector<FlowSample> fs;
        for (int i = 0; i < cfg.verify_samples; ++i) {
            const HeisPoint x{rng.uniform(), rng.uniform(), rng.uniform()};
            fs.push_back({x, ts[i % 3]});
        }
        // each sample is its own verification; per-slot results keep the max independent of scheduling
        std::vector<double> per(fs.size(), 0.0);
        parallel_for(fs.size(), cfg.jobs, [&](std::size_t i) {
            auto g = [&](const HeisPoint& p) { return solve_point(h, A, p, cfg.coh_kmax, cfg.coh_tol, bp, q); };
            per[i] = verify_coboundary(g, h, A, {fs[i]}, q);
        });
        for (double v : per) residual = std::max(residual, v);
    }
    const json diag = {{"terms", sol.term_history},
                       {"verdict", to_string(sol.verdict)},
                       {"ratio", sol.ratio},
                       {"kmax_used", sol.kmax_used},
                       {"residual_max", verify ? json(residual) : json(nullptr)}};
    run.write_json("cohomology_diagnostics.json", diag);
    run.payload["diagnostics"] = diag;
    run.payload["sites"] = sites.size();
    if (cfg.expect_verdict != "any")
        run.check("verdict", to_string(sol.verdict) == cfg.expect_verdict,
                  to_string(sol.verdict) + ", expected " + cfg.expect_verdict);
    if (verify) run.check("residual", residual <= cfg.verify_tol, fmt("%.3e", residual) + " <= " + fmt("%g", cfg.verify_tol));
    if (sol.verdict == Verdict::converged) run.check("geometric_ratio", sol.ratio < 0.95, fmt("%.4f", sol.ratio));
}

// ---- renorm-verify

void cmd_renorm(Run& run)
{
    const double d = renorm_identity_defect(run.A(), run.L(), run.cfg.seed, run.cfg.samples);
    run.payload["samples"] = run.cfg.samples;
    run.payload["max_quotient_distance"] = d;
    run.check("renormalization_identity", d < 1e-9, fmt("%.3e", d) + " < 1e-9");
}

// ---- norm

NormSettings settings_for(const ExperimentConfig& cfg, int N)
{
    NormSettings s = default_norm_settings(N, cfg.r);
    if (cfg.norm_y_points > 0) s.y.n = cfg.norm_y_points;
    return s;
}

void cmd_norm(Run& run)
{
    const auto& cfg = run.cfg;
    const auto A = run.A();
    const LatticeSpec L = run.L();
    std::vector<ModeObservable> family;
    const bool from_file = !cfg.observable.empty();
    if (from_file) {
        const Observable h = load_observable_checked(run);
        for (const auto& m : h.modes)
            if (m.N != 0) family.push_back(m);
        if (family.empty()) throw UsageError("observable", "no mode with N != 0");
    } else {
        for (int N = 1; N <= cfg.norm_nmax; ++N) family.push_back(smooth_family_member(N, cfg.norm_width));
    }
    // resolution problems are configuration errors; report them before the long loop
    for (const auto& m : family) {
        const auto s = settings_for(cfg, std::abs(m.N));
        try {
            check_resolution(s.y, s.pg, std::abs(m.N));
        } catch (const std::invalid_argument& e) {
            throw UsageError("norm_y_points", e.what());
        }
    }
    std::vector<PairingReport> rep(family.size());
    parallel_for(family.size(), cfg.jobs, [&](std::size_t i) {
        const auto s = settings_for(cfg, std::abs(family[i].N));
        rep[i] = dual_pairing_bound(family[i], L, A, chart_segment_start(A, s), unit_segment_window(), s);
    });
    std::string nt = run.csv_head("N,norm");
    std::string pt = run.csv_head("N,pairing_re,pairing_im,norm,phi_norm,ratio");
    json rows = json::array();
    double max_ratio = 0.0;
    bool finite = true, decreasing = true;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto& r = rep[i];
        nt += std::to_string(family[i].N) + "," + num(r.norm) + "\n";
        pt += std::to_string(family[i].N) + "," + num(r.pairing.real()) + "," + num(r.pairing.imag()) + "," +
              num(r.norm) + "," + num(r.phi_norm) + "," + num(r.ratio) + "\n";
        rows.push_back({{"N", family[i].N}, {"norm", r.norm}, {"ratio", r.ratio}});
        finite = finite && std::isfinite(r.norm) && r.norm > 0.0 && std::isfinite(r.ratio);
        if (i > 0 && !(r.norm < rep[i - 1].norm)) decreasing = false;
        max_ratio = std::max(max_ratio, r.ratio);
    }
    run.write("norm_table.csv", nt);
    run.write("pairing_table.csv", pt);
    run.payload["rows"] = rows;
    run.payload["max_ratio"] = max_ratio;
    run.payload["family"] = from_file ? cfg.observable : "smooth width " + num(cfg.norm_width);
    run.check("norms_finite", finite, std::to_string(family.size()) + " modes");
    if (!from_file) {
        run.check("norms_decreasing", decreasing, "N = 1.." + std::to_string(cfg.norm_nmax));
        const double lim = 10.0 * rep[0].ratio;
        run.check("pairing_ratio_bound", max_ratio < lim,
                  "max " + fmt("%.3e", max_ratio) + " vs 10 x N=1 ratio " + fmt("%.3e", lim));
    }
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw UsageError("config", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Common {
    std::string config_path;
    std::string out;
    std::string seed;
    std::string jobs;
    std::string tol, method, modes, tmax, samples, observable;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config_path, "key = value config file");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "64-bit seed");
    sub->add_option("--jobs", c.jobs, "worker threads");
    sub->add_option("--set", c.sets, "extra key=value override (repeatable)");
}

ExperimentConfig build_config(const Common& c, const std::string& command)
{
    ExperimentConfig cfg;
    std::vector<ConfigError> errors;
    if (!c.config_path.empty()) {
        errors = parse_config(read_file(c.config_path), cfg);
        // observable paths in a config file are relative to that file
        const std::filesystem::path obs(cfg.observable);
        if (!cfg.observable.empty() && obs.is_relative())
            cfg.observable = (std::filesystem::path(c.config_path).parent_path() / obs).lexically_normal().string();
    }
    auto over = [&](const std::string& key, const std::string& v) {
        if (v.empty()) return;
        if (auto e = set_config_value(cfg, key, v)) errors.push_back(*e);
    };
    over("out", c.out);
    over("seed", c.seed);
    over("jobs", c.jobs);
    over("tol", c.tol);
    over("method", c.method);
    over("modes", c.modes);
    over("t_max", c.tmax);
    over("samples", c.samples);
    over("observable", c.observable);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            errors.push_back({kv, "--set expects key=value"});
            continue;
        }
        over(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (errors.empty()) errors = validate_config(cfg, command);
    if (!errors.empty()) throw UsageError(errors);
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Heisenberg nilflow renormalization lab"};
    app.require_subcommand(1);
    Common common;
    struct Cmd {
        std::string name;
        std::string help;
        void (*fn)(Run&);
    };
    const std::vector<Cmd> cmds = {
        {"selftest", "group, flow and partition invariant suites", cmd_selftest},
        {"spectrum", "exact and/or numeric resonance spectra per fibre mode", cmd_spectrum},
        {"deviation", "ergodic integral growth and power-law fit", cmd_deviation},
        {"cohomology", "pointwise coboundary solve with verification", cmd_cohomology},
        {"renorm-verify", "renormalization identity on random samples", cmd_renorm},
        {"norm", "anisotropic norms and dual pairing ratios", cmd_norm},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, common);
        subs.push_back(sub);
    }
    subs[0]->add_option("--tol", common.tol, "quadrature tolerance");
    subs[1]->add_option("--method", common.method, "exact, numeric or both");
    subs[1]->add_option("--N", common.modes, "mode list, e.g. 1..6 or 1,2");
    subs[2]->add_option("--observable", common.observable, "observable JSON file");
    subs[2]->add_option("--tmax", common.tmax, "largest time");
    subs[2]->add_option("--tol", common.tol, "quadrature tolerance");
    subs[3]->add_option("--observable", common.observable, "observable JSON file");
    subs[3]->add_option("--tol", common.tol, "quadrature tolerance");
    subs[4]->add_option("--samples", common.samples, "random samples");
    subs[5]->add_option("--observable", common.observable, "observable JSON file (default: smooth family)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    std::size_t which = 0;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) which = i;
    const std::string command = cmds[which].name;

    Run run;
    run.command = command;
    try {
        run.cfg = build_config(common, command);
        run.hash = config_hash(run.cfg);
        const auto t0 = std::chrono::steady_clock::now();
        cmds[which].fn(run);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        bool all = true;
        for (const auto& c : run.checks) all = all && c["pass"].get<bool>();
        json env;
        env["schema"] = kSchemaVersion;
        env["artifact_version"] = kArtifactVersion;
        env["command"] = command;
        env["config"] = json::parse(config_to_json(run.cfg));
        env["config_hash"] = run.hash;
        env["wall_clock_s"] = wall;
        env["payload"] = run.payload;
        env["checks"] = run.checks;
        env["all_pass"] = all;
        env["files"] = run.files;
        write_atomic(run.path(command + "_envelope.json"), env.dump(2) + "\n");

        for (const auto& c : run.checks)
            std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "  "
                      << c["detail"].get<std::string>() << "\n";
        std::cout << command << ": " << (all ? "all checks pass" : "some checks failed") << ", envelope "
                  << run.path(command + "_envelope.json") << "\n";
        return all ? kOk : kCheckFailed;
    } catch (const UsageError& e) {
        std::cerr << errors_to_json(e.errors) << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << errors_to_json({{"runtime", e.what()}}) << "\n";
        return kUsage;
    }
}
