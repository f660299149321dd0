#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nilab/heis.hpp"

namespace nilab {

inline constexpr const char* kSchemaVersion = "nilab-config/1";
inline constexpr const char* kArtifactVersion = "0.1.0";

// Flat key = value experiment description. Every field has a default; see config_keys().
struct ExperimentConfig {
    std::string schema = kSchemaVersion;
    std::int64_t a = 2, b = 1, c = 3, d = 2;
    int E = 1;
    std::vector<int> modes = {1};
    std::string method = "exact";   // exact | numeric | both
    int bands = 4;
    int cutoff = 32;
    double r = 8.0;
    double band_tol = 0.15;
    int grid = 0;
    int quad_order = 16;
    double quad_panel = 0.25;
    double tol = 1e-10;
    double t_min = 100.0;
    double t_max = 1e5;
    int t_points = 31;
    std::optional<double> fit_from;
    double base_x = 0.0, base_y = 0.0, base_z = 0.0;
    std::string observable;
    std::uint64_t seed = 1;
    int samples = 1000;
    int sites = 16;
    int coh_kmax = 12;
    double coh_tol = 1e-3;
    int verify_samples = 50;
    double verify_tol = 1e-5;
    std::string expect_verdict = "converged";   // converged | diverged | any
    int norm_nmax = 8;
    double norm_width = 0.25;
    int norm_y_points = 0;   // 0 picks a resolving grid
    std::optional<double> expect_slope_lo, expect_slope_hi, expect_r2;
    std::string out = "out";
    int jobs = 1;
};

struct ConfigError {
    std::string field;
    std::string message;
};

// Names of all recognised keys, in canonical order.
const std::vector<std::string>& config_keys();

// Applies one assignment; a bad value or unknown key yields an error naming the field.
std::optional<ConfigError> set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Parses "key = value" lines, '#' starts a comment. Errors are collected, not thrown.
std::vector<ConfigError> parse_config(const std::string& text, ExperimentConfig& cfg);

// Field-level checks plus those needed by the given command ("" checks only the common ones).
std::vector<ConfigError> validate_config(const ExperimentConfig& cfg, const std::string& command);

// "1..6" or "1,2,5"
std::optional<std::vector<int>> parse_mode_list(const std::string& s);

// Canonical JSON echo with every default filled in.
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);

// FNV-1a 64 of the canonical echo without out and jobs, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string errors_to_json(const std::vector<ConfigError>& errors);

// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::string& path, const std::string& content);

// Largest defect of each group/flow identity over n seeded random cases.
struct AlgebraDefects {
    double associativity = 0.0;
    double inverse = 0.0;
    double reduction = 0.0;
    double semigroup = 0.0;
};
AlgebraDefects group_algebra_defects(const Automorphism& A, const LatticeSpec& L, std::uint64_t seed, int n);

// max |sum_k phi_k - 1| over a uniform grid of [0,T]
double partition_sum_defect(double T, int n, int points);

// max quotient distance between F(flow(x, lambda t)) and flow(F x, t), t in [-10,10]
double renorm_identity_defect(const Automorphism& A, const LatticeSpec& L, std::uint64_t seed, int samples);

} // namespace nilab
