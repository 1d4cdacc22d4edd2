#pragma once

// Pipeline stages driven by a RunConfig. Everything goes under the output
// directory:
//
//   manifest.json            config hash, seeds, scheme identifiers, build
//   ensemble/                simulate: meta.json + snap_<k>.csv
//   coefficients/            estimate: field.json + coeff_<k>.csv
//   pdf/p_t<time>.{csv,bin,dat}   solve: joint densities at report times
//   marginals/m_t<time>.csv  solve: marginal densities
//   moments.csv              solve: moments at report times
//   solve_log.json           solve: mass, extrema, clamp/renormalisation, CFL
//   analytic/                analytic: summary.csv + p_t<time>.csv
//   reference/               compare (mcs): histograms + sample moments
//   metrics.json             compare: errors against the reference

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "memfpk/config.hpp"

namespace memfpk {

struct StageOptions {
    unsigned threads = 0;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::ostream* log = nullptr;  // progress lines; nullptr silences them
};

/// Applies --out and --seed; the seed override is recorded in the config
/// source so the manifest hash reflects it.
void apply_overrides(RunConfig& cfg, const StageOptions& opts);

void write_manifest(const RunConfig& cfg);

void cmd_simulate(const RunConfig& cfg, const StageOptions& opts);
void cmd_estimate(const RunConfig& cfg, const StageOptions& opts);
/// Returns the solve log that is also written to solve_log.json. Runs the
/// configured comparison when a reference is set.
nlohmann::json cmd_solve(const RunConfig& cfg, const StageOptions& opts);
void cmd_analytic(const RunConfig& cfg, const StageOptions& opts);
/// Compares solve outputs with the configured reference; writes metrics.json.
nlohmann::json cmd_compare(const RunConfig& cfg, const StageOptions& opts);
/// Compares two grid files directly.
nlohmann::json compare_files(const std::filesystem::path& a, const std::filesystem::path& b,
                             double threshold = 1e-8);

/// Loads <configs>/<id>.json at the given scale and runs every stage.
nlohmann::json cmd_reproduce(const std::string& id, const std::string& scale,
                             const std::filesystem::path& configs, const StageOptions& opts);

/// Default location of the committed example configs.
std::filesystem::path default_config_dir();

std::string time_label(double t);

}  // namespace memfpk
