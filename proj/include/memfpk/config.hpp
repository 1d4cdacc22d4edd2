#pragma once

// Run configuration: one JSON document per experiment.
//
//   {
//     "name": "ex2",
//     "model":  {"name": "duffing", "params": {...}, "sigma": [s1, s2],
//                "hurst": [H1, H2], "init": {"mean": [m1, m2], "var": v0}},
//     "sim":    {"dt", "t_end", "n_samples", "snapshot_stride", "seed", "kernel_rule"},
//     "dlmm":   {"domain": [lo1, hi1, lo2, hi2], "bins": [n1, n2], "radius",
//                "interpolation": "linear" | "cubic", "mirror"},
//     "solver": {"domain", "spacing": [d1, d2], "dt", "t_end",
//                "coefficients": "analytic" | "gwn" | "dlmm", "substeps",
//                "clamp", "renormalize", "upwind"},
//     "outputs": {"dir", "formats": ["csv", "bin", "gnuplot"], "report_times": [...]},
//     "reference": {"kind": "none" | "analytic" | "mcs", "n_samples", "seed", "threshold"},
//     "paper": { ...merge patch applied for --scale paper... }
//   }
//
// Every block except "model" has defaults. Errors name the offending field.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfpk/dlmm.hpp"
#include "memfpk/model.hpp"
#include "memfpk/path_simulator.hpp"
#include "memfpk/solver.hpp"

namespace memfpk {

struct ModelBlock {
    std::string name;
    ParamMap params;  // model coefficients only
    Vec2 sigma{0.0, 1.0};
    Vec2 hurst{0.75, 0.75};
    GaussianInit init;
};

struct SimBlock {
    SimGrid grid;
    std::size_t n_samples = 2000;
    std::uint64_t seed = 1;
    KernelRule rule = KernelRule::Midpoint;
};

struct DlmmBlock {
    BinGrid grid;
    int radius = 1;
    Interp interp = Interp::Linear;
    bool mirror = false;
};

enum class CoeffKind { Analytic, Gwn, Dlmm };

struct SolverBlock {
    SolverGrid grid;  // report_times filled from outputs.report_times
    SolverOptions opts;
    CoeffKind coefficients = CoeffKind::Analytic;
    std::size_t substeps = 8;
};

struct OutputsBlock {
    std::filesystem::path dir = "out";
    bool csv = true;
    bool bin = false;
    bool gnuplot = false;
};

enum class ReferenceKind { None, Analytic, Mcs };

struct ReferenceBlock {
    ReferenceKind kind = ReferenceKind::None;
    std::size_t n_samples = 100000;
    std::uint64_t seed = 2;
    double threshold = 1e-8;
};

struct RunConfig {
    std::string name;
    nlohmann::json source;  // the document after scale patching and overrides
    ModelBlock model;
    SimBlock sim;
    DlmmBlock dlmm;
    SolverBlock solver;
    OutputsBlock outputs;
    ReferenceBlock reference;

    SystemModel build_model() const;
    /// FNV-1a of the canonical (sorted-key, compact) JSON dump, as 16 hex digits.
    std::string hash() const;
};

/// Parses and validates. Throws ConfigError with the field path on failure.
RunConfig parse_config(const nlohmann::json& doc);

/// Reads a file; `scale` is "desk" (as written) or "paper" (applies the
/// document's "paper" merge patch). Throws MissingInputError if absent.
RunConfig load_config(const std::filesystem::path& path, const std::string& scale = "desk");

std::string coeff_kind_name(CoeffKind k);
std::string kernel_rule_name(KernelRule r);

}  // namespace memfpk
