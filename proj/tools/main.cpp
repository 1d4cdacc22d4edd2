// memfpk command line: one subcommand per pipeline stage.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memfpk/errors.hpp"
#include "memfpk/fgn.hpp"
#include "memfpk/pdf_grid.hpp"
#include "memfpk/pipeline.hpp"

using namespace memfpk;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string scale = "desk";
    bool quiet = false;
};

void add_common(CLI::App* sub, Common& c, bool need_config) {
    auto* opt = sub->add_option("--config", c.config, "run configuration (JSON)");
    if (need_config) opt->required();
    sub->add_option("--out", c.out, "output directory (overrides the config)");
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--threads", c.threads, "worker cap, 0 = all cores");
    sub->add_option("--scale", c.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    sub->add_flag("-q,--quiet", c.quiet, "no progress lines");
}

StageOptions stage_options(const Common& c) {
    StageOptions o;
    o.threads = c.threads;
    if (!c.out.empty()) o.out = c.out;
    o.seed = c.seed;
    o.log = c.quiet ? nullptr : &std::cerr;
    return o;
}

RunConfig load(const Common& c, const StageOptions& o) {
    RunConfig cfg = load_config(c.config, c.scale);
    apply_overrides(cfg, o);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memory-dependent FPK solver for 2D systems under fractional Gaussian noise"};
    app.require_subcommand(1);
    Common c;

    auto* sim = app.add_subcommand("simulate", "simulate the path ensemble with Malliavin values");
    auto* est = app.add_subcommand("estimate", "estimate FPK coefficients from the ensemble");
    auto* sol = app.add_subcommand("solve", "solve the FPK equation on the grid");
    auto* ana = app.add_subcommand("analytic", "Gaussian reference for the linear oscillator");
    auto* cmp = app.add_subcommand("compare", "compare solve output with the reference, or two grid files");
    for (auto* s : {sim, est, sol, ana}) add_common(s, c, true);
    add_common(cmp, c, false);
    std::vector<std::string> files;
    double threshold = 1e-8;
    cmp->add_option("files", files, "two grid files (csv or bin)")->expected(2);
    cmp->add_option("--threshold", threshold, "density floor for the log-tail metric");

    auto* rep = app.add_subcommand("reproduce", "run one of the shipped examples end to end");
    std::string example;
    std::string configs;
    rep->add_option("example", example, "ex1, ex2, ex3 or ex4")->required();
    rep->add_option("--configs", configs, "directory holding ex*.json");
    add_common(rep, c, false);

    auto* fgn_cmd = app.add_subcommand("fgn", "print one fractional Gaussian noise path");
    double hurst = 0.75, dt = 1e-3;
    std::size_t n = 1000;
    std::uint64_t fseed = 1;
    fgn_cmd->add_option("--hurst", hurst, "Hurst index, 1/2 gives white noise")->required();
    fgn_cmd->add_option("--dt", dt, "time step");
    fgn_cmd->add_option("--n", n, "number of increments");
    fgn_cmd->add_option("--seed", fseed, "seed");

    CLI11_PARSE(app, argc, argv);

    try {
        const StageOptions o = stage_options(c);
        if (sim->parsed()) {
            cmd_simulate(load(c, o), o);
        } else if (est->parsed()) {
            cmd_estimate(load(c, o), o);
        } else if (sol->parsed()) {
            cmd_solve(load(c, o), o);
        } else if (ana->parsed()) {
            cmd_analytic(load(c, o), o);
        } else if (cmp->parsed()) {
            if (!files.empty()) {
                std::cout << compare_files(files[0], files[1], threshold).dump(2) << '\n';
            } else if (!c.config.empty()) {
                std::cout << cmd_compare(load(c, o), o).dump(2) << '\n';
            } else {
                throw ConfigError("compare: give --config or two grid files");
            }
        } else if (rep->parsed()) {
            const auto dir = configs.empty() ? default_config_dir() : std::filesystem::path(configs);
            const auto r = cmd_reproduce(example, c.scale, dir, o);
            if (r.contains("metrics")) std::cout << r["metrics"].dump(2) << '\n';
        } else if (fgn_cmd->parsed()) {
            const auto inc = fgn::sample_path({hurst, dt, n, fseed});
            for (double v : inc.values) std::printf("%.17g\n", v);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
