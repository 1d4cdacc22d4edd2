#include "memfpk/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "memfpk/errors.hpp"
#include "memfpk/linear_reference.hpp"
#include "memfpk/response_stats.hpp"

#ifndef MEMFPK_GIT_DESCRIBE
#define MEMFPK_GIT_DESCRIBE "unknown"
#endif
#ifndef MEMFPK_SOURCE_DIR
#define MEMFPK_SOURCE_DIR "."
#endif

namespace memfpk {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

void say(const StageOptions& o, const std::string& msg) {
    if (o.log) *o.log << "[memfpk] " << msg << std::endl;
}

void write_json(const fs::path& path, const ojson& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json moments_json(const Moments& m) {
    return {{"mean", m.mean}, {"std", m.std}, {"skew", m.skew}, {"kurt", m.kurt}};
}

void write_grid(const RunConfig& cfg, const PdfGrid& p, const fs::path& stem) {
    if (cfg.outputs.csv) write_pdf_csv(p, stem.string() + ".csv");
    if (cfg.outputs.bin) write_pdf_binary(p, stem.string() + ".bin");
    if (cfg.outputs.gnuplot) write_pdf_gnuplot(p, stem.string() + ".dat");
}

std::string fnv(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Reference {
    std::vector<PdfGrid> hist;
    std::vector<std::pair<Moments, Moments>> sample_moments;
    std::size_t n_diverged = 0;
};

// Monte Carlo histograms at the report times, cached under reference/.
Reference mcs_reference(const RunConfig& cfg, const SystemModel& model, const StageOptions& opts) {
    const auto& times = cfg.solver.grid.report_times;
    const auto& geom = cfg.solver.grid.geom;
    json key = {{"model", cfg.source.at("model")},
                {"dt", cfg.sim.grid.dt},
                {"n_samples", cfg.reference.n_samples},
                {"seed", cfg.reference.seed},
                {"times", times},
                {"grid", {geom.lo1, geom.hi1, geom.lo2, geom.hi2, geom.n1, geom.n2}}};
    const std::string id = fnv(key.dump());
    const fs::path dir = cfg.outputs.dir / "reference";

    Reference ref;
    std::ifstream is(dir / "meta.json");
    if (is) {
        json meta = json::parse(is, nullptr, false);
        if (!meta.is_discarded() && meta.value("key", "") == id) {
            for (std::size_t r = 0; r < times.size(); ++r) {
                ref.hist.push_back(read_pdf_csv(dir / ("h_t" + time_label(times[r]) + ".csv")));
                const auto& m = meta.at("moments")[r];
                auto rd = [](const json& j) {
                    return Moments{j.at("mean").get<double>(), j.at("std").get<double>(), j.at("skew").get<double>(),
                                   j.at("kurt").get<double>()};
                };
                ref.sample_moments.emplace_back(rd(m.at("y1")), rd(m.at("y2")));
            }
            ref.n_diverged = meta.at("diverged").get<std::size_t>();
            say(opts, "reusing Monte Carlo reference in " + dir.string());
            return ref;
        }
    }

    say(opts, "Monte Carlo reference: " + std::to_string(cfg.reference.n_samples) + " samples");
    std::vector<std::size_t> steps;
    std::size_t last = 0;
    for (double t : times) {
        steps.push_back(static_cast<std::size_t>(std::llround(t / cfg.sim.grid.dt)));
        last = std::max(last, steps.back());
    }
    const auto states = run_states(model, cfg.sim.grid.dt, std::max<std::size_t>(last, 1), steps,
                                   cfg.reference.n_samples, cfg.reference.seed, opts.threads, &ref.n_diverged);
    ojson meta;
    meta["key"] = id;
    meta["n_samples"] = cfg.reference.n_samples;
    meta["seed"] = cfg.reference.seed;
    meta["diverged"] = ref.n_diverged;
    meta["moments"] = ojson::array();
    for (std::size_t r = 0; r < times.size(); ++r) {
        // Histogram normalised by the full sample count: divergent paths count as lost mass.
        PdfGrid h = histogram2d(states[r], geom, times[r]);
        const double keep = static_cast<double>(states[r].size()) / static_cast<double>(cfg.reference.n_samples);
        for (double& v : h.values) v *= keep;
        write_pdf_csv(h, dir / ("h_t" + time_label(times[r]) + ".csv"));
        ref.hist.push_back(std::move(h));
        std::vector<double> x1, x2;
        for (const auto& y : states[r]) {
            x1.push_back(y[0]);
            x2.push_back(y[1]);
        }
        const auto m1 = sample_moments(x1);
        const auto m2 = sample_moments(x2);
        ref.sample_moments.emplace_back(m1, m2);
        meta["moments"].push_back({{"time", times[r]}, {"y1", moments_json(m1)}, {"y2", moments_json(m2)}});
    }
    write_json(dir / "meta.json", meta);
    return ref;
}

std::vector<PdfGrid> read_solution(const RunConfig& cfg) {
    std::vector<PdfGrid> out;
    for (double t : cfg.solver.grid.report_times) {
        const fs::path stem = cfg.outputs.dir / "pdf" / ("p_t" + time_label(t));
        if (fs::exists(stem.string() + ".bin")) {
            out.push_back(read_pdf_binary(stem.string() + ".bin"));
        } else if (fs::exists(stem.string() + ".csv")) {
            out.push_back(read_pdf_csv(stem.string() + ".csv"));
        } else {
            throw MissingInputError("no solver output for t = " + format_double(t) + " in " +
                                    (cfg.outputs.dir / "pdf").string() + " (run solve first)");
        }
    }
    return out;
}

}  // namespace

std::string time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", t);
    return buf;
}

fs::path default_config_dir() {
    if (fs::exists("configs")) return "configs";
    return fs::path(MEMFPK_SOURCE_DIR) / "configs";
}

void apply_overrides(RunConfig& cfg, const StageOptions& opts) {
    if (opts.out) {
        cfg.outputs.dir = *opts.out;
        cfg.source["outputs"]["dir"] = opts.out->string();
    }
    if (opts.seed) {
        cfg.sim.seed = *opts.seed;
        cfg.source["sim"]["seed"] = *opts.seed;
    }
}

void write_manifest(const RunConfig& cfg) {
    ojson m;
    m["name"] = cfg.name;
    m["config_hash"] = cfg.hash();
    m["git_describe"] = MEMFPK_GIT_DESCRIBE;
    m["seeds"] = {{"sim", cfg.sim.seed}, {"reference", cfg.reference.seed}};
    m["seed_derivation"] = "splitmix64(master + 0x9E3779B97F4A7C15 * (index + 1))";
    ojson s;
    s["integrator"] = "heun";
    s["fgn"] = "davies-harte, cholesky fallback";
    s["kernel_rule"] = kernel_rule_name(cfg.sim.rule);
    s["solver"] = std::string("forward-euler/") +
                  (cfg.solver.opts.upwind ? "upwind" : cfg.solver.opts.order == 4 ? "central4" : "central") +
                  "/dirichlet";
    s["coefficients"] = coeff_kind_name(cfg.solver.coefficients);
    s["clamp"] = cfg.solver.opts.clamp;
    s["renormalize"] = cfg.solver.opts.renormalize;
    s["dlmm"] = {{"bins", {cfg.dlmm.grid.n1, cfg.dlmm.grid.n2}},
                 {"radius", cfg.dlmm.radius},
                 {"interpolation", cfg.dlmm.interp == Interp::Linear ? "linear" : "cubic"},
                 {"time_interpolation", "linear"},
                 {"mirror", cfg.dlmm.mirror}};
    m["schemes"] = s;
    m["config"] = cfg.source;
    write_json(cfg.outputs.dir / "manifest.json", m);
}

void cmd_simulate(const RunConfig& cfg, const StageOptions& opts) {
    const SystemModel model = cfg.build_model();
    say(opts, "simulate: " + std::to_string(cfg.sim.n_samples) + " paths of " + model.name + ", " +
                  std::to_string(cfg.sim.grid.n_steps) + " steps");
    EnsembleOptions eo;
    eo.threads = opts.threads;
    eo.rule = cfg.sim.rule;
    const EnsembleResult e = run_ensemble(model, cfg.sim.grid, cfg.sim.n_samples, cfg.sim.seed, eo);
    write_ensemble(e, cfg.outputs.dir / "ensemble");
    write_manifest(cfg);
    say(opts, "simulate: " + std::to_string(e.diverged.size()) + " divergent paths, " +
                  std::to_string(e.snapshots.size()) + " snapshots written");
}

void cmd_estimate(const RunConfig& cfg, const StageOptions& opts) {
    const SystemModel model = cfg.build_model();
    const EnsembleResult e = read_ensemble(cfg.outputs.dir / "ensemble");
    if (e.model != model.name) {
        throw ConfigError("ensemble was simulated for '" + e.model + "', config names '" + model.name + "'");
    }
    DlmmOptions d;
    d.grid = cfg.dlmm.grid;
    d.radius = cfg.dlmm.radius;
    d.mirror = cfg.dlmm.mirror;
    d.threads = opts.threads;
    const CoefficientField f = estimate(e, model.sigma, d);
    write_field(f, cfg.outputs.dir / "coefficients");
    write_manifest(cfg);
    say(opts, "estimate: " + std::to_string(f.snapshots.size()) + " coefficient snapshots on " +
                  std::to_string(d.grid.n1) + "x" + std::to_string(d.grid.n2) + " bins, r = " +
                  std::to_string(d.radius));
}

json cmd_solve(const RunConfig& cfg, const StageOptions& opts) {
    const SystemModel model = cfg.build_model();
    const auto& grid = cfg.solver.grid;
    std::unique_ptr<CoefficientSource> src;
    switch (cfg.solver.coefficients) {
        case CoeffKind::Analytic:
            src = std::make_unique<LinearSource>(grid.geom, LinearSystem::from(LinearParams::from_model(model)),
                                                 grid.dt, grid.n_steps(), cfg.solver.substeps);
            break;
        case CoeffKind::Gwn:
            src = make_gwn_source(grid.geom, model.sigma);
            break;
        case CoeffKind::Dlmm: {
            const CoefficientField f = read_field(cfg.outputs.dir / "coefficients");
            if (f.model != model.name) {
                throw ConfigError("coefficient field belongs to '" + f.model + "', config names '" + model.name + "'");
            }
            src = std::make_unique<DlmmSource>(f, grid.geom, cfg.dlmm.interp);
            break;
        }
    }
    say(opts, "solve: " + std::to_string(grid.geom.n1) + "x" + std::to_string(grid.geom.n2) + " nodes, " +
                  std::to_string(grid.n_steps()) + " steps, coefficients " + src->name());
    SolveResult r;
    try {
        r = solve(model, *src, grid, cfg.solver.opts);
    } catch (const std::out_of_range& e) {
        throw MissingInputError(e.what());
    }

    MomentSeries series;
    for (const auto& p : r.pdfs) {
        const fs::path stem = cfg.outputs.dir / "pdf" / ("p_t" + time_label(p.time));
        write_grid(cfg, p, stem);
        if (!cfg.outputs.csv && !cfg.outputs.bin) write_pdf_csv(p, stem.string() + ".csv");
        write_marginals_csv(marginals(p), cfg.outputs.dir / "marginals" / ("m_t" + time_label(p.time) + ".csv"));
        series.add(p);
    }
    write_moments_csv(series, cfg.outputs.dir / "moments.csv");

    ojson log;
    log["scheme"] = r.scheme;
    log["coefficients"] = src->name();
    log["steps"] = r.steps;
    log["max_mass_drift"] = r.max_mass_drift;
    log["min_over_max"] = r.min_ratio;
    log["reports"] = ojson::array();
    for (const auto& rec : r.records) {
        log["reports"].push_back({{"time", rec.time},
                                  {"mass", rec.mass},
                                  {"min", rec.min_value},
                                  {"max", rec.max_value},
                                  {"clamped_mass", rec.clamped_mass},
                                  {"renorm_log", rec.renorm_log},
                                  {"cfl_dt", rec.cfl_dt}});
    }
    write_json(cfg.outputs.dir / "solve_log.json", log);
    write_manifest(cfg);
    say(opts, "solve: max |mass - 1| = " + format_double(r.max_mass_drift));

    json out = json::parse(log.dump());
    if (cfg.reference.kind != ReferenceKind::None) out["metrics"] = cmd_compare(cfg, opts);
    return out;
}

void cmd_analytic(const RunConfig& cfg, const StageOptions& opts) {
    const SystemModel model = cfg.build_model();
    const LinearParams lp = LinearParams::from_model(model);
    const auto& times = cfg.solver.grid.report_times;
    const GaussianSummary s = gaussian_summary(lp, times);
    const fs::path dir = cfg.outputs.dir / "analytic";
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "summary.csv", std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
        os << "t,mu1,mu2,s11,s12,s22\n";
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            const auto& c = s.covariances[k];
            os << format_double(s.times[k]) << ',' << format_double(s.means[k][0]) << ','
               << format_double(s.means[k][1]) << ',' << format_double(c(0, 0)) << ',' << format_double(c(0, 1))
               << ',' << format_double(c(1, 1)) << '\n';
        }
    }
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        const PdfGrid p = gaussian_pdf(s.means[k], s.covariances[k], cfg.solver.grid.geom, s.times[k]);
        write_grid(cfg, p, dir / ("p_t" + time_label(s.times[k])));
    }
    write_manifest(cfg);
    say(opts, "analytic: " + std::to_string(s.times.size()) + " report times");
}

json cmd_compare(const RunConfig& cfg, const StageOptions& opts) {
    const SystemModel model = cfg.build_model();
    const auto sol = read_solution(cfg);
    const auto& times = cfg.solver.grid.report_times;
    ojson metrics;
    metrics["reference"] = cfg.reference.kind == ReferenceKind::Analytic ? "analytic"
                           : cfg.reference.kind == ReferenceKind::Mcs    ? "mcs"
                                                                         : "none";
    metrics["threshold"] = cfg.reference.threshold;
    metrics["times"] = ojson::array();

    std::vector<PdfGrid> refs;
    Reference mcs;
    if (cfg.reference.kind == ReferenceKind::Analytic) {
        const GaussianSummary s = gaussian_summary(LinearParams::from_model(model), times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            refs.push_back(gaussian_pdf(s.means[k], s.covariances[k], cfg.solver.grid.geom, times[k]));
        }
    } else if (cfg.reference.kind == ReferenceKind::Mcs) {
        mcs = mcs_reference(cfg, model, opts);
        refs = mcs.hist;
        metrics["reference_samples"] = cfg.reference.n_samples;
        metrics["reference_diverged"] = mcs.n_diverged;
    }

    for (std::size_t k = 0; k < times.size(); ++k) {
        const PdfGrid& p = sol[k];
        ojson e;
        e["time"] = times[k];
        const auto mg = marginals(p);
        const auto mom = moments(p);
        e["moments"] = {{"y1", moments_json(mom.first)}, {"y2", moments_json(mom.second)}};
        e["joint_local_maxima"] = local_maxima(p).size();
        e["marginal_local_maxima"] = {local_maxima(mg.first).size(), local_maxima(mg.second).size()};
        e["joint_modes"] = modes(p).size();
        e["marginal_modes"] = {modes(mg.first).size(), modes(mg.second).size()};
        if (!refs.empty()) {
            const CompareMetrics c = compare(p, refs[k], cfg.reference.threshold);
            e["max_abs"] = c.max_abs;
            e["l1"] = c.l1;
            e["log_tail_max_abs"] = c.log_tail_max_abs;
            e["log_tail_points"] = c.log_tail_points;
            const auto rm = marginals(refs[k]);
            e["marginal_l1"] = {marginal_l1(mg.first, rm.first), marginal_l1(mg.second, rm.second)};
        }
        if (cfg.reference.kind == ReferenceKind::Mcs) {
            e["reference_moments"] = {{"y1", moments_json(mcs.sample_moments[k].first)},
                                      {"y2", moments_json(mcs.sample_moments[k].second)}};
        }
        metrics["times"].push_back(e);
    }
    write_json(cfg.outputs.dir / "metrics.json", metrics);
    write_manifest(cfg);
    say(opts, "compare: metrics written for " + std::to_string(times.size()) + " report times");
    return json::parse(metrics.dump());
}

json compare_files(const fs::path& a, const fs::path& b, double threshold) {
    const PdfGrid pa = read_pdf(a);
    const PdfGrid pb = read_pdf(b);
    if (!pa.geom.matches(pb.geom)) throw ConfigError("compare: grid geometries differ");
    const CompareMetrics c = compare(pa, pb, threshold);
    return {{"max_abs", c.max_abs},
            {"l1", c.l1},
            {"log_tail_max_abs", c.log_tail_max_abs},
            {"log_tail_points", c.log_tail_points},
            {"threshold", threshold}};
}

json cmd_reproduce(const std::string& id, const std::string& scale, const fs::path& configs,
                   const StageOptions& opts) {
    if (id != "ex1" && id != "ex2" && id != "ex3" && id != "ex4") {
        throw ConfigError("reproduce: unknown example '" + id + "' (ex1, ex2, ex3, ex4)");
    }
    RunConfig cfg = load_config(configs / (id + ".json"), scale);
    StageOptions o = opts;
    if (!o.out) o.out = fs::path("out") / (id + "-" + scale);
    apply_overrides(cfg, o);
    say(opts, "reproduce " + id + " (" + scale + ") into " + cfg.outputs.dir.string());
    if (cfg.solver.coefficients == CoeffKind::Dlmm) {
        cmd_simulate(cfg, o);
        cmd_estimate(cfg, o);
    }
    if (cfg.reference.kind == ReferenceKind::Analytic) cmd_analytic(cfg, o);
    return cmd_solve(cfg, o);
}

}  // namespace memfpk
