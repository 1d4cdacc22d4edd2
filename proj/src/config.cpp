#include "memfpk/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "memfpk/errors.hpp"

namespace memfpk {

namespace {

using nlohmann::json;

const json& object_at(const json& doc, const char* key, const std::string& path) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    const json& v = doc.at(key);
    if (!v.is_object()) throw ConfigError(path + ": expected an object");
    return v;
}

template <class T>
T get(const json& obj, const char* key, const std::string& path, const T& fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

template <class T>
T require(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) throw ConfigError(path + "." + key + ": required field missing");
    return get<T>(obj, key, path, T{});
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path + ": not finite");
    return x;
}

Vec2 pair_of(const json& obj, const char* key, const std::string& path, const Vec2& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    const std::string p = path + "." + key;
    if (!v.is_array() || v.size() != 2) throw ConfigError(p + ": expected [a, b]");
    return {number(v[0], p + "[0]"), number(v[1], p + "[1]")};
}

std::array<double, 4> domain_of(const json& obj, const std::string& path, const std::array<double, 4>& fallback) {
    if (!obj.contains("domain")) return fallback;
    const json& v = obj.at("domain");
    const std::string p = path + ".domain";
    if (!v.is_array() || v.size() != 4) throw ConfigError(p + ": expected [lo1, hi1, lo2, hi2]");
    std::array<double, 4> d{};
    for (int k = 0; k < 4; ++k) d[k] = number(v[k], p + "[" + std::to_string(k) + "]");
    if (!(d[1] > d[0] && d[3] > d[2])) throw ConfigError(p + ": empty rectangle");
    return d;
}

std::size_t steps_for(double t_end, double dt, const std::string& path) {
    if (!(dt > 0.0)) throw ConfigError(path + ".dt: must be positive");
    if (!(t_end > 0.0)) throw ConfigError(path + ".t_end: must be positive");
    const double r = t_end / dt;
    if (std::fabs(r - std::round(r)) > 1e-9 * r) throw ConfigError(path + ".t_end: not a multiple of dt");
    return static_cast<std::size_t>(std::llround(r));
}

std::size_t positive_count(const json& obj, const char* key, const std::string& path, std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>())) {
        throw ConfigError(path + "." + key + ": expected an integer");
    }
    const double x = v.get<double>();
    if (x < 1.0) throw ConfigError(path + "." + key + ": must be >= 1");
    return static_cast<std::size_t>(x);
}

ModelBlock parse_model(const json& doc) {
    if (!doc.contains("model")) throw ConfigError("model: required block missing");
    const json& m = object_at(doc, "model", "model");
    ModelBlock b;
    b.name = require<std::string>(m, "name", "model");
    const json& params = object_at(m, "params", "model.params");
    for (const auto& [k, v] : params.items()) b.params[k] = number(v, "model.params." + k);
    b.sigma = pair_of(m, "sigma", "model", b.sigma);
    b.hurst = pair_of(m, "hurst", "model", b.hurst);
    const json& init = object_at(m, "init", "model.init");
    b.init.mean = pair_of(init, "mean", "model.init", {0.0, 0.0});
    b.init.var = init.contains("var") ? number(init.at("var"), "model.init.var") : 0.05;
    if (!(b.init.var > 0.0)) throw ConfigError("model.init.var: must be positive");
    return b;
}

KernelRule parse_rule(const std::string& s) {
    if (s == "midpoint") return KernelRule::Midpoint;
    if (s == "left") return KernelRule::Left;
    throw ConfigError("sim.kernel_rule: expected 'midpoint' or 'left', got '" + s + "'");
}

}  // namespace

std::string coeff_kind_name(CoeffKind k) {
    switch (k) {
        case CoeffKind::Analytic: return "analytic";
        case CoeffKind::Gwn: return "gwn";
        case CoeffKind::Dlmm: return "dlmm";
    }
    return "?";
}

std::string kernel_rule_name(KernelRule r) { return r == KernelRule::Midpoint ? "midpoint" : "left"; }

SystemModel RunConfig::build_model() const {
    ParamMap p = model.params;
    p["sigma1"] = model.sigma[0];
    p["sigma2"] = model.sigma[1];
    p["hurst1"] = model.hurst[0];
    p["hurst2"] = model.hurst[1];
    p["mean1"] = model.init.mean[0];
    p["mean2"] = model.init.mean[1];
    p["var0"] = model.init.var;
    try {
        return builtin(model.name, p);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

std::string RunConfig::hash() const {
    const std::string s = source.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    c.source = doc;
    c.name = get<std::string>(doc, "name", "config", "run");
    c.model = parse_model(doc);

    // sim
    const json& sim = object_at(doc, "sim", "sim");
    c.sim.grid.dt = sim.contains("dt") ? number(sim.at("dt"), "sim.dt") : 1e-3;
    if (!(c.sim.grid.dt > 0.0)) throw ConfigError("sim.dt: must be positive");
    if (sim.contains("n_steps")) {
        c.sim.grid.n_steps = positive_count(sim, "n_steps", "sim", 1);
    } else {
        const double t_end = sim.contains("t_end") ? number(sim.at("t_end"), "sim.t_end") : 1.0;
        c.sim.grid.n_steps = steps_for(t_end, c.sim.grid.dt, "sim");
    }
    const auto default_stride =
        static_cast<std::size_t>(std::max(1.0, std::round(0.05 / c.sim.grid.dt)));
    c.sim.grid.snapshot_stride = positive_count(sim, "snapshot_stride", "sim", default_stride);
    if (sim.contains("n_samples")) {
        const json& n = sim.at("n_samples");
        if (!n.is_number() || n.get<double>() < 1.0) throw ConfigError("sim.n_samples: must be >= 1");
    }
    c.sim.n_samples = positive_count(sim, "n_samples", "sim", 2000);
    c.sim.seed = get<std::uint64_t>(sim, "seed", "sim", 1);
    c.sim.rule = parse_rule(get<std::string>(sim, "kernel_rule", "sim", "midpoint"));
    c.sim.grid.validate();

    // solver
    const json& sol = object_at(doc, "solver", "solver");
    const auto sd = domain_of(sol, "solver", {-6.0, 6.0, -6.0, 6.0});
    const Vec2 sp = pair_of(sol, "spacing", "solver", {0.15, 0.15});
    if (!(sp[0] > 0.0 && sp[1] > 0.0)) throw ConfigError("solver.spacing: must be positive");
    c.solver.grid.geom = GridGeometry::from_spacing(sd[0], sd[1], sd[2], sd[3], sp[0], sp[1]);
    c.solver.grid.dt = sol.contains("dt") ? number(sol.at("dt"), "solver.dt") : 1e-3;
    c.solver.grid.t_end = sol.contains("t_end") ? number(sol.at("t_end"), "solver.t_end") : c.sim.grid.horizon();
    steps_for(c.solver.grid.t_end, c.solver.grid.dt, "solver");
    const std::string coeff = get<std::string>(sol, "coefficients", "solver", "analytic");
    if (coeff == "analytic") {
        c.solver.coefficients = CoeffKind::Analytic;
    } else if (coeff == "gwn") {
        c.solver.coefficients = CoeffKind::Gwn;
    } else if (coeff == "dlmm") {
        c.solver.coefficients = CoeffKind::Dlmm;
    } else {
        throw ConfigError("solver.coefficients: unknown source '" + coeff + "' (analytic, gwn, dlmm)");
    }
    c.solver.substeps = positive_count(sol, "substeps", "solver", 8);
    c.solver.opts.clamp = get<bool>(sol, "clamp", "solver", false);
    c.solver.opts.renormalize = get<bool>(sol, "renormalize", "solver", false);
    c.solver.opts.upwind = get<bool>(sol, "upwind", "solver", false);
    c.solver.opts.order = get<int>(sol, "advection_order", "solver", 2);
    if (c.solver.opts.order != 2 && c.solver.opts.order != 4) {
        throw ConfigError("solver.advection_order: must be 2 or 4");
    }

    // dlmm
    const json& dl = object_at(doc, "dlmm", "dlmm");
    const auto dd = domain_of(dl, "dlmm", sd);
    const std::size_t nb1 = dl.contains("bins") ? 0 : 30;
    c.dlmm.grid = BinGrid{dd[0], dd[1], dd[2], dd[3], nb1, nb1};
    if (dl.contains("bins")) {
        const Vec2 nb = pair_of(dl, "bins", "dlmm", {30, 30});
        if (nb[0] < 1 || nb[1] < 1 || std::floor(nb[0]) != nb[0] || std::floor(nb[1]) != nb[1]) {
            throw ConfigError("dlmm.bins: expected two integers >= 1");
        }
        c.dlmm.grid.n1 = static_cast<std::size_t>(nb[0]);
        c.dlmm.grid.n2 = static_cast<std::size_t>(nb[1]);
    }
    c.dlmm.radius = get<int>(dl, "radius", "dlmm", 1);
    if (c.dlmm.radius < 0) throw ConfigError("dlmm.radius: must be >= 0");
    const std::string interp = get<std::string>(dl, "interpolation", "dlmm", "linear");
    if (interp == "linear") {
        c.dlmm.interp = Interp::Linear;
    } else if (interp == "cubic") {
        c.dlmm.interp = Interp::Cubic;
    } else {
        throw ConfigError("dlmm.interpolation: expected 'linear' or 'cubic'");
    }
    c.dlmm.mirror = get<bool>(dl, "mirror", "dlmm", false);

    // outputs
    const json& out = object_at(doc, "outputs", "outputs");
    c.outputs.dir = get<std::string>(out, "dir", "outputs", "out/" + c.name);
    if (out.contains("formats")) {
        const json& f = out.at("formats");
        if (!f.is_array()) throw ConfigError("outputs.formats: expected an array");
        c.outputs.csv = c.outputs.bin = c.outputs.gnuplot = false;
        for (const auto& v : f) {
            const std::string s = v.is_string() ? v.get<std::string>() : "";
            if (s == "csv") {
                c.outputs.csv = true;
            } else if (s == "bin") {
                c.outputs.bin = true;
            } else if (s == "gnuplot") {
                c.outputs.gnuplot = true;
            } else {
                throw ConfigError("outputs.formats: unknown format '" + s + "'");
            }
        }
    }
    std::vector<double> rt{c.solver.grid.t_end};
    if (out.contains("report_times")) {
        const json& r = out.at("report_times");
        if (!r.is_array() || r.empty()) throw ConfigError("outputs.report_times: expected a non-empty array");
        rt.clear();
        for (std::size_t k = 0; k < r.size(); ++k) {
            rt.push_back(number(r[k], "outputs.report_times[" + std::to_string(k) + "]"));
        }
    }
    c.solver.grid.report_times = rt;
    for (double t : rt) {
        if (t < 0.0 || t > c.solver.grid.t_end + 1e-12) {
            throw ConfigError("outputs.report_times: " + std::to_string(t) + " lies beyond solver.t_end");
        }
    }
    c.solver.grid.validate();

    // reference
    const json& ref = object_at(doc, "reference", "reference");
    const std::string kind = get<std::string>(ref, "kind", "reference", "none");
    if (kind == "none") {
        c.reference.kind = ReferenceKind::None;
    } else if (kind == "analytic") {
        c.reference.kind = ReferenceKind::Analytic;
    } else if (kind == "mcs") {
        c.reference.kind = ReferenceKind::Mcs;
    } else {
        throw ConfigError("reference.kind: expected 'none', 'analytic' or 'mcs'");
    }
    c.reference.n_samples = positive_count(ref, "n_samples", "reference", 100000);
    c.reference.seed = get<std::uint64_t>(ref, "seed", "reference", 2);
    c.reference.threshold = ref.contains("threshold") ? number(ref.at("threshold"), "reference.threshold") : 1e-8;

    // cross-field consistency
    const SystemModel m = c.build_model();
    const bool linear = m.name == "linear_sdof";
    if (c.solver.coefficients == CoeffKind::Analytic && !linear) {
        throw ConfigError("solver.coefficients: 'analytic' needs model.name = linear_sdof");
    }
    if (c.reference.kind == ReferenceKind::Analytic && !linear) {
        throw ConfigError("reference.kind: 'analytic' needs model.name = linear_sdof");
    }
    if (c.solver.coefficients == CoeffKind::Dlmm && c.sim.grid.horizon() + 1e-12 < c.solver.grid.t_end) {
        throw ConfigError("sim.t_end: DLMM snapshots end at " + std::to_string(c.sim.grid.horizon()) +
                          " before solver.t_end = " + std::to_string(c.solver.grid.t_end));
    }
    if (c.reference.kind == ReferenceKind::Mcs) {
        const double r = c.sim.grid.dt;
        for (double t : rt) {
            const double k = t / r;
            if (std::fabs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
                throw ConfigError("outputs.report_times: " + std::to_string(t) + " is not a multiple of sim.dt");
            }
        }
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::string& scale) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (scale == "paper") {
        if (doc.contains("paper")) doc.merge_patch(doc.at("paper"));
    } else if (scale != "desk") {
        throw ConfigError("--scale: expected 'desk' or 'paper'");
    }
    doc.erase("paper");
    return parse_config(doc);
}

}  // namespace memfpk
