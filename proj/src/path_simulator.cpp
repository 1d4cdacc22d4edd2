#include "memfpk/path_simulator.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "memfpk/errors.hpp"
#include "memfpk/fgn.hpp"
#include "memfpk/parallel.hpp"
#include "memfpk/pdf_grid.hpp"

namespace memfpk {

void SimGrid::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("sim.dt must be positive");
    if (n_steps == 0) throw ConfigError("sim.n_steps must be at least 1");
    if (snapshot_stride == 0) throw ConfigError("sim.snapshot_stride must be at least 1");
    if (n_steps % snapshot_stride != 0) {
        throw ConfigError("sim.snapshot_stride must divide sim.n_steps");
    }
}

std::size_t SimGrid::step_of(double t) const {
    const double x = t / dt;
    const double r = std::round(x);
    if (r < 0.0 || std::fabs(x - r) > 1e-9 * std::max(1.0, r)) {
        throw std::invalid_argument("time " + format_double(t) + " is not on the simulation grid");
    }
    return static_cast<std::size_t>(r);
}

namespace {

inline Vec2 heun(const SystemModel& model, const Vec2& y, double dt, const Vec2& kick) {
    const Vec2 f0 = model.drift(y);
    const Vec2 pred = y + dt * f0 + kick;
    const Vec2 f1 = model.drift(pred);
    return y + (0.5 * dt) * (f0 + f1) + kick;
}

inline Vec2 kick_at(const SystemModel& model, std::span<const double> n1, std::span<const double> n2,
                    std::size_t m) {
    return {n1.empty() ? 0.0 : model.sigma[0] * n1[m], n2.empty() ? 0.0 : model.sigma[1] * n2[m]};
}

void check_noise(const SystemModel& model, const SimGrid& grid, std::span<const double> n1,
                 std::span<const double> n2) {
    const std::span<const double> n[2] = {n1, n2};
    for (int i = 0; i < 2; ++i) {
        if (n[i].empty() && model.sigma[i] == 0.0) continue;
        if (n[i].size() != grid.n_steps) {
            throw std::invalid_argument("noise channel " + std::to_string(i + 1) + " has " +
                                        std::to_string(n[i].size()) + " increments, expected " +
                                        std::to_string(grid.n_steps));
        }
    }
}

const char* rule_name(KernelRule r) { return r == KernelRule::Midpoint ? "midpoint" : "left"; }

KernelRule rule_from(const std::string& s) {
    if (s == "midpoint") return KernelRule::Midpoint;
    if (s == "left") return KernelRule::Left;
    throw std::runtime_error("unknown kernel rule '" + s + "'");
}

// Per-worker noise sources and buffers.
struct Worker {
    std::array<std::unique_ptr<fgn::IncrementSource>, 2> src;
    std::array<std::vector<double>, 2> buf;

    Worker(const SystemModel& model, double dt, std::size_t n) {
        for (int i = 0; i < 2; ++i) {
            if (model.sigma[i] == 0.0) continue;
            src[i] = std::make_unique<fgn::IncrementSource>(model.hurst[i], dt, n);
            buf[i].resize(n);
        }
    }

    Vec2 draw(const SystemModel& model, std::uint64_t sample_seed) {
        for (std::uint64_t i = 0; i < 2; ++i) {
            if (src[i]) src[i]->sample(fgn::mix_seed(sample_seed, i + 1), buf[i]);
        }
        std::mt19937_64 rng(fgn::mix_seed(sample_seed, 0));
        std::normal_distribution<double> normal(0.0, 1.0);
        const double s = std::sqrt(model.init.var);
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        return {model.init.mean[0] + s * z1, model.init.mean[1] + s * z2};
    }
};

}  // namespace

SamplePath integrate_path(const SystemModel& model, const SimGrid& grid, const Vec2& y0,
                          std::span<const double> noise1, std::span<const double> noise2) {
    grid.validate();
    check_noise(model, grid, noise1, noise2);
    SamplePath p;
    p.states.reserve(grid.n_steps + 1);
    p.step_props.reserve(grid.n_steps);
    p.half_props.reserve(grid.n_steps);
    p.states.push_back(y0);
    if (!all_finite(y0)) {
        p.valid = false;
        return p;
    }
    const double dt = grid.dt;
    for (std::size_t m = 0; m < grid.n_steps; ++m) {
        const Vec2& y = p.states.back();
        const Vec2 next = heun(model, y, dt, kick_at(model, noise1, noise2, m));
        if (!all_finite(next)) {
            p.valid = false;
            p.diverged_at = m + 1;
            return p;
        }
        const Mat2 j = model.jacobian(0.5 * (y + next));
        const Mat2 q = expm((0.5 * dt) * j);
        p.half_props.push_back(q);
        p.step_props.push_back(q * q);
        p.states.push_back(next);
    }
    return p;
}

std::vector<double> kernel_weights(double hurst, double dt, std::size_t n) {
    if (!(hurst > 0.5 && hurst < 1.0)) throw std::domain_error("kernel weights need 1/2 < H < 1");
    const double e = 2.0 * hurst - 1.0;
    std::vector<double> w(n + 1, 0.0);
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double cur = std::pow(static_cast<double>(k) * dt, e);
        w[k] = hurst * (cur - prev);
        prev = cur;
    }
    return w;
}

MalliavinPair malliavin_diagonal(const SamplePath& path, const SystemModel& model, const SimGrid& grid,
                                 std::size_t h, KernelRule rule,
                                 const std::array<std::vector<double>, 2>& weights) {
    if (!path.valid) throw std::invalid_argument("Malliavin derivative of a divergent path");
    if (h > path.step_props.size()) throw std::invalid_argument("snapshot beyond the integrated path");
    MalliavinPair out{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};

    std::array<bool, 2> active{false, false};
    std::array<const std::vector<double>*, 2> w{nullptr, nullptr};
    std::array<std::vector<double>, 2> local;
    for (int i = 0; i < 2; ++i) {
        const double s = model.sigma[i];
        if (s == 0.0) continue;
        if (model.hurst[i] == 0.5) {
            out[i][i] = 0.5 * s;  // delta kernel: half its mass inside [0, t]
            continue;
        }
        active[i] = true;
        if (weights[i].size() > h) {
            w[i] = &weights[i];
        } else {
            local[i] = kernel_weights(model.hurst[i], grid.dt, h);
            w[i] = &local[i];
        }
    }
    if (!active[0] && !active[1]) return out;

    Mat2 phi = Mat2::identity();  // Phi(t_h, t_{m+1})
    for (std::size_t k = 1; k <= h; ++k) {
        const std::size_t m = h - k;
        const Mat2& pm = path.step_props[m];
        const Mat2 g = rule == KernelRule::Midpoint ? phi * path.half_props[m] : phi * pm;
        for (int i = 0; i < 2; ++i) {
            if (!active[i]) continue;
            const double c = (*w[i])[k] * model.sigma[i];
            out[i][0] += c * g(0, i);
            out[i][1] += c * g(1, i);
        }
        phi = phi * pm;
    }
    return out;
}

MalliavinPair malliavin_diagonal_at(const SamplePath& path, const SystemModel& model,
                                    const SimGrid& grid, double t, KernelRule rule) {
    return malliavin_diagonal(path, model, grid, grid.step_of(t), rule);
}

void fill_malliavin(SamplePath& path, const SystemModel& model, const SimGrid& grid, KernelRule rule) {
    path.malliavin.clear();
    if (!path.valid) return;
    std::array<std::vector<double>, 2> w;
    for (int i = 0; i < 2; ++i) {
        if (model.sigma[i] != 0.0 && model.hurst[i] != 0.5) {
            w[i] = kernel_weights(model.hurst[i], grid.dt, grid.n_steps);
        }
    }
    path.malliavin.reserve(grid.n_snapshots());
    for (std::size_t k = 0; k < grid.n_snapshots(); ++k) {
        path.malliavin.push_back(malliavin_diagonal(path, model, grid, grid.snapshot_step(k), rule, w));
    }
}

SamplePath simulate_sample(const SystemModel& model, const SimGrid& grid, std::uint64_t master_seed,
                           std::uint64_t q, KernelRule rule) {
    grid.validate();
    Worker w(model, grid.dt, grid.n_steps);
    const Vec2 y0 = w.draw(model, fgn::mix_seed(master_seed, q));
    SamplePath p = integrate_path(model, grid, y0, w.buf[0], w.buf[1]);
    fill_malliavin(p, model, grid, rule);
    return p;
}

EnsembleResult run_ensemble(const SystemModel& model, const SimGrid& grid, std::size_t n_samples,
                            std::uint64_t master_seed, const EnsembleOptions& opts) {
    grid.validate();
    if (n_samples == 0) throw ConfigError("sim.n_samples must be at least 1");

    struct Compact {
        bool valid = true;
        std::vector<Vec2> y;
        std::vector<MalliavinPair> d;
    };
    std::vector<Compact> per(n_samples);

    std::array<std::vector<double>, 2> weights;
    for (int i = 0; i < 2; ++i) {
        if (model.sigma[i] != 0.0 && model.hurst[i] != 0.5) {
            weights[i] = kernel_weights(model.hurst[i], grid.dt, grid.n_steps);
        }
    }

    const unsigned threads = resolve_threads(opts.threads);
    std::vector<std::unique_ptr<Worker>> workers(threads);
    parallel_for(n_samples, threads, [&](unsigned wid, std::size_t q) {
        if (!workers[wid]) workers[wid] = std::make_unique<Worker>(model, grid.dt, grid.n_steps);
        Worker& w = *workers[wid];
        const Vec2 y0 = w.draw(model, fgn::mix_seed(master_seed, q));
        const SamplePath p = integrate_path(model, grid, y0, w.buf[0], w.buf[1]);
        Compact& c = per[q];
        if (!p.valid) {
            c.valid = false;
            return;
        }
        const std::size_t ns = grid.n_snapshots();
        c.y.resize(ns);
        c.d.resize(ns);
        for (std::size_t k = 0; k < ns; ++k) {
            const std::size_t h = grid.snapshot_step(k);
            c.y[k] = p.states[h];
            c.d[k] = malliavin_diagonal(p, model, grid, h, opts.rule, weights);
        }
    });

    EnsembleResult r;
    r.grid = grid;
    r.model = model.name;
    r.master_seed = master_seed;
    r.n_samples = n_samples;
    r.rule = opts.rule;
    r.snapshots.resize(grid.n_snapshots());
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        r.snapshots[k].time = grid.time(grid.snapshot_step(k));
    }
    for (std::size_t q = 0; q < n_samples; ++q) {
        if (!per[q].valid) {
            r.diverged.push_back(q);
            continue;
        }
        for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
            auto& s = r.snapshots[k];
            s.sample.push_back(q);
            s.y.push_back(per[q].y[k]);
            s.d.push_back(per[q].d[k]);
        }
    }
    const double frac = static_cast<double>(r.diverged.size()) / static_cast<double>(n_samples);
    if (frac > opts.max_divergent_fraction) {
        throw NumericalError(std::to_string(r.diverged.size()) + " of " + std::to_string(n_samples) +
                             " paths diverged (limit " + format_double(100.0 * opts.max_divergent_fraction) +
                             "%)");
    }
    return r;
}

std::vector<std::vector<Vec2>> run_states(const SystemModel& model, double dt, std::size_t n_steps,
                                          const std::vector<std::size_t>& report_steps,
                                          std::size_t n_samples, std::uint64_t master_seed,
                                          unsigned threads, std::size_t* n_diverged) {
    if (n_samples == 0) throw ConfigError("reference sample count must be at least 1");
    for (std::size_t s : report_steps) {
        if (s > n_steps) throw std::invalid_argument("report step beyond the simulation horizon");
    }
    const SimGrid grid{dt, n_steps, 1};
    grid.validate();

    // slot[r][q], NaN marks a divergent sample
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<Vec2>> slot(report_steps.size(), std::vector<Vec2>(n_samples));
    threads = resolve_threads(threads);
    std::vector<std::unique_ptr<Worker>> workers(threads);
    parallel_for(n_samples, threads, [&](unsigned wid, std::size_t q) {
        if (!workers[wid]) workers[wid] = std::make_unique<Worker>(model, dt, n_steps);
        Worker& w = *workers[wid];
        Vec2 y = w.draw(model, fgn::mix_seed(master_seed, q));
        bool ok = all_finite(y);
        // Only the requested steps are kept; states are written as reached.
        std::size_t m = 0;
        auto record = [&](std::size_t step, const Vec2& v) {
            for (std::size_t r = 0; r < report_steps.size(); ++r) {
                if (report_steps[r] == step) slot[r][q] = v;
            }
        };
        if (ok) record(0, y);
        for (; ok && m < n_steps; ++m) {
            y = heun(model, y, dt, kick_at(model, w.buf[0], w.buf[1], m));
            ok = all_finite(y);
            if (ok) record(m + 1, y);
        }
        if (!ok) {
            for (auto& r : slot) r[q] = Vec2{nan, nan};
        }
    });

    std::size_t bad = 0;
    std::vector<std::vector<Vec2>> out(report_steps.size());
    for (std::size_t q = 0; q < n_samples; ++q) {
        const bool ok = report_steps.empty() || all_finite(slot[0][q]);
        if (!ok) {
            ++bad;
            continue;
        }
        for (std::size_t r = 0; r < report_steps.size(); ++r) out[r].push_back(slot[r][q]);
    }
    if (n_diverged) *n_diverged = bad;
    return out;
}

void write_ensemble(const EnsembleResult& e, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json meta;
    meta["format"] = "memfpk-ensemble";
    meta["version"] = 1;
    meta["model"] = e.model;
    meta["master_seed"] = e.master_seed;
    meta["n_samples"] = e.n_samples;
    meta["dt"] = e.grid.dt;
    meta["n_steps"] = e.grid.n_steps;
    meta["snapshot_stride"] = e.grid.snapshot_stride;
    meta["kernel_rule"] = rule_name(e.rule);
    meta["integrator"] = "heun";
    meta["diverged"] = e.diverged;
    meta["columns"] = {"sample", "y1", "y2", "d11", "d12", "d21", "d22"};
    meta["n_snapshots"] = e.snapshots.size();
    {
        std::ofstream os(dir / "meta.json", std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
        os << meta.dump(2) << '\n';
    }
    for (std::size_t k = 0; k < e.snapshots.size(); ++k) {
        const auto& s = e.snapshots[k];
        char name[32];
        std::snprintf(name, sizeof name, "snap_%05zu.csv", k);
        std::ofstream os(dir / name, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << "# time," << format_double(s.time) << '\n';
        os << "sample,y1,y2,d11,d12,d21,d22\n";
        for (std::size_t n = 0; n < s.y.size(); ++n) {
            os << s.sample[n] << ',' << format_double(s.y[n][0]) << ',' << format_double(s.y[n][1]) << ','
               << format_double(s.d[n][0][0]) << ',' << format_double(s.d[n][0][1]) << ','
               << format_double(s.d[n][1][0]) << ',' << format_double(s.d[n][1][1]) << '\n';
        }
    }
}

EnsembleResult read_ensemble(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    std::ifstream is(meta_path);
    if (!is) throw MissingInputError("no ensemble found at " + dir.string() + " (run simulate first)");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error("malformed " + meta_path.string() + ": " + ex.what());
    }
    EnsembleResult e;
    e.model = meta.at("model").get<std::string>();
    e.master_seed = meta.at("master_seed").get<std::uint64_t>();
    e.n_samples = meta.at("n_samples").get<std::size_t>();
    e.grid.dt = meta.at("dt").get<double>();
    e.grid.n_steps = meta.at("n_steps").get<std::size_t>();
    e.grid.snapshot_stride = meta.at("snapshot_stride").get<std::size_t>();
    e.rule = rule_from(meta.at("kernel_rule").get<std::string>());
    e.diverged = meta.at("diverged").get<std::vector<std::uint64_t>>();
    const auto n_snap = meta.at("n_snapshots").get<std::size_t>();
    e.snapshots.resize(n_snap);
    for (std::size_t k = 0; k < n_snap; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%05zu.csv", k);
        std::ifstream in(dir / name);
        if (!in) throw MissingInputError("missing snapshot file " + (dir / name).string());
        auto& s = e.snapshots[k];
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line.rfind("# time,", 0) == 0) {
                s.time = std::stod(line.substr(7));
                continue;
            }
            if (line[0] == '#' || line.rfind("sample", 0) == 0) continue;
            std::istringstream ls(line);
            std::string f[7];
            for (auto& x : f) std::getline(ls, x, ',');
            s.sample.push_back(std::stoull(f[0]));
            s.y.push_back({std::stod(f[1]), std::stod(f[2])});
            s.d.push_back({Vec2{std::stod(f[3]), std::stod(f[4])}, Vec2{std::stod(f[5]), std::stod(f[6])}});
        }
    }
    return e;
}

}  // namespace memfpk
