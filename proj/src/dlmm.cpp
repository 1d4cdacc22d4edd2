#include "memfpk/dlmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "memfpk/errors.hpp"
#include "memfpk/parallel.hpp"

namespace memfpk {

void BinGrid::validate() const {
    if (!(hi1 > lo1 && hi2 > lo2)) throw ConfigError("DLMM bin domain is degenerate");
    if (n1 < 1 || n2 < 1) throw ConfigError("DLMM bin counts must be at least 1");
}

namespace {

// Index along one axis under the half-open rule; -1 when outside.
long axis_bin(double y, double lo, double hi, std::size_t n) {
    if (!(y >= lo && y <= hi)) return -1;
    if (y == hi) return static_cast<long>(n) - 1;
    const double w = (hi - lo) / static_cast<double>(n);
    long i = static_cast<long>(std::floor((y - lo) / w));
    i = std::clamp(i, 0L, static_cast<long>(n) - 1);
    // floor() can land one cell off when y sits on an edge up to rounding
    auto edge = [&](long k) { return lo + static_cast<double>(k) * w; };
    if (y < edge(i) && i > 0) --i;
    if (i + 1 < static_cast<long>(n) && y >= edge(i + 1)) ++i;
    return i;
}

// Catmull-Rom on four equally spaced values, u in [0, 1].
double catmull_rom(double p0, double p1, double p2, double p3, double u) {
    return 0.5 * (2.0 * p1 + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

struct AxisPos {
    long i0 = 0;
    double f = 0.0;
};

AxisPos locate(double x, double c0, double w, std::size_t n) {
    if (n == 1) return {0, 0.0};
    double u = (x - c0) / w;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    long i0 = std::min(static_cast<long>(std::floor(u)), static_cast<long>(n) - 2);
    return {i0, u - static_cast<double>(i0)};
}

const char* kNames[4] = {"b11", "b12", "b21", "b22"};

}  // namespace

std::optional<std::pair<std::size_t, std::size_t>> bin_of(const BinGrid& g, const Vec2& y) {
    const long i = axis_bin(y[0], g.lo1, g.hi1, g.n1);
    const long j = axis_bin(y[1], g.lo2, g.hi2, g.n2);
    if (i < 0 || j < 0) return std::nullopt;
    return std::make_pair(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
}

BinAssignment bin_assign(const std::vector<Vec2>& y, const BinGrid& g) {
    g.validate();
    BinAssignment a;
    a.members.resize(g.size());
    for (std::size_t q = 0; q < y.size(); ++q) {
        const auto b = bin_of(g, y[q]);
        if (!b) {
            a.outside.push_back(q);
            continue;
        }
        a.members[b->second * g.n1 + b->first].push_back(q);
    }
    return a;
}

CoeffArray local_means(const BinAssignment& bins, const SnapshotTable& snap, int k, int l, double sigma_k) {
    if (snap.d.empty()) throw std::invalid_argument("local means of an empty snapshot");
    if (k < 0 || k > 1 || l < 0 || l > 1) throw std::invalid_argument("channel index out of range");
    CoeffArray out(bins.members.size(), 0.0);
    if (sigma_k == 0.0) return out;
    double global = 0.0;
    for (const auto& d : snap.d) global += d[k][l];
    global = sigma_k * global / static_cast<double>(snap.d.size());
    for (std::size_t b = 0; b < out.size(); ++b) {
        const auto& m = bins.members[b];
        if (m.empty()) {
            out[b] = global;
            continue;
        }
        double s = 0.0;
        for (std::size_t q : m) s += snap.d[q][k][l];
        out[b] = sigma_k * s / static_cast<double>(m.size());
    }
    return out;
}

CoeffArray smooth(const CoeffArray& raw, std::size_t n1, std::size_t n2, int r) {
    if (r < 0) throw std::invalid_argument("smoothing radius must be >= 0");
    if (raw.size() != n1 * n2) throw std::invalid_argument("array size does not match the bin grid");
    if (r == 0) return raw;
    const long w = 2L * r + 1;
    const double norm = 1.0 / static_cast<double>(w * w);
    CoeffArray out(raw.size());
    const long ln1 = static_cast<long>(n1);
    const long ln2 = static_cast<long>(n2);
    for (long j = 0; j < ln2; ++j) {
        for (long i = 0; i < ln1; ++i) {
            double s = 0.0;
            for (long dj = -r; dj <= r; ++dj) {
                const long jj = std::clamp(j + dj, 0L, ln2 - 1);
                for (long di = -r; di <= r; ++di) {
                    const long ii = std::clamp(i + di, 0L, ln1 - 1);
                    s += raw[static_cast<std::size_t>(jj * ln1 + ii)];
                }
            }
            out[static_cast<std::size_t>(j * ln1 + i)] = s * norm;
        }
    }
    return out;
}

CoefficientField estimate(const EnsembleResult& ens, const Vec2& sigma, const DlmmOptions& opts) {
    opts.grid.validate();
    if (opts.radius < 0) throw ConfigError("dlmm.radius must be >= 0");
    if (ens.snapshots.empty()) throw MissingInputError("ensemble has no snapshots");
    CoefficientField f;
    f.grid = opts.grid;
    f.radius = opts.radius;
    f.n_samples = ens.n_samples;
    f.seed = ens.master_seed;
    f.model = ens.model;
    f.sigma = sigma;
    f.mirrored = opts.mirror;
    f.snapshots.resize(ens.snapshots.size());

    parallel_for(ens.snapshots.size(), opts.threads, [&](unsigned, std::size_t k) {
        const SnapshotTable* snap = &ens.snapshots[k];
        SnapshotTable mirrored;
        if (opts.mirror) {
            mirrored = *snap;
            for (std::size_t q = 0; q < snap->y.size(); ++q) {
                mirrored.sample.push_back(snap->sample[q]);
                mirrored.y.push_back(Vec2{-snap->y[q][0], -snap->y[q][1]});
                mirrored.d.push_back(snap->d[q]);
            }
            snap = &mirrored;
        }
        if (snap->y.empty()) throw NumericalError("no valid samples at snapshot " + std::to_string(k));
        const BinAssignment bins = bin_assign(snap->y, opts.grid);
        CoefficientSnapshot& c = f.snapshots[k];
        c.time = snap->time;
        c.outside = bins.outside.size();
        c.n_used = snap->y.size();
        c.counts.resize(bins.members.size());
        for (std::size_t b = 0; b < bins.members.size(); ++b) c.counts[b] = bins.members[b].size();
        for (int ch = 0; ch < 4; ++ch) {
            const int kk = ch / 2;
            const int ll = ch % 2;
            c.raw[ch] = local_means(bins, *snap, kk, ll, sigma[kk]);
            c.smoothed[ch] = smooth(c.raw[ch], opts.grid.n1, opts.grid.n2, opts.radius);
        }
    });
    return f;
}

CoeffSet interpolate_snapshot(const CoefficientField& f, std::size_t k, const GridGeometry& geom,
                              Interp method) {
    if (k >= f.snapshots.size()) throw std::out_of_range("snapshot index out of range");
    const BinGrid& g = f.grid;
    const auto& snap = f.snapshots[k];
    CoeffSet out;
    for (auto& b : out.b) b.assign(geom.size(), 0.0);
    const long n1 = static_cast<long>(g.n1);
    const long n2 = static_cast<long>(g.n2);
    auto val = [&](const CoeffArray& a, long i, long j) {
        i = std::clamp(i, 0L, n1 - 1);
        j = std::clamp(j, 0L, n2 - 1);
        return a[static_cast<std::size_t>(j * n1 + i)];
    };
    for (std::size_t j = 0; j < geom.n2; ++j) {
        const AxisPos pj = locate(geom.y2(j), g.center2(0), g.w2(), g.n2);
        for (std::size_t i = 0; i < geom.n1; ++i) {
            const AxisPos pi = locate(geom.y1(i), g.center1(0), g.w1(), g.n1);
            for (int ch = 0; ch < 4; ++ch) {
                const CoeffArray& a = snap.smoothed[ch];
                double v = 0.0;
                if (method == Interp::Linear) {
                    const double v00 = val(a, pi.i0, pj.i0);
                    const double v10 = val(a, pi.i0 + 1, pj.i0);
                    const double v01 = val(a, pi.i0, pj.i0 + 1);
                    const double v11 = val(a, pi.i0 + 1, pj.i0 + 1);
                    v = (1.0 - pi.f) * (1.0 - pj.f) * v00 + pi.f * (1.0 - pj.f) * v10 +
                        (1.0 - pi.f) * pj.f * v01 + pi.f * pj.f * v11;
                } else {
                    double rows[4];
                    for (long dj = -1; dj <= 2; ++dj) {
                        rows[dj + 1] = catmull_rom(val(a, pi.i0 - 1, pj.i0 + dj), val(a, pi.i0, pj.i0 + dj),
                                                   val(a, pi.i0 + 1, pj.i0 + dj), val(a, pi.i0 + 2, pj.i0 + dj),
                                                   pi.f);
                    }
                    v = catmull_rom(rows[0], rows[1], rows[2], rows[3], pj.f);
                }
                out.b[ch][j * geom.n1 + i] = v;
            }
        }
    }
    return out;
}

namespace {

// Index k with t_k <= t <= t_{k+1} and the blend weight of t_{k+1}.
std::pair<std::size_t, double> bracket(const std::vector<double>& times, double t) {
    const double eps = 1e-9 * std::max(1.0, std::fabs(times.back()));
    if (t < times.front() - eps || t > times.back() + eps) {
        throw std::out_of_range("time " + format_double(t) + " outside the coefficient field [" +
                                format_double(times.front()) + ", " + format_double(times.back()) + "]");
    }
    if (times.size() == 1) return {0, 0.0};
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    k = std::min(k, times.size() - 2);
    const double w = std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
    return {k, w};
}

void blend(const CoeffSet& a, const CoeffSet& b, double w, CoeffSet& out) {
    for (int ch = 0; ch < 4; ++ch) {
        out.b[ch].resize(a.b[ch].size());
        for (std::size_t n = 0; n < a.b[ch].size(); ++n) {
            out.b[ch][n] = (1.0 - w) * a.b[ch][n] + w * b.b[ch][n];
        }
    }
}

}  // namespace

CoeffSet interpolate(const CoefficientField& f, const GridGeometry& geom, double t, Interp method) {
    if (f.snapshots.empty()) throw std::invalid_argument("empty coefficient field");
    std::vector<double> times;
    for (const auto& s : f.snapshots) times.push_back(s.time);
    const auto [k, w] = bracket(times, t);
    const CoeffSet a = interpolate_snapshot(f, k, geom, method);
    if (w == 0.0) return a;
    const CoeffSet b = interpolate_snapshot(f, k + 1, geom, method);
    CoeffSet out;
    blend(a, b, w, out);
    return out;
}

FieldInterpolator::FieldInterpolator(const CoefficientField& f, const GridGeometry& geom, Interp method) {
    if (f.snapshots.empty()) throw std::invalid_argument("empty coefficient field");
    for (std::size_t k = 0; k < f.snapshots.size(); ++k) {
        times_.push_back(f.snapshots[k].time);
        nodes_.push_back(interpolate_snapshot(f, k, geom, method));
    }
}

void FieldInterpolator::at(double t, CoeffSet& out) const {
    const auto [k, w] = bracket(times_, t);
    if (w == 0.0 || nodes_.size() == 1) {
        out = nodes_[k];
        return;
    }
    blend(nodes_[k], nodes_[k + 1], w, out);
}

void write_field(const CoefficientField& f, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& g = f.grid;
    nlohmann::ordered_json meta;
    meta["format"] = "memfpk-coefficients";
    meta["version"] = 1;
    meta["model"] = f.model;
    meta["grid"] = {{"domain", {g.lo1, g.hi1, g.lo2, g.hi2}}, {"bins", {g.n1, g.n2}}};
    meta["radius"] = f.radius;
    meta["n_samples"] = f.n_samples;
    meta["seed"] = f.seed;
    meta["sigma"] = {f.sigma[0], f.sigma[1]};
    meta["mirrored"] = f.mirrored;
    std::vector<double> times;
    for (const auto& s : f.snapshots) times.push_back(s.time);
    meta["times"] = times;
    {
        std::ofstream os(dir / "field.json", std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / "field.json").string());
        os << meta.dump(2) << '\n';
    }
    for (std::size_t k = 0; k < f.snapshots.size(); ++k) {
        const auto& s = f.snapshots[k];
        char name[32];
        std::snprintf(name, sizeof name, "coeff_%05zu.csv", k);
        std::ofstream os(dir / name, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        nlohmann::ordered_json head;
        head["time"] = s.time;
        head["bins"] = {g.n1, g.n2};
        head["radius"] = f.radius;
        head["n_samples"] = f.n_samples;
        head["n_used"] = s.n_used;
        head["outside"] = s.outside;
        head["seed"] = f.seed;
        os << "# " << head.dump() << '\n';
        os << "i,j,y1,y2,count";
        for (const char* n : kNames) os << ',' << n;
        for (const char* n : kNames) os << ',' << n << "_s";
        os << '\n';
        for (std::size_t j = 0; j < g.n2; ++j) {
            for (std::size_t i = 0; i < g.n1; ++i) {
                const std::size_t b = j * g.n1 + i;
                os << i << ',' << j << ',' << format_double(g.center1(i)) << ',' << format_double(g.center2(j))
                   << ',' << s.counts[b];
                for (int ch = 0; ch < 4; ++ch) os << ',' << format_double(s.raw[ch][b]);
                for (int ch = 0; ch < 4; ++ch) os << ',' << format_double(s.smoothed[ch][b]);
                os << '\n';
            }
        }
    }
}

CoefficientField read_field(const std::filesystem::path& dir) {
    std::ifstream is(dir / "field.json");
    if (!is) throw MissingInputError("no coefficient field at " + dir.string() + " (run estimate first)");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error("malformed field.json: " + std::string(ex.what()));
    }
    CoefficientField f;
    const auto& dom = meta.at("grid").at("domain");
    const auto& bins = meta.at("grid").at("bins");
    f.grid = BinGrid{dom[0].get<double>(), dom[1].get<double>(), dom[2].get<double>(), dom[3].get<double>(),
                     bins[0].get<std::size_t>(), bins[1].get<std::size_t>()};
    f.radius = meta.at("radius").get<int>();
    f.n_samples = meta.at("n_samples").get<std::size_t>();
    f.seed = meta.at("seed").get<std::uint64_t>();
    f.model = meta.at("model").get<std::string>();
    f.sigma = {meta.at("sigma")[0].get<double>(), meta.at("sigma")[1].get<double>()};
    f.mirrored = meta.at("mirrored").get<bool>();
    const auto times = meta.at("times").get<std::vector<double>>();
    const std::size_t nb = f.grid.size();
    for (std::size_t k = 0; k < times.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "coeff_%05zu.csv", k);
        std::ifstream in(dir / name);
        if (!in) throw MissingInputError("missing coefficient file " + (dir / name).string());
        CoefficientSnapshot s;
        s.time = times[k];
        s.counts.assign(nb, 0);
        for (auto& a : s.raw) a.assign(nb, 0.0);
        for (auto& a : s.smoothed) a.assign(nb, 0.0);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                const auto head = nlohmann::json::parse(line.substr(1));
                s.outside = head.at("outside").get<std::size_t>();
                s.n_used = head.at("n_used").get<std::size_t>();
                continue;
            }
            if (line[0] == 'i') continue;
            std::istringstream ls(line);
            std::string cell;
            std::vector<std::string> c;
            while (std::getline(ls, cell, ',')) c.push_back(cell);
            if (c.size() != 13) throw std::runtime_error("bad row in " + (dir / name).string());
            const std::size_t i = std::stoul(c[0]);
            const std::size_t j = std::stoul(c[1]);
            if (i >= f.grid.n1 || j >= f.grid.n2) throw std::runtime_error("bin index out of range");
            const std::size_t b = j * f.grid.n1 + i;
            s.counts[b] = std::stoul(c[4]);
            for (int ch = 0; ch < 4; ++ch) {
                s.raw[ch][b] = std::stod(c[5 + ch]);
                s.smoothed[ch][b] = std::stod(c[9 + ch]);
            }
        }
        f.snapshots.push_back(std::move(s));
    }
    return f;
}

}  // namespace memfpk
