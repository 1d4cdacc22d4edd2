#include "memfpk/response_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace memfpk {

double MarginalPdf::mass() const {
    double s = 0.0;
    for (double v : densities) s += v;
    return s * spacing;
}

std::pair<MarginalPdf, MarginalPdf> marginals(const PdfGrid& p) {
    const auto& g = p.geom;
    MarginalPdf m1{1, {}, std::vector<double>(g.n1, 0.0), g.d1(), p.time};
    MarginalPdf m2{2, {}, std::vector<double>(g.n2, 0.0), g.d2(), p.time};
    for (std::size_t i = 0; i < g.n1; ++i) m1.centers.push_back(g.y1(i));
    for (std::size_t j = 0; j < g.n2; ++j) m2.centers.push_back(g.y2(j));
    for (std::size_t j = 0; j < g.n2; ++j) {
        for (std::size_t i = 0; i < g.n1; ++i) {
            const double v = p.at(i, j);
            m1.densities[i] += v * g.d2();
            m2.densities[j] += v * g.d1();
        }
    }
    return {std::move(m1), std::move(m2)};
}

Moments moments(const MarginalPdf& m) {
    double w = 0.0;
    double s1 = 0.0;
    for (std::size_t i = 0; i < m.centers.size(); ++i) {
        w += m.densities[i];
        s1 += m.densities[i] * m.centers[i];
    }
    if (!(w > 0.0)) throw std::domain_error("moments of a density with zero mass");
    const double mean = s1 / w;
    double c2 = 0.0, c3 = 0.0, c4 = 0.0;
    for (std::size_t i = 0; i < m.centers.size(); ++i) {
        const double d = m.centers[i] - mean;
        const double d2 = d * d;
        c2 += m.densities[i] * d2;
        c3 += m.densities[i] * d2 * d;
        c4 += m.densities[i] * d2 * d2;
    }
    c2 /= w;
    c3 /= w;
    c4 /= w;
    if (!(c2 > 0.0)) throw std::domain_error("moments of a density with zero variance");
    Moments r;
    r.mean = mean;
    r.std = std::sqrt(c2);
    r.skew = c3 / (c2 * r.std);
    r.kurt = c4 / (c2 * c2);
    return r;
}

std::pair<Moments, Moments> moments(const PdfGrid& p) {
    const auto m = marginals(p);
    return {moments(m.first), moments(m.second)};
}

Moments sample_moments(const std::vector<double>& x) {
    if (x.empty()) throw std::domain_error("moments of an empty sample");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double c2 = 0.0, c3 = 0.0, c4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        c2 += d * d;
        c3 += d * d * d;
        c4 += d * d * d * d;
    }
    const double n = static_cast<double>(x.size());
    c2 /= n;
    c3 /= n;
    c4 /= n;
    if (!(c2 > 0.0)) throw std::domain_error("sample with zero variance");
    Moments r;
    r.mean = mean;
    r.std = std::sqrt(c2);
    r.skew = c3 / (c2 * r.std);
    r.kurt = c4 / (c2 * c2);
    return r;
}

namespace {

// Node-centred cell index along one axis, -1 outside.
long cell_of(double y, double lo, double d, std::size_t n) {
    const double u = (y - lo) / d + 0.5;
    if (!(u >= 0.0)) return -1;
    const double f = std::floor(u);
    if (f >= static_cast<double>(n)) return -1;
    return static_cast<long>(f);
}

}  // namespace

PdfGrid histogram2d(const std::vector<Vec2>& samples, const GridGeometry& geom, double time) {
    PdfGrid p(geom, time);
    if (samples.empty()) return p;
    const double w = 1.0 / (static_cast<double>(samples.size()) * geom.cell_area());
    for (const auto& y : samples) {
        const long i = cell_of(y[0], geom.lo1, geom.d1(), geom.n1);
        const long j = cell_of(y[1], geom.lo2, geom.d2(), geom.n2);
        if (i < 0 || j < 0) continue;
        p.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) += w;
    }
    return p;
}

MarginalPdf histogram1d(const std::vector<Vec2>& samples, const GridGeometry& geom, int axis, double time) {
    if (axis != 1 && axis != 2) throw std::invalid_argument("axis must be 1 or 2");
    const std::size_t n = axis == 1 ? geom.n1 : geom.n2;
    const double d = axis == 1 ? geom.d1() : geom.d2();
    MarginalPdf m{axis, {}, std::vector<double>(n, 0.0), d, time};
    for (std::size_t k = 0; k < n; ++k) m.centers.push_back(axis == 1 ? geom.y1(k) : geom.y2(k));
    if (samples.empty()) return m;
    const double w = 1.0 / (static_cast<double>(samples.size()) * d);
    for (const auto& y : samples) {
        // a sample counts only if it lies inside the 2D grid, as in histogram2d
        const long i = cell_of(y[0], geom.lo1, geom.d1(), geom.n1);
        const long j = cell_of(y[1], geom.lo2, geom.d2(), geom.n2);
        if (i < 0 || j < 0) continue;
        m.densities[static_cast<std::size_t>(axis == 1 ? i : j)] += w;
    }
    return m;
}

CompareMetrics compare(const PdfGrid& a, const PdfGrid& b, double threshold) {
    if (!a.geom.matches(b.geom) || a.values.size() != b.values.size()) {
        throw std::invalid_argument("compare: grid geometries differ");
    }
    CompareMetrics m;
    double l1 = 0.0;
    for (std::size_t n = 0; n < a.values.size(); ++n) {
        const double d = std::fabs(a.values[n] - b.values[n]);
        m.max_abs = std::max(m.max_abs, d);
        l1 += d;
        if (a.values[n] > threshold && b.values[n] > threshold) {
            m.log_tail_max_abs =
                std::max(m.log_tail_max_abs, std::fabs(std::log10(a.values[n]) - std::log10(b.values[n])));
            ++m.log_tail_points;
        }
    }
    m.l1 = l1 * a.geom.cell_area();
    return m;
}

double marginal_l1(const MarginalPdf& a, const MarginalPdf& b) {
    if (a.densities.size() != b.densities.size()) throw std::invalid_argument("marginal sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k < a.densities.size(); ++k) s += std::fabs(a.densities[k] - b.densities[k]);
    return s * a.spacing;
}

std::vector<std::size_t> local_maxima(const MarginalPdf& m, double rel_threshold) {
    std::vector<std::size_t> out;
    const auto& d = m.densities;
    if (d.size() < 3) return out;
    const double mx = *std::max_element(d.begin(), d.end());
    for (std::size_t k = 1; k + 1 < d.size(); ++k) {
        // plateaus count once, at their left end
        if (d[k] > d[k - 1] && d[k] >= d[k + 1] && d[k] > rel_threshold * mx) {
            std::size_t e = k;
            while (e + 1 < d.size() && d[e + 1] == d[k]) ++e;
            if (e + 1 < d.size() && d[e + 1] < d[k]) out.push_back(k);
            k = e;
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> local_maxima(const PdfGrid& p, double rel_threshold) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const auto& g = p.geom;
    const double mx = p.max_value();
    for (std::size_t j = 1; j + 1 < g.n2; ++j) {
        for (std::size_t i = 1; i + 1 < g.n1; ++i) {
            const double v = p.at(i, j);
            if (!(v > rel_threshold * mx)) continue;
            bool peak = true;
            for (int dj = -1; dj <= 1 && peak; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    if (!di && !dj) continue;
                    const double u = p.at(i + di, j + dj);
                    // strictly greater than later neighbours, >= earlier ones
                    const bool earlier = dj < 0 || (dj == 0 && di < 0);
                    if (earlier ? u >= v : u > v) {
                        peak = false;
                        break;
                    }
                }
            }
            if (peak) out.emplace_back(i, j);
        }
    }
    return out;
}

namespace {

// Persistence of superlevel sets: nodes enter from the top; when a node joins
// two components the one with the lower peak dies there.
template <class Neighbours>
std::vector<Mode> persistent_modes(const std::vector<double>& v, Neighbours&& nb, double min_prominence) {
    const std::size_t n = v.size();
    std::vector<Mode> out;
    if (n == 0) return out;
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

    const std::size_t none = n;
    std::vector<std::size_t> parent(n, none), peak(n, none);
    auto find = [&](std::size_t k) {
        while (parent[k] != k) k = parent[k] = parent[parent[k]];
        return k;
    };
    std::vector<std::size_t> adj;
    for (std::size_t k : order) {
        parent[k] = k;
        peak[k] = k;
        adj.clear();
        nb(k, adj);
        for (std::size_t q : adj) {
            if (parent[q] == none) continue;
            std::size_t a = find(k), b = find(q);
            if (a == b) continue;
            // a keeps the higher peak; earlier in `order` wins ties
            if (v[peak[b]] > v[peak[a]] || (v[peak[b]] == v[peak[a]] && peak[b] < peak[a])) std::swap(a, b);
            if (peak[b] != k) out.push_back({peak[b], v[peak[b]], v[peak[b]] - v[k]});
            parent[b] = a;
        }
    }
    const double lo = v[order.back()];
    const std::size_t top = peak[find(order.front())];
    out.push_back({top, v[top], v[top] - lo});

    const double floor = min_prominence * v[top];
    std::vector<Mode> kept;
    for (const auto& m : out) {
        if (m.prominence > 0.0 && m.prominence >= floor) kept.push_back(m);
    }
    std::sort(kept.begin(), kept.end(), [](const Mode& a, const Mode& b) {
        return a.value != b.value ? a.value > b.value : a.index < b.index;
    });
    return kept;
}

}  // namespace

std::vector<Mode> modes(const MarginalPdf& m, double min_prominence) {
    const std::size_t n = m.densities.size();
    return persistent_modes(
        m.densities,
        [n](std::size_t k, std::vector<std::size_t>& adj) {
            if (k > 0) adj.push_back(k - 1);
            if (k + 1 < n) adj.push_back(k + 1);
        },
        min_prominence);
}

std::vector<Mode> modes(const PdfGrid& p, double min_prominence) {
    const std::size_t n1 = p.geom.n1;
    const std::size_t n2 = p.geom.n2;
    return persistent_modes(
        p.values,
        [n1, n2](std::size_t k, std::vector<std::size_t>& adj) {
            const std::size_t i = k % n1, j = k / n1;
            for (int dj = -1; dj <= 1; ++dj) {
                for (int di = -1; di <= 1; ++di) {
                    if (!di && !dj) continue;
                    const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
                    if (ii < 0 || jj < 0 || ii >= static_cast<long>(n1) || jj >= static_cast<long>(n2)) continue;
                    adj.push_back(static_cast<std::size_t>(jj) * n1 + static_cast<std::size_t>(ii));
                }
            }
        },
        min_prominence);
}

bool is_bimodal(const MarginalPdf& m, double min_prominence) { return modes(m, min_prominence).size() >= 2; }

void MomentSeries::add(const PdfGrid& p) {
    const auto m = moments(p);
    times.push_back(p.time);
    y1.push_back(m.first);
    y2.push_back(m.second);
}

void write_marginals_csv(const std::pair<MarginalPdf, MarginalPdf>& m, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "# time," << format_double(m.first.time) << '\n';
    os << "axis,y,density\n";
    for (const auto* mp : {&m.first, &m.second}) {
        for (std::size_t k = 0; k < mp->centers.size(); ++k) {
            os << mp->axis << ',' << format_double(mp->centers[k]) << ',' << format_double(mp->densities[k])
               << '\n';
        }
    }
}

void write_moments_csv(const MomentSeries& s, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "t,mean1,std1,skew1,kurt1,mean2,std2,skew2,kurt2\n";
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        const auto& a = s.y1[k];
        const auto& b = s.y2[k];
        os << format_double(s.times[k]) << ',' << format_double(a.mean) << ',' << format_double(a.std) << ','
           << format_double(a.skew) << ',' << format_double(a.kurt) << ',' << format_double(b.mean) << ','
           << format_double(b.std) << ',' << format_double(b.skew) << ',' << format_double(b.kurt) << '\n';
    }
}

}  // namespace memfpk
