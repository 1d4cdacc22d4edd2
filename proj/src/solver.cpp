#include "memfpk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "memfpk/errors.hpp"

namespace memfpk {

void SolverGrid::validate() const {
    geom.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("solver.dt must be positive");
    if (!(t_end > 0.0)) throw ConfigError("solver.t_end must be positive");
    const double r = t_end / dt;
    if (std::fabs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
        throw ConfigError("solver.t_end must be a multiple of solver.dt");
    }
    for (double t : report_times) {
        if (t < 0.0 || t > t_end * (1.0 + 1e-12)) {
            throw ConfigError("report time " + format_double(t) + " outside [0, t_end]");
        }
        step_of(t);
    }
}

std::size_t SolverGrid::n_steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

std::size_t SolverGrid::step_of(double t) const {
    const double r = t / dt;
    const double n = std::round(r);
    if (std::fabs(r - n) > 1e-9 * std::max(1.0, n)) {
        throw ConfigError("report time " + format_double(t) + " is not a multiple of solver.dt");
    }
    return static_cast<std::size_t>(n);
}

ConstantSource::ConstantSource(const GridGeometry& geom, double b11, double b12, double b21, double b22,
                               std::string name)
    : name_(std::move(name)) {
    const double v[4] = {b11, b12, b21, b22};
    for (int ch = 0; ch < 4; ++ch) values_.b[ch].assign(geom.size(), v[ch]);
}

void ConstantSource::at(double, CoeffSet& out) { out = values_; }

double ConstantSource::horizon() const { return std::numeric_limits<double>::infinity(); }

std::unique_ptr<CoefficientSource> make_gwn_source(const GridGeometry& geom, const Vec2& sigma) {
    return std::make_unique<ConstantSource>(geom, 0.5 * sigma[0] * sigma[0], 0.0, 0.0,
                                            0.5 * sigma[1] * sigma[1], "gwn");
}

LinearSource::LinearSource(const GridGeometry& geom, const LinearSystem& sys, double dt, std::size_t n_steps,
                           std::size_t substeps)
    : size_(geom.size()), dt_(dt), table_(linear_coeff_table(sys, dt, n_steps, substeps)) {}

void LinearSource::at(double t, CoeffSet& out) {
    const double r = t / dt_;
    const double last = static_cast<double>(table_.size() - 1);
    if (r < -1e-9 || r > last + 1e-9) {
        throw std::out_of_range("time " + format_double(t) + " outside the analytic coefficient table");
    }
    const double rc = std::clamp(r, 0.0, last);
    const auto n = std::min(static_cast<std::size_t>(rc), table_.size() - 1);
    const double w = n + 1 < table_.size() ? rc - static_cast<double>(n) : 0.0;
    const LinearCoeffs& a = table_[n];
    const LinearCoeffs& b = table_[std::min(n + 1, table_.size() - 1)];
    const double v[4] = {(1 - w) * a.b11 + w * b.b11, (1 - w) * a.b12 + w * b.b12, (1 - w) * a.b21 + w * b.b21,
                         (1 - w) * a.b22 + w * b.b22};
    for (int ch = 0; ch < 4; ++ch) out.b[ch].assign(size_, v[ch]);
}

DlmmSource::DlmmSource(const CoefficientField& field, const GridGeometry& geom, Interp method)
    : interp_(field, geom, method) {}

void DlmmSource::at(double t, CoeffSet& out) { interp_.at(t, out); }

PdfGrid initial_pdf(const GaussianInit& init, const GridGeometry& geom) {
    geom.validate();
    if (!(init.var > 0.0)) throw ConfigError("initial variance must be positive");
    PdfGrid p = gaussian_pdf(init.mean, init.covariance(), geom, 0.0);
    for (std::size_t i = 0; i < geom.n1; ++i) {
        p.at(i, 0) = 0.0;
        p.at(i, geom.n2 - 1) = 0.0;
    }
    for (std::size_t j = 0; j < geom.n2; ++j) {
        p.at(0, j) = 0.0;
        p.at(geom.n1 - 1, j) = 0.0;
    }
    const double m = p.mass();
    if (m < 0.999) {
        throw ConfigError("solver grid holds only " + format_double(m) + " of the initial mass");
    }
    for (double& v : p.values) v /= m;
    return p;
}

DriftArrays drift_arrays(const SystemModel& model, const GridGeometry& geom) {
    DriftArrays a;
    a.a1.resize(geom.size());
    a.a2.resize(geom.size());
    for (std::size_t j = 0; j < geom.n2; ++j) {
        for (std::size_t i = 0; i < geom.n1; ++i) {
            const Vec2 f = model.drift({geom.y1(i), geom.y2(j)});
            a.a1[j * geom.n1 + i] = f[0];
            a.a2[j * geom.n1 + i] = f[1];
        }
    }
    return a;
}

double cfl_limit(const GridGeometry& geom, const DriftArrays& a, const CoeffSet& b) {
    const double d1 = geom.d1();
    const double d2 = geom.d2();
    double worst = 0.0;
    for (std::size_t n = 0; n < geom.size(); ++n) {
        const double r = 2.0 * std::fabs(b.b[0][n]) / (d1 * d1) + 2.0 * std::fabs(b.b[3][n]) / (d2 * d2) +
                         std::fabs(b.b[1][n] + b.b[2][n]) / (d1 * d2) + std::fabs(a.a1[n]) / d1 +
                         std::fabs(a.a2[n]) / d2;
        worst = std::max(worst, r);
    }
    return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

void step(const PdfGrid& p, const DriftArrays& a, const CoeffSet& b, double dt, PdfGrid& out, bool upwind,
          int order) {
    if (order != 2 && order != 4) throw std::invalid_argument("advection order must be 2 or 4");
    const auto& g = p.geom;
    const std::size_t n1 = g.n1;
    const std::size_t n2 = g.n2;
    const std::size_t size = g.size();
    if (a.a1.size() != size || b.b[0].size() != size) throw std::invalid_argument("coefficient size mismatch");
    const double d1 = g.d1();
    const double d2 = g.d2();

    // Flux products, reused across the stencil.
    std::vector<double> f1(size), f2(size), g11(size), g22(size), gx(size);
    for (std::size_t n = 0; n < size; ++n) {
        const double v = p.values[n];
        f1[n] = a.a1[n] * v;
        f2[n] = a.a2[n] * v;
        g11[n] = b.b[0][n] * v;
        g22[n] = b.b[3][n] * v;
        gx[n] = (b.b[1][n] + b.b[2][n]) * v;
    }

    if (out.values.size() != size) out = PdfGrid(g, p.time);
    out.geom = g;
    out.time = p.time + dt;
    std::fill(out.values.begin(), out.values.end(), 0.0);

    const double c1 = 1.0 / (2.0 * d1);
    const double c2 = 1.0 / (2.0 * d2);
    const double e1 = 1.0 / (d1 * d1);
    const double e2 = 1.0 / (d2 * d2);
    const double ex = 1.0 / (4.0 * d1 * d2);
    // fourth-order first derivative: (f[-2] - 8f[-1] + 8f[1] - f[2]) / 12d
    const double q1 = 1.0 / (12.0 * d1);
    const double q2 = 1.0 / (12.0 * d2);

    // Donor-cell face flux between nodes l and r along one axis.
    auto face = [&](const std::vector<double>& av, std::size_t l, std::size_t r) {
        const double af = 0.5 * (av[l] + av[r]);
        return af > 0.0 ? af * p.values[l] : af * p.values[r];
    };

    for (std::size_t j = 1; j + 1 < n2; ++j) {
        for (std::size_t i = 1; i + 1 < n1; ++i) {
            const std::size_t n = j * n1 + i;
            double adv;
            if (upwind) {
                adv = (face(a.a1, n, n + 1) - face(a.a1, n - 1, n)) / d1 +
                      (face(a.a2, n, n + n1) - face(a.a2, n - n1, n)) / d2;
            } else {
                adv = (f1[n + 1] - f1[n - 1]) * c1 + (f2[n + n1] - f2[n - n1]) * c2;
            }
            if (order == 4 && !upwind && i >= 2 && j >= 2 && i + 2 < n1 && j + 2 < n2) {
                const std::size_t m = 2 * n1;
                adv = (8.0 * (f1[n + 1] - f1[n - 1]) - (f1[n + 2] - f1[n - 2])) * q1 +
                      (8.0 * (f2[n + n1] - f2[n - n1]) - (f2[n + m] - f2[n - m])) * q2;
            }
            const double diff = (g11[n + 1] - 2.0 * g11[n] + g11[n - 1]) * e1 +
                                (g22[n + n1] - 2.0 * g22[n] + g22[n - n1]) * e2 +
                                (gx[n + n1 + 1] - gx[n - n1 + 1] - gx[n + n1 - 1] + gx[n - n1 - 1]) * ex;
            out.values[n] = p.values[n] + dt * (diff - adv);
        }
    }
}

SolveResult solve(const SystemModel& model, CoefficientSource& source, const SolverGrid& grid,
                  const SolverOptions& opts) {
    grid.validate();
    const std::size_t n_steps = grid.n_steps();
    if (source.horizon() < grid.t_end - 1e-9 * grid.t_end) {
        throw std::out_of_range("coefficient source '" + source.name() + "' covers t <= " +
                                format_double(source.horizon()) + " but the solver runs to " +
                                format_double(grid.t_end));
    }

    SolveResult res;
    res.scheme = std::string("forward-euler/") + (opts.upwind ? "upwind" : opts.order == 4 ? "central4" : "central") +
                 "/dirichlet";
    std::vector<std::size_t> report_steps;
    for (double t : grid.report_times) report_steps.push_back(grid.step_of(t));
    res.pdfs.resize(report_steps.size());
    res.records.resize(report_steps.size());

    const DriftArrays drift = drift_arrays(model, grid.geom);
    PdfGrid p = initial_pdf(model.init, grid.geom);
    PdfGrid next(grid.geom, 0.0);
    CoeffSet coeffs;
    double clamped = 0.0;
    double renorm_log = 0.0;
    double min_cfl = std::numeric_limits<double>::infinity();
    res.min_ratio = 0.0;

    auto record = [&](std::size_t n) {
        for (std::size_t r = 0; r < report_steps.size(); ++r) {
            if (report_steps[r] != n) continue;
            res.pdfs[r] = p;
            res.pdfs[r].time = grid.report_times[r];
            auto& rec = res.records[r];
            rec.time = grid.report_times[r];
            rec.mass = p.mass();
            rec.min_value = p.min_value();
            rec.max_value = p.max_value();
            rec.clamped_mass = clamped;
            rec.renorm_log = renorm_log;
            rec.cfl_dt = min_cfl;
        }
    };

    auto refresh = [&](double t) {
        source.at(t, coeffs);
        for (const auto& c : coeffs.b) {
            if (c.size() != grid.geom.size()) throw std::invalid_argument("coefficient source size mismatch");
        }
        const double lim = cfl_limit(grid.geom, drift, coeffs);
        min_cfl = std::min(min_cfl, lim);
        if (opts.check_cfl && grid.dt > lim) {
            throw NumericalError("CFL monitor: stable step estimate " + format_double(lim) + " at t = " +
                                 format_double(t) + " is below solver.dt = " + format_double(grid.dt));
        }
    };

    if (!source.time_dependent()) refresh(0.0);
    record(0);
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t = static_cast<double>(n) * grid.dt;
        if (source.time_dependent()) refresh(t);
        step(p, drift, coeffs, grid.dt, next, opts.upwind, opts.order);
        next.time = static_cast<double>(n + 1) * grid.dt;
        std::swap(p, next);

        if (opts.clamp) {
            for (double& v : p.values) {
                if (v < 0.0) {
                    clamped -= v * grid.geom.cell_area();
                    v = 0.0;
                }
            }
        }
        double mass = p.mass();
        if (!std::isfinite(mass)) {
            throw NumericalError("non-finite density at t = " + format_double(p.time));
        }
        if (opts.renormalize && mass > 0.0) {
            for (double& v : p.values) v /= mass;
            renorm_log += std::log(mass);
            mass = 1.0;
        }
        res.max_mass_drift = std::max(res.max_mass_drift, std::fabs(mass - 1.0));
        const double mx = p.max_value();
        if (mx > 0.0) res.min_ratio = std::min(res.min_ratio, p.min_value() / mx);
        record(n + 1);
    }
    res.steps = n_steps;
    return res;
}

}  // namespace memfpk
