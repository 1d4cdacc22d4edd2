#pragma once

// Explicit finite-difference solver for
//   dp/dt = -sum_i d/dy_i (a_i p) + sum_ij d^2/(dy_i dy_j) (b_ij p)
// on a rectangle with p = 0 on the boundary.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "memfpk/dlmm.hpp"
#include "memfpk/linear_reference.hpp"
#include "memfpk/model.hpp"
#include "memfpk/pdf_grid.hpp"

namespace memfpk {

struct SolverGrid {
    GridGeometry geom;
    double dt = 1e-3;
    double t_end = 1.0;
    std::vector<double> report_times;

    /// Throws ConfigError for bad spacing, dt, or report times that are not
    /// multiples of dt inside [0, t_end].
    void validate() const;
    std::size_t n_steps() const;
    std::size_t step_of(double t) const;
};

struct SolverOptions {
    bool clamp = false;  // zero out negative values after each step
    bool renormalize = false;  // rescale to unit mass after each step
    bool upwind = false;  // donor-cell advection instead of central differences
    int order = 2;  // central advection stencil order, 2 or 4 (4 drops to 2 next to the boundary)
    bool check_cfl = true;
};

/// Diffusion coefficients on the solver nodes at a given time.
class CoefficientSource {
public:
    virtual ~CoefficientSource() = default;
    virtual void at(double t, CoeffSet& out) = 0;
    /// Constant sources are evaluated once.
    virtual bool time_dependent() const { return true; }
    virtual std::string name() const = 0;
    /// Largest time the source covers.
    virtual double horizon() const = 0;
};

/// Spatially and temporally constant coefficients.
class ConstantSource : public CoefficientSource {
public:
    ConstantSource(const GridGeometry& geom, double b11, double b12, double b21, double b22,
                   std::string name = "constant");
    void at(double t, CoeffSet& out) override;
    bool time_dependent() const override { return false; }
    std::string name() const override { return name_; }
    double horizon() const override;

private:
    CoeffSet values_;
    std::string name_;
};

/// White-noise diffusion diag(sigma_1^2, sigma_2^2)/2.
std::unique_ptr<CoefficientSource> make_gwn_source(const GridGeometry& geom, const Vec2& sigma);

/// Exact linear coefficients tabulated at the solver steps.
class LinearSource : public CoefficientSource {
public:
    LinearSource(const GridGeometry& geom, const LinearSystem& sys, double dt, std::size_t n_steps,
                 std::size_t substeps = 8);
    void at(double t, CoeffSet& out) override;
    std::string name() const override { return "analytic"; }
    double horizon() const override { return dt_ * static_cast<double>(table_.size() - 1); }

private:
    std::size_t size_ = 0;
    double dt_ = 0.0;
    std::vector<LinearCoeffs> table_;
};

/// DLMM field, interpolated in space and linearly in time.
class DlmmSource : public CoefficientSource {
public:
    DlmmSource(const CoefficientField& field, const GridGeometry& geom, Interp method = Interp::Linear);
    void at(double t, CoeffSet& out) override;
    std::string name() const override { return "dlmm"; }
    double horizon() const override { return interp_.last_time(); }

private:
    FieldInterpolator interp_;
};

/// Gaussian initial density at the nodes, zero on the boundary, scaled to
/// unit grid mass. Throws ConfigError when less than 0.999 of the mass lies
/// on the grid before scaling.
PdfGrid initial_pdf(const GaussianInit& init, const GridGeometry& geom);

struct DriftArrays {
    std::vector<double> a1, a2;
};

DriftArrays drift_arrays(const SystemModel& model, const GridGeometry& geom);

/// Largest stable step by the monitor
///   1 / max(2|b11|/d1^2 + 2|b22|/d2^2 + |b12+b21|/(d1 d2) + |a1|/d1 + |a2|/d2).
double cfl_limit(const GridGeometry& geom, const DriftArrays& a, const CoeffSet& b);

/// One forward-Euler step; boundary nodes of `out` are set to 0.
/// Diffusion always uses three-point and four-point cross stencils; `order`
/// only selects the central advection stencil and is ignored with upwind.
void step(const PdfGrid& p, const DriftArrays& a, const CoeffSet& b, double dt, PdfGrid& out,
          bool upwind = false, int order = 2);

struct ReportRecord {
    double time = 0.0;
    double mass = 0.0;
    double min_value = 0.0;
    double max_value = 0.0;
    double clamped_mass = 0.0;  // cumulative mass added by clamping
    double renorm_log = 0.0;  // cumulative log of renormalisation factors
    double cfl_dt = 0.0;  // smallest monitor value so far
};

struct SolveResult {
    std::vector<PdfGrid> pdfs;  // one per report time
    std::vector<ReportRecord> records;
    double max_mass_drift = 0.0;  // max |mass - 1| over all steps
    double min_ratio = 0.0;  // min over steps of min(p) / max(p)
    std::size_t steps = 0;
    std::string scheme;
};

/// Marches initial_pdf(model.init) to grid.t_end. Throws NumericalError on a
/// CFL violation or non-finite values, std::out_of_range if the source does
/// not cover the horizon.
SolveResult solve(const SystemModel& model, CoefficientSource& source, const SolverGrid& grid,
                  const SolverOptions& opts = {});

}  // namespace memfpk
