#pragma once

// Discretized local mean method: conditional means of Malliavin samples over
// state-space bins, with empty-bin fallback, uniform-kernel smoothing and
// interpolation onto a finer grid.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "memfpk/linalg.hpp"
#include "memfpk/path_simulator.hpp"
#include "memfpk/pdf_grid.hpp"

namespace memfpk {

/// n1 x n2 rectangular bins over a domain.
struct BinGrid {
    double lo1 = -1.0, hi1 = 1.0, lo2 = -1.0, hi2 = 1.0;
    std::size_t n1 = 30, n2 = 30;

    void validate() const;
    double w1() const { return (hi1 - lo1) / static_cast<double>(n1); }
    double w2() const { return (hi2 - lo2) / static_cast<double>(n2); }
    double center1(std::size_t i) const { return lo1 + (static_cast<double>(i) + 0.5) * w1(); }
    double center2(std::size_t j) const { return lo2 + (static_cast<double>(j) + 0.5) * w2(); }
    std::size_t size() const { return n1 * n2; }
};

/// Bin (i, j) containing y, or nothing when y lies outside the domain.
/// Cells are [edge_low, edge_high) except the last one per axis, which is
/// closed, so a point on an interior edge belongs to the upper cell.
std::optional<std::pair<std::size_t, std::size_t>> bin_of(const BinGrid& g, const Vec2& y);

struct BinAssignment {
    std::vector<std::vector<std::size_t>> members;  // per bin j * n1 + i: row indices into the snapshot
    std::vector<std::size_t> outside;
};

BinAssignment bin_assign(const std::vector<Vec2>& y, const BinGrid& g);

/// Row-major j * n1 + i.
using CoeffArray = std::vector<double>;

/// Per-bin mean of sigma_k d_{k,l}; empty bins get the mean over every sample
/// (in or out of the domain). k, l are 0-based channel and component indices.
/// Throws std::invalid_argument for an empty snapshot.
CoeffArray local_means(const BinAssignment& bins, const SnapshotTable& snap, int k, int l, double sigma_k);

/// Uniform (2r+1)^2 moving average with nearest-edge replication.
CoeffArray smooth(const CoeffArray& raw, std::size_t n1, std::size_t n2, int r);

struct CoefficientSnapshot {
    double time = 0.0;
    std::array<CoeffArray, 4> raw;  // b11, b12, b21, b22
    std::array<CoeffArray, 4> smoothed;
    std::vector<std::size_t> counts;
    std::size_t outside = 0;
    std::size_t n_used = 0;  // non-divergent samples (mirrored copies included)
};

struct CoefficientField {
    BinGrid grid;
    int radius = 1;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    std::string model;
    Vec2 sigma{0.0, 0.0};
    bool mirrored = false;
    std::vector<CoefficientSnapshot> snapshots;

    double first_time() const { return snapshots.front().time; }
    double last_time() const { return snapshots.back().time; }
};

struct DlmmOptions {
    BinGrid grid;
    int radius = 1;
    /// Adds (-Y, D) for every sample; valid for odd drifts driven by symmetric noise.
    bool mirror = false;
    unsigned threads = 0;
};

CoefficientField estimate(const EnsembleResult& ens, const Vec2& sigma, const DlmmOptions& opts);

enum class Interp { Linear, Cubic };

struct CoeffSet {
    std::array<std::vector<double>, 4> b;  // b11, b12, b21, b22 on solver nodes, j * n1 + i
};

/// Spatial interpolation of one snapshot's smoothed field onto the node grid:
/// bilinear (or Catmull-Rom) from bin centers, constant outside the center hull.
CoeffSet interpolate_snapshot(const CoefficientField& f, std::size_t k, const GridGeometry& geom,
                              Interp method = Interp::Linear);

/// Field at time t, linear in time between snapshots. Throws
/// std::out_of_range outside [first_time, last_time].
CoeffSet interpolate(const CoefficientField& f, const GridGeometry& geom, double t,
                     Interp method = Interp::Linear);

/// Caches per-snapshot spatial interpolation for repeated time queries.
class FieldInterpolator {
public:
    FieldInterpolator(const CoefficientField& f, const GridGeometry& geom, Interp method = Interp::Linear);
    void at(double t, CoeffSet& out) const;
    double first_time() const { return times_.front(); }
    double last_time() const { return times_.back(); }

private:
    std::vector<double> times_;
    std::vector<CoeffSet> nodes_;
};

/// `field.json` (grid, r, N, seed, snapshot times) plus `coeff_<k>.csv` per
/// snapshot. Each CSV starts with a `# {json}` metadata line followed by the
/// columns i,j,y1,y2,count,b11,b12,b21,b22,b11_s,b12_s,b21_s,b22_s.
void write_field(const CoefficientField& f, const std::filesystem::path& dir);
CoefficientField read_field(const std::filesystem::path& dir);

}  // namespace memfpk
