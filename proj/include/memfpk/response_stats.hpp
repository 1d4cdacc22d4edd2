#pragma once

// Marginals, moments, histogram references and error metrics for PdfGrids.

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "memfpk/linalg.hpp"
#include "memfpk/pdf_grid.hpp"

namespace memfpk {

struct MarginalPdf {
    int axis = 1;  // 1 or 2
    std::vector<double> centers;
    std::vector<double> densities;
    double spacing = 0.0;
    double time = 0.0;

    double mass() const;
};

/// Riemann sums of the node values along the other axis.
std::pair<MarginalPdf, MarginalPdf> marginals(const PdfGrid& p);

struct Moments {
    double mean = 0.0;
    double std = 0.0;
    double skew = 0.0;
    double kurt = 0.0;  // raw fourth standardised moment, 3 for a Gaussian
};

/// Moments of the normalised density. Throws std::domain_error for zero mass
/// or zero variance.
Moments moments(const MarginalPdf& m);
std::pair<Moments, Moments> moments(const PdfGrid& p);

/// Sample moments of raw data (population normalisation).
Moments sample_moments(const std::vector<double>& x);

/// Counts in node-centred cells [y_i - d/2, y_i + d/2) divided by N * cell area.
/// Samples outside every cell are dropped, so the mass is the in-grid fraction.
PdfGrid histogram2d(const std::vector<Vec2>& samples, const GridGeometry& geom, double time = 0.0);

/// The same cells projected on one axis.
MarginalPdf histogram1d(const std::vector<Vec2>& samples, const GridGeometry& geom, int axis,
                        double time = 0.0);

struct CompareMetrics {
    double max_abs = 0.0;
    double l1 = 0.0;
    double log_tail_max_abs = 0.0;  // max |log10 pA - log10 pB| where both exceed the threshold
    std::size_t log_tail_points = 0;
};

/// Throws std::invalid_argument if the geometries differ.
CompareMetrics compare(const PdfGrid& a, const PdfGrid& b, double threshold = 1e-8);

/// Sum |a - b| * spacing for marginals on the same nodes.
double marginal_l1(const MarginalPdf& a, const MarginalPdf& b);

/// Strict interior local maxima above rel_threshold * max.
std::vector<std::size_t> local_maxima(const MarginalPdf& m, double rel_threshold = 0.01);

/// Node (i, j) that exceeds its 8 neighbours (ties broken toward the lower
/// index) and rel_threshold * max.
std::vector<std::pair<std::size_t, std::size_t>> local_maxima(const PdfGrid& p, double rel_threshold = 0.01);

/// A peak with its topographic prominence: the drop from the peak to the
/// highest saddle connecting it to a higher peak (for the global maximum, the
/// drop to the lowest value). `index` is k for marginals, j * n1 + i for grids.
struct Mode {
    std::size_t index = 0;
    double value = 0.0;
    double prominence = 0.0;
};

/// Peaks whose prominence is at least min_prominence * max, highest first.
/// Unlike local_maxima, ripples on a ridge do not count.
std::vector<Mode> modes(const MarginalPdf& m, double min_prominence = 0.05);
std::vector<Mode> modes(const PdfGrid& p, double min_prominence = 0.05);

/// At least two modes in the sense of `modes`.
bool is_bimodal(const MarginalPdf& m, double min_prominence = 0.05);

struct MomentSeries {
    std::vector<double> times;
    std::vector<Moments> y1, y2;

    void add(const PdfGrid& p);
};

void write_marginals_csv(const std::pair<MarginalPdf, MarginalPdf>& m, const std::filesystem::path& path);
void write_moments_csv(const MomentSeries& s, const std::filesystem::path& path);

}  // namespace memfpk
