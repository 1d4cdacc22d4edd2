#pragma once

// Node-valued densities on rectangular grids and their on-disk formats.
//
// CSV layout (text):
//   # pdfgrid,1
//   # domain,<y1_min>,<y1_max>,<y2_min>,<y2_max>
//   # nodes,<n1>,<n2>
//   # spacing,<d1>,<d2>
//   # time,<t>
//   # mass,<sum p d1 d2>
//   n2 rows (y2 ascending), each with n1 comma-separated densities (y1 ascending)
//
// Binary layout (little-endian), 64-byte header then n1*n2 doubles row-major:
//   char[8] magic "MFPKGRID", u32 version (1), u32 n1, u32 n2, u32 reserved (0),
//   f64 y1_min, f64 y1_max, f64 y2_min, f64 y2_max, f64 time.
//
// Gnuplot "nonuniform matrix" text: first row `n1 y1_0 ... y1_{n1-1}`,
// then one row per y2 node `y2_j p_0j ... p_{n1-1,j}`.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace memfpk {

/// Uniform node grid: n1 x n2 nodes including the boundary.
struct GridGeometry {
    double lo1 = 0.0, hi1 = 1.0, lo2 = 0.0, hi2 = 1.0;
    std::size_t n1 = 2, n2 = 2;

    /// Nodes spaced as close to the requested spacing as the domain allows:
    /// n_k = round((hi_k - lo_k) / spacing_k) + 1.
    static GridGeometry from_spacing(double lo1, double hi1, double lo2, double hi2, double s1,
                                     double s2);

    double d1() const { return (hi1 - lo1) / static_cast<double>(n1 - 1); }
    double d2() const { return (hi2 - lo2) / static_cast<double>(n2 - 1); }
    double y1(std::size_t i) const { return lo1 + static_cast<double>(i) * d1(); }
    double y2(std::size_t j) const { return lo2 + static_cast<double>(j) * d2(); }
    double cell_area() const { return d1() * d2(); }
    std::size_t size() const { return n1 * n2; }

    bool matches(const GridGeometry& o, double tol = 1e-12) const;
    void validate() const;
};

struct PdfGrid {
    GridGeometry geom;
    double time = 0.0;
    std::vector<double> values;  // index j * n1 + i

    PdfGrid() = default;
    PdfGrid(const GridGeometry& g, double t) : geom(g), time(t), values(g.size(), 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[j * geom.n1 + i]; }
    double at(std::size_t i, std::size_t j) const { return values[j * geom.n1 + i]; }

    double mass() const;
    double min_value() const;
    double max_value() const;
};

void write_pdf_csv(const PdfGrid& p, const std::filesystem::path& path);
PdfGrid read_pdf_csv(const std::filesystem::path& path);
void write_pdf_binary(const PdfGrid& p, const std::filesystem::path& path);
PdfGrid read_pdf_binary(const std::filesystem::path& path);
void write_pdf_gnuplot(const PdfGrid& p, const std::filesystem::path& path);

/// Dispatches on extension: ".bin" binary, anything else CSV.
PdfGrid read_pdf(const std::filesystem::path& path);

/// 17 significant digits, round-trip exact.
std::string format_double(double v);

}  // namespace memfpk
