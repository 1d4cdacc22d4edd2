#include "memfpk/pdf_grid.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "memfpk/errors.hpp"

namespace memfpk {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'P', 'K', 'G', 'R', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary grid format assumes little-endian hosts");

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, mode | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GridGeometry GridGeometry::from_spacing(double lo1, double hi1, double lo2, double hi2, double s1,
                                        double s2) {
    if (!(s1 > 0.0 && s2 > 0.0)) throw ConfigError("grid spacings must be positive");
    if (!(hi1 > lo1 && hi2 > lo2)) throw ConfigError("grid domain is degenerate");
    GridGeometry g{lo1, hi1, lo2, hi2, 0, 0};
    g.n1 = static_cast<std::size_t>(std::lround((hi1 - lo1) / s1)) + 1;
    g.n2 = static_cast<std::size_t>(std::lround((hi2 - lo2) / s2)) + 1;
    g.validate();
    return g;
}

bool GridGeometry::matches(const GridGeometry& o, double tol) const {
    return n1 == o.n1 && n2 == o.n2 && std::fabs(lo1 - o.lo1) <= tol && std::fabs(hi1 - o.hi1) <= tol &&
           std::fabs(lo2 - o.lo2) <= tol && std::fabs(hi2 - o.hi2) <= tol;
}

void GridGeometry::validate() const {
    if (!(hi1 > lo1 && hi2 > lo2)) throw ConfigError("grid domain is degenerate");
    if (n1 < 3 || n2 < 3) throw ConfigError("grid needs at least 3 nodes per axis");
}

double PdfGrid::mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * geom.cell_area();
}

double PdfGrid::min_value() const { return *std::min_element(values.begin(), values.end()); }
double PdfGrid::max_value() const { return *std::max_element(values.begin(), values.end()); }

void write_pdf_csv(const PdfGrid& p, const std::filesystem::path& path) {
    auto os = open_out(path);
    const auto& g = p.geom;
    os << "# pdfgrid,1\n";
    os << "# domain," << format_double(g.lo1) << ',' << format_double(g.hi1) << ',' << format_double(g.lo2)
       << ',' << format_double(g.hi2) << '\n';
    os << "# nodes," << g.n1 << ',' << g.n2 << '\n';
    os << "# spacing," << format_double(g.d1()) << ',' << format_double(g.d2()) << '\n';
    os << "# time," << format_double(p.time) << '\n';
    os << "# mass," << format_double(p.mass()) << '\n';
    for (std::size_t j = 0; j < g.n2; ++j) {
        for (std::size_t i = 0; i < g.n1; ++i) {
            if (i) os << ',';
            os << format_double(p.at(i, j));
        }
        os << '\n';
    }
}

PdfGrid read_pdf_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open grid file " + path.string());
    PdfGrid p;
    bool have_domain = false;
    bool have_nodes = false;
    std::string line;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto f = split(line.substr(1), ',');
            if (f.empty()) continue;
            std::string key = f[0];
            key.erase(0, key.find_first_not_of(' '));
            if (key == "domain" && f.size() == 5) {
                p.geom.lo1 = std::stod(f[1]);
                p.geom.hi1 = std::stod(f[2]);
                p.geom.lo2 = std::stod(f[3]);
                p.geom.hi2 = std::stod(f[4]);
                have_domain = true;
            } else if (key == "nodes" && f.size() == 3) {
                p.geom.n1 = std::stoul(f[1]);
                p.geom.n2 = std::stoul(f[2]);
                have_nodes = true;
            } else if (key == "time" && f.size() == 2) {
                p.time = std::stod(f[1]);
            }
            continue;
        }
        for (const auto& cell : split(line, ',')) values.push_back(std::stod(cell));
    }
    if (!have_domain || !have_nodes) throw std::runtime_error("grid file " + path.string() + " lacks header");
    if (values.size() != p.geom.size()) {
        throw std::runtime_error("grid file " + path.string() + " has wrong number of values");
    }
    p.values = std::move(values);
    return p;
}

void write_pdf_binary(const PdfGrid& p, const std::filesystem::path& path) {
    auto os = open_out(path, std::ios::out | std::ios::binary);
    std::array<char, 64> header{};
    std::memcpy(header.data(), kMagic, 8);
    const std::uint32_t ints[4] = {kVersion, static_cast<std::uint32_t>(p.geom.n1),
                                   static_cast<std::uint32_t>(p.geom.n2), 0};
    std::memcpy(header.data() + 8, ints, sizeof ints);
    const double dbl[5] = {p.geom.lo1, p.geom.hi1, p.geom.lo2, p.geom.hi2, p.time};
    std::memcpy(header.data() + 24, dbl, sizeof dbl);
    os.write(header.data(), header.size());
    os.write(reinterpret_cast<const char*>(p.values.data()),
             static_cast<std::streamsize>(p.values.size() * sizeof(double)));
}

PdfGrid read_pdf_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open grid file " + path.string());
    std::array<char, 64> header{};
    is.read(header.data(), header.size());
    if (!is || std::memcmp(header.data(), kMagic, 8) != 0) {
        throw std::runtime_error(path.string() + " is not a binary pdf grid");
    }
    std::uint32_t ints[4];
    std::memcpy(ints, header.data() + 8, sizeof ints);
    if (ints[0] != kVersion) throw std::runtime_error("unsupported binary grid version");
    double dbl[5];
    std::memcpy(dbl, header.data() + 24, sizeof dbl);
    PdfGrid p;
    p.geom = GridGeometry{dbl[0], dbl[1], dbl[2], dbl[3], ints[1], ints[2]};
    p.time = dbl[4];
    p.values.resize(p.geom.size());
    is.read(reinterpret_cast<char*>(p.values.data()),
            static_cast<std::streamsize>(p.values.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated binary grid " + path.string());
    return p;
}

void write_pdf_gnuplot(const PdfGrid& p, const std::filesystem::path& path) {
    auto os = open_out(path);
    const auto& g = p.geom;
    os << g.n1;
    for (std::size_t i = 0; i < g.n1; ++i) os << ' ' << format_double(g.y1(i));
    os << '\n';
    for (std::size_t j = 0; j < g.n2; ++j) {
        os << format_double(g.y2(j));
        for (std::size_t i = 0; i < g.n1; ++i) os << ' ' << format_double(p.at(i, j));
        os << '\n';
    }
}

PdfGrid read_pdf(const std::filesystem::path& path) {
    if (path.extension() == ".bin") return read_pdf_binary(path);
    return read_pdf_csv(path);
}

}  // namespace memfpk
