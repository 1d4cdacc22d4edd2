#pragma once

// Reference computations used only by the tests. None of them call into the
// library, so agreement with it is evidence rather than tautology.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Lanczos approximation (g = 7, n = 9), good to ~1e-15 for x > 0.5.
inline double gamma_fn(double x) {
    static const double c[9] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) return M_PI / (std::sin(M_PI * x) * gamma_fn(1.0 - x));
    x -= 1.0;
    double a = c[0];
    const double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
    return std::sqrt(2.0 * M_PI) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < n; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-16) break;
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

// Composite Gauss-Legendre (20 points per panel).
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 64) {
    static const GaussLegendre gl(20);
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (std::size_t k = 0; k < gl.x.size(); ++k) s += gl.w[k] * f(lo + 0.5 * h * (gl.x[k] + 1.0));
    }
    return 0.5 * h * s;
}

// int_0^t phi(tau) tau^{2H-2} d tau with tau = s^{1/(2H-1)}, which turns the
// weakly singular integrand into phi(s^{1/(2H-1)}) / (2H - 1).
inline double singular_integral(const std::function<double(double)>& phi, double t, double hurst,
                                int panels = 64) {
    const double e = 2.0 * hurst - 1.0;
    const double p = 1.0 / e;
    return integrate([&](double s) { return phi(std::pow(s, p)); }, 0.0, std::pow(t, e), panels) / e;
}

using M2 = std::array<long double, 4>;

inline M2 mul(const M2& a, const M2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

// Taylor series with scaling and squaring in long double.
inline std::array<double, 4> expm_series(const std::array<double, 4>& m) {
    long double norm = 0.0L;
    for (double v : m) norm = std::max(norm, std::fabs(static_cast<long double>(v)));
    int s = 0;
    while (norm > 0.125L) {
        norm /= 2.0L;
        ++s;
    }
    const long double scale = std::ldexp(1.0L, -s);
    M2 a{m[0] * scale, m[1] * scale, m[2] * scale, m[3] * scale};
    M2 r{1.0L, 0.0L, 0.0L, 1.0L}, term{1.0L, 0.0L, 0.0L, 1.0L};
    for (int k = 1; k < 30; ++k) {
        term = mul(term, a);
        for (auto& v : term) v /= k;
        for (int i = 0; i < 4; ++i) r[i] += term[i];
    }
    for (int i = 0; i < s; ++i) r = mul(r, r);
    return {static_cast<double>(r[0]), static_cast<double>(r[1]), static_cast<double>(r[2]),
            static_cast<double>(r[3])};
}

// Kurtosis of 0.5 N(-m, s^2) + 0.5 N(m, s^2): E X^2 = m^2 + s^2,
// E X^4 = m^4 + 6 m^2 s^2 + 3 s^4.
inline double symmetric_mixture_kurtosis(double m, double s) {
    const double m2 = m * m + s * s;
    const double m4 = m * m * m * m + 6.0 * m * m * s * s + 3.0 * s * s * s * s;
    return m4 / (m2 * m2);
}

}  // namespace oracle
