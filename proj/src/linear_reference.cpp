#include "memfpk/linear_reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "memfpk/errors.hpp"
#include "memfpk/fgn.hpp"

namespace memfpk {

void LinearParams::validate() const {
    if (!(k >= 0.0 && c >= 0.0)) throw ConfigError("linear oscillator needs k >= 0 and c >= 0");
    if (!(sigma >= 0.0)) throw ConfigError("noise intensity must be non-negative");
    if (!(hurst == 0.5 || (hurst > 0.5 && hurst < 1.0))) throw ConfigError("Hurst index outside (1/2, 1)");
    if (!(init.var > 0.0)) throw ConfigError("initial variance must be positive");
}

LinearParams LinearParams::from_model(const SystemModel& m) {
    if (m.name != "linear_sdof") throw ConfigError("model '" + m.name + "' is not linear_sdof");
    LinearParams p;
    p.k = m.params.at("k");
    p.c = m.params.at("c");
    p.sigma = m.sigma[1];
    p.hurst = m.hurst[1];
    p.init = m.init;
    p.validate();
    return p;
}

LinearSystem LinearSystem::from(const LinearParams& p) {
    p.validate();
    return {p.a(), {0.0, p.sigma}, p.hurst, p.init};
}

Mat2 expm_A(const LinearParams& p, double t) {
    if (t < 0.0) throw std::invalid_argument("expm_A needs t >= 0");
    if (p.k > 0.0) {
        const double wn = std::sqrt(p.k);
        const double zeta = p.c / (2.0 * wn);
        if (zeta < 1.0) {
            const double wd = wn * std::sqrt(1.0 - zeta * zeta);
            const double e = std::exp(-zeta * wn * t);
            const double cs = std::cos(wd * t);
            const double sn = std::sin(wd * t);
            const double r = zeta * wn / wd;
            return e * Mat2{cs + r * sn, sn / wd, -wn * wn / wd * sn, cs - r * sn};
        }
    }
    return expm(t * p.a());
}

namespace {

// raw(j, i) = H sum_k [(k d)^{2H-1} - ((k-1) d)^{2H-1}] [e^{A (k-1/2) d}]_{ji}, k = 1..n
Mat2 kernel_sum(const Mat2& a, double hurst, double d, std::size_t n) {
    const double e = 2.0 * hurst - 1.0;
    const Mat2 step = expm(d * a);
    Mat2 em = expm((0.5 * d) * a);
    Mat2 acc;
    double prev = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double cur = std::pow(static_cast<double>(k) * d, e);
        acc = acc + (hurst * (cur - prev)) * em;
        prev = cur;
        em = step * em;
    }
    return acc;
}

LinearCoeffs to_coeffs(const Mat2& raw, const Vec2& sigma) {
    LinearCoeffs r;
    const double s1 = sigma[0] * sigma[0];
    const double s2 = sigma[1] * sigma[1];
    r.b11 = s1 * raw(0, 0);
    r.b12 = s1 * raw(1, 0);
    r.b21 = s2 * raw(0, 1);
    r.b22 = s2 * raw(1, 1);
    return r;
}

LinearCoeffs white_coeffs(const Vec2& sigma) {
    LinearCoeffs r;
    r.b11 = 0.5 * sigma[0] * sigma[0];
    r.b22 = 0.5 * sigma[1] * sigma[1];
    return r;
}

double coeff_norm(const LinearCoeffs& c) {
    return std::max({std::fabs(c.b11), std::fabs(c.b12), std::fabs(c.b21), std::fabs(c.b22)});
}

double coeff_diff(const LinearCoeffs& a, const LinearCoeffs& b) {
    return std::max({std::fabs(a.b11 - b.b11), std::fabs(a.b12 - b.b12), std::fabs(a.b21 - b.b21),
                     std::fabs(a.b22 - b.b22)});
}

// Noise part of the covariance with n cells on [0, t].
Mat2 noise_covariance(const LinearSystem& sys, double t, std::size_t n) {
    const double h = t / static_cast<double>(n);
    std::vector<double> kern(n);
    for (std::size_t d = 0; d < n; ++d) kern[d] = fgn::increment_autocovariance(sys.hurst, d, h);

    const Mat2 step = expm(h * sys.a);
    Mat2 total;
    std::vector<Vec2> g(n);
    std::vector<Vec2> v(n);
    for (int i = 0; i < 2; ++i) {
        const double s = sys.sigma[i];
        if (s == 0.0) continue;
        // g[r] = e^{A (r + 1/2) h} e_i; r runs backward in the integration variable,
        // which the symmetric kernel does not notice.
        Mat2 em = expm((0.5 * h) * sys.a);
        for (std::size_t r = 0; r < n; ++r) {
            g[r] = em.col(i);
            em = step * em;
        }
        for (std::size_t a = 0; a < n; ++a) {
            double v0 = kern[0] * g[a][0];
            double v1 = kern[0] * g[a][1];
            for (std::size_t b = 0; b < a; ++b) {
                v0 += kern[a - b] * g[b][0];
                v1 += kern[a - b] * g[b][1];
            }
            for (std::size_t b = a + 1; b < n; ++b) {
                v0 += kern[b - a] * g[b][0];
                v1 += kern[b - a] * g[b][1];
            }
            v[a] = {v0, v1};
        }
        Mat2 acc;
        for (std::size_t a = 0; a < n; ++a) acc = acc + outer(g[a], v[a]);
        total = total + (s * s) * acc;
    }
    return total;
}

Mat2 symmetrize(const Mat2& m) {
    const double off = 0.5 * (m(0, 1) + m(1, 0));
    return {m(0, 0), off, off, m(1, 1)};
}

constexpr std::size_t kMaxCells = 1u << 14;

}  // namespace

GaussianSummary gaussian_summary(const LinearSystem& sys, const std::vector<double>& times,
                                 double rel_tol) {
    if (!(sys.init.var > 0.0)) throw ConfigError("initial variance must be positive");
    GaussianSummary out;
    const Mat2 s0 = sys.init.covariance();
    for (double t : times) {
        if (!(t >= 0.0)) throw std::invalid_argument("report times must be non-negative");
        const Mat2 e = expm(t * sys.a);
        out.times.push_back(t);
        out.means.push_back(e * sys.init.mean);
        Mat2 cov = e * s0 * e.transpose();
        double err = 0.0;
        const bool noisy = (sys.sigma[0] != 0.0 || sys.sigma[1] != 0.0) && t > 0.0;
        if (noisy && sys.hurst == 0.5) {
            // Lyapunov integral int_0^t e^{As} S S' e^{A's} ds by composite Simpson,
            // refined the same way.
            auto simpson = [&](std::size_t n) {
                const double h = t / static_cast<double>(n);
                const Mat2 ss = Mat2::diag(sys.sigma[0] * sys.sigma[0], sys.sigma[1] * sys.sigma[1]);
                Mat2 acc;
                for (std::size_t r = 0; r <= n; ++r) {
                    const Mat2 ex = expm((static_cast<double>(r) * h) * sys.a);
                    const double w = (r == 0 || r == n) ? 1.0 : (r % 2 ? 4.0 : 2.0);
                    acc = acc + w * (ex * ss * ex.transpose());
                }
                return (h / 3.0) * acc;
            };
            Mat2 prev = simpson(64);
            std::size_t n = 128;
            for (;; n *= 2) {
                const Mat2 cur = simpson(n);
                err = max_abs(cur - prev);
                prev = cur;
                if (err <= rel_tol * std::max(1.0, max_abs(cur)) || n >= kMaxCells) break;
            }
            cov = cov + prev;
        } else if (noisy) {
            std::size_t n = 128;
            Mat2 i_prev = noise_covariance(sys, t, n);
            Mat2 r_prev = i_prev;
            bool have_r = false;
            bool converged = false;
            while (n < kMaxCells) {
                n *= 2;
                const Mat2 i_cur = noise_covariance(sys, t, n);
                const Mat2 r_cur = i_cur + (1.0 / 3.0) * (i_cur - i_prev);
                if (have_r) {
                    err = max_abs(r_cur - r_prev);
                    if (err <= rel_tol * std::max(1.0, max_abs(r_cur))) converged = true;
                }
                i_prev = i_cur;
                r_prev = r_cur;
                have_r = true;
                if (converged) break;
            }
            if (!converged) {
                throw NumericalError("covariance quadrature did not converge at t = " + format_double(t) +
                                     " (estimated error " + format_double(err) + ")");
            }
            cov = cov + r_prev;
        }
        out.covariances.push_back(symmetrize(cov));
        out.cov_error.push_back(err);
    }
    return out;
}

GaussianSummary gaussian_summary(const LinearParams& p, const std::vector<double>& times, double rel_tol) {
    return gaussian_summary(LinearSystem::from(p), times, rel_tol);
}

Mat2 gwn_stationary_covariance(const LinearParams& p) {
    if (!(p.k > 0.0 && p.c > 0.0)) throw std::invalid_argument("stationary covariance needs k, c > 0");
    const double s2 = p.sigma * p.sigma;
    return Mat2::diag(s2 / (2.0 * p.c * p.k), s2 / (2.0 * p.c));
}

PdfGrid gaussian_pdf(const Vec2& mean, const Mat2& cov, const GridGeometry& geom, double time) {
    const double det = cov.det();
    if (!(det > 0.0) || !(cov(0, 0) > 0.0)) throw NumericalError("covariance is not positive definite");
    const Mat2 inv = (1.0 / det) * Mat2{cov(1, 1), -cov(0, 1), -cov(1, 0), cov(0, 0)};
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
    PdfGrid p(geom, time);
    for (std::size_t j = 0; j < geom.n2; ++j) {
        for (std::size_t i = 0; i < geom.n1; ++i) {
            const double dx = geom.y1(i) - mean[0];
            const double dy = geom.y2(j) - mean[1];
            const double q = inv(0, 0) * dx * dx + (inv(0, 1) + inv(1, 0)) * dx * dy + inv(1, 1) * dy * dy;
            p.at(i, j) = norm * std::exp(-0.5 * q);
        }
    }
    return p;
}

PdfGrid analytic_pdf(const LinearParams& p, double t, const GridGeometry& geom) {
    const auto s = gaussian_summary(p, {t});
    return gaussian_pdf(s.means[0], s.covariances[0], geom, t);
}

LinearCoeffs linear_memfpk_coeffs(const LinearSystem& sys, double t, double rel_tol) {
    if (t < 0.0) throw std::invalid_argument("coefficients need t >= 0");
    if (sys.hurst == 0.5) return white_coeffs(sys.sigma);
    if (t == 0.0) return {};
    std::size_t n = 64;
    LinearCoeffs prev = to_coeffs(kernel_sum(sys.a, sys.hurst, t / static_cast<double>(n), n), sys.sigma);
    for (;;) {
        n *= 2;
        LinearCoeffs cur = to_coeffs(kernel_sum(sys.a, sys.hurst, t / static_cast<double>(n), n), sys.sigma);
        cur.error = coeff_diff(cur, prev);
        if (cur.error <= rel_tol * coeff_norm(cur) || n >= (1u << 24)) return cur;
        prev = cur;
    }
}

LinearCoeffs linear_memfpk_coeffs(const LinearParams& p, double t, double rel_tol) {
    return linear_memfpk_coeffs(LinearSystem::from(p), t, rel_tol);
}

std::vector<LinearCoeffs> linear_coeff_table(const LinearSystem& sys, double dt, std::size_t n_steps,
                                             std::size_t substeps) {
    if (!(dt > 0.0) || substeps == 0) throw std::invalid_argument("coefficient table needs dt > 0, substeps >= 1");
    if (sys.hurst == 0.5) return std::vector<LinearCoeffs>(n_steps + 1, white_coeffs(sys.sigma));
    std::vector<LinearCoeffs> out;
    out.reserve(n_steps + 1);
    out.push_back({});
    const double d = dt / static_cast<double>(substeps);
    const double e = 2.0 * sys.hurst - 1.0;
    const Mat2 step = expm(d * sys.a);
    Mat2 em = expm((0.5 * d) * sys.a);
    Mat2 acc;
    double prev = 0.0;
    std::size_t k = 0;
    for (std::size_t n = 1; n <= n_steps; ++n) {
        for (std::size_t s = 0; s < substeps; ++s) {
            ++k;
            const double cur = std::pow(static_cast<double>(k) * d, e);
            acc = acc + (sys.hurst * (cur - prev)) * em;
            prev = cur;
            em = step * em;
        }
        out.push_back(to_coeffs(acc, sys.sigma));
    }
    return out;
}

LinearCoeffs gwn_coeffs(double sigma) { return white_coeffs({0.0, sigma}); }

}  // namespace memfpk
