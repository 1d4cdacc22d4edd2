#include <doctest.h>

#include <cmath>
#include <vector>

#include "memfpk/errors.hpp"
#include "memfpk/linear_reference.hpp"
#include "memfpk/path_simulator.hpp"
#include "oracles.hpp"

using namespace memfpk;

namespace {

LinearParams ex1(double hurst = 0.8) {
    LinearParams p;
    p.k = 1.0;
    p.c = 0.4;
    p.sigma = 1.0;
    p.hurst = hurst;
    p.init.mean = {-1.0, -1.0};
    p.init.var = 0.15;
    return p;
}

std::array<double, 4> series(const Mat2& a, double t) {
    return oracle::expm_series({a.m[0] * t, a.m[1] * t, a.m[2] * t, a.m[3] * t});
}

// Covariance of the linear oscillator by integrating
//   S' = A S + S A' + M + M',  M = [[0, b21], [0, b22]],
// with b from the quadrature oracle, tabulated cumulatively on the RK4 nodes.
Mat2 covariance_ode(const LinearParams& p, double t_end, std::size_t n) {
    const Mat2 a = p.a();
    const double h = t_end / static_cast<double>(n);
    const double hh = 0.5 * h;
    const double e = 2.0 * p.hurst - 1.0;
    const double pref = p.sigma * p.sigma * p.hurst * e;
    std::vector<double> b21(2 * n + 1), b22(2 * n + 1);
    b21[0] = b22[0] = 0.0;
    auto entry = [&](int r, int c) {
        return [&, r, c](double tau) { return series(a, tau)[2 * r + c] * std::pow(tau, e - 1.0); };
    };
    b21[1] = pref * oracle::singular_integral([&](double tau) { return series(a, tau)[1]; }, hh, p.hurst);
    b22[1] = pref * oracle::singular_integral([&](double tau) { return series(a, tau)[3]; }, hh, p.hurst);
    for (std::size_t k = 2; k <= 2 * n; ++k) {
        const double lo = hh * static_cast<double>(k - 1), hi = hh * static_cast<double>(k);
        b21[k] = b21[k - 1] + pref * oracle::integrate(entry(0, 1), lo, hi, 1);
        b22[k] = b22[k - 1] + pref * oracle::integrate(entry(1, 1), lo, hi, 1);
    }
    auto rhs = [&](const Mat2& s, std::size_t node) {
        const Mat2 m{0.0, b21[node], 0.0, b22[node]};
        return a * s + s * a.transpose() + m + m.transpose();
    };
    Mat2 s = p.init.covariance();
    for (std::size_t k = 0; k < n; ++k) {
        const Mat2 k1 = rhs(s, 2 * k);
        const Mat2 k2 = rhs(s + hh * k1, 2 * k + 1);
        const Mat2 k3 = rhs(s + hh * k2, 2 * k + 1);
        const Mat2 k4 = rhs(s + h * k3, 2 * k + 2);
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return s;
}

}  // namespace

TEST_CASE("matrix exponential against a long-double series") {
    for (const auto& [k, c] : std::vector<std::pair<double, double>>{
             {1.0, 0.4}, {1.0, 0.0}, {1.0, 2.0}, {1.0, 3.0}, {0.0, 0.0}, {0.0, 0.7}, {4.0, 1.0}}) {
        LinearParams p = ex1();
        p.k = k;
        p.c = c;
        for (double t : {0.0, 0.3, 1.0, 5.0, 20.0}) {
            const Mat2 e = expm_A(p, t);
            const auto r = series(p.a(), t);
            for (int i = 0; i < 4; ++i) {
                CAPTURE(k);
                CAPTURE(c);
                CAPTURE(t);
                CHECK(std::fabs(e.m[i] - r[i]) <= 1e-12 * std::max(1.0, std::fabs(r[i])));
            }
        }
    }
    // generic path of the library exponential
    const Mat2 m{0.3, -1.2, 0.8, -0.5};
    const auto r = oracle::expm_series(m.m);
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(expm(m).m[i] - r[i]) < 1e-13);
}

TEST_CASE("e^{A(s+t)} = e^{As} e^{At}") {
    const auto p = ex1();
    const Mat2 lhs = expm_A(p, 3.7);
    const Mat2 rhs = expm_A(p, 1.2) * expm_A(p, 2.5);
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(lhs.m[i] - rhs.m[i]) < 1e-13);
}

TEST_CASE("free particle moments in closed form") {
    // A = [[0, 1], [0, 0]]: V = V0 + sigma B^H, X = X0 + V0 t + sigma int B^H
    LinearParams p;
    p.k = 0.0;
    p.c = 0.0;
    p.sigma = 0.7;
    p.hurst = 0.75;
    p.init.mean = {0.5, -0.2};
    p.init.var = 0.09;
    const double s0 = 0.09, s2 = 0.49, h = 0.75;
    const auto g = gaussian_summary(p, {0.5, 1.0, 3.0});
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        const double t = g.times[k];
        const double t2h = std::pow(t, 2.0 * h);
        CAPTURE(t);
        CHECK(g.means[k][0] == doctest::Approx(0.5 - 0.2 * t).epsilon(1e-12));
        CHECK(g.means[k][1] == doctest::Approx(-0.2).epsilon(1e-12));
        CHECK(g.covariances[k](1, 1) == doctest::Approx(s0 + s2 * t2h).epsilon(1e-6));
        CHECK(g.covariances[k](0, 1) == doctest::Approx(s0 * t + s2 * t2h * t / 2.0).epsilon(1e-6));
        CHECK(g.covariances[k](0, 0) ==
              doctest::Approx(s0 * (1.0 + t * t) + s2 * t2h * t * t / (2.0 * h + 2.0)).epsilon(1e-6));
    }
}

TEST_CASE("oscillator covariance matches the moment ODE") {
    const auto p = ex1();
    const auto g = gaussian_summary(p, {1.0, 5.0});
    const Mat2 s1 = covariance_ode(p, 1.0, 4000);
    const Mat2 s5 = covariance_ode(p, 5.0, 20000);
    for (int i = 0; i < 4; ++i) {
        CHECK(std::fabs(g.covariances[0].m[i] - s1.m[i]) <= 1e-5);
        CHECK(std::fabs(g.covariances[1].m[i] - s5.m[i]) <= 1e-5);
    }
    CHECK(g.cov_error[1] < 1e-6);
    const Mat2 e = expm_A(p, 5.0);
    const Vec2 mu = e * p.init.mean;
    CHECK(g.means[1][0] == doctest::Approx(mu[0]).epsilon(1e-13));
    CHECK(g.means[1][1] == doctest::Approx(mu[1]).epsilon(1e-13));
}

TEST_CASE("covariances are symmetric positive definite") {
    for (double h : {0.51, 0.65, 0.8, 0.95}) {
        const auto g = gaussian_summary(ex1(h), {0.1, 1.0, 5.0, 20.0});
        for (const auto& s : g.covariances) {
            CHECK(s(0, 1) == s(1, 0));
            CHECK(s(0, 0) > 0.0);
            CHECK(s.det() > 0.0);
        }
    }
}

TEST_CASE("white-noise oscillator settles at the stationary covariance") {
    auto p = ex1(0.5);
    const Mat2 st = gwn_stationary_covariance(p);
    CHECK(st(0, 0) == doctest::Approx(1.0 / 0.8));
    CHECK(st(1, 1) == doctest::Approx(1.0 / 0.8));
    CHECK(st(0, 1) == 0.0);
    const auto g = gaussian_summary(p, {60.0});
    CHECK(g.covariances[0](0, 0) == doctest::Approx(st(0, 0)).epsilon(1e-4));
    CHECK(g.covariances[0](1, 1) == doctest::Approx(st(1, 1)).epsilon(1e-4));
    CHECK(std::fabs(g.covariances[0](0, 1)) < 1e-4);
}

TEST_CASE("analytic density: peak at the mean, unit mass, point symmetry") {
    auto p = ex1();
    p.init.mean = {0.0, 0.0};
    const auto geom = GridGeometry::from_spacing(-6, 6, -6, 6, 0.15, 0.15);
    const auto pdf = analytic_pdf(p, 5.0, geom);
    CHECK(pdf.mass() == doctest::Approx(1.0).epsilon(1e-6));
    const std::size_t c1 = (geom.n1 - 1) / 2, c2 = (geom.n2 - 1) / 2;
    CHECK(pdf.at(c1, c2) == doctest::Approx(pdf.max_value()));
    const auto g = gaussian_summary(p, {5.0});
    CHECK(pdf.at(c1, c2) == doctest::Approx(1.0 / (2.0 * M_PI * std::sqrt(g.covariances[0].det()))).epsilon(1e-8));
    for (std::size_t j = 0; j < geom.n2; ++j)
        for (std::size_t i = 0; i < geom.n1; ++i)
            CHECK(pdf.at(i, j) == doctest::Approx(pdf.at(geom.n1 - 1 - i, geom.n2 - 1 - j)).epsilon(1e-10));
    CHECK_THROWS_AS(gaussian_pdf({0, 0}, Mat2{1.0, 1.0, 1.0, 1.0}, geom, 0.0), NumericalError);
}

TEST_CASE("memory coefficients vanish at t = 0") {
    const auto b = linear_memfpk_coeffs(ex1(), 0.0);
    CHECK(b.b11 == 0.0);
    CHECK(b.b12 == 0.0);
    CHECK(b.b21 == 0.0);
    CHECK(b.b22 == 0.0);
}

TEST_CASE("free particle coefficients in closed form") {
    LinearParams p = ex1();
    p.k = 0.0;
    p.c = 0.0;
    const auto b = linear_memfpk_coeffs(p, 1.0);
    // b22 = sigma^2 H t^{2H-1}, b21 = sigma^2 (2H-1) t^{2H} / 2
    CHECK(b.b22 == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(b.b21 == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(b.b11 == 0.0);
    CHECK(b.b12 == 0.0);
}

TEST_CASE("oscillator coefficients against the quadrature oracle") {
    const auto p = ex1();
    for (double t : {0.5, 1.0, 5.0, 20.0}) {
        const auto b = linear_memfpk_coeffs(p, t);
        const double pref = p.hurst * (2.0 * p.hurst - 1.0);
        const double r21 = pref * oracle::singular_integral([&](double tau) { return series(p.a(), tau)[1]; }, t, 0.8, 256);
        const double r22 = pref * oracle::singular_integral([&](double tau) { return series(p.a(), tau)[3]; }, t, 0.8, 256);
        CAPTURE(t);
        CHECK(std::fabs(b.b21 - r21) <= 1e-6 * std::max(1.0, std::fabs(r21)));
        CHECK(std::fabs(b.b22 - r22) <= 1e-6 * std::max(1.0, std::fabs(r22)));
        CHECK(b.b22 > 0.0);
    }
}

TEST_CASE("coefficients agree with the path Malliavin derivative") {
    const auto p = ex1();
    const auto model = builtin("linear_sdof", {{"k", 1.0}, {"c", 0.4}, {"sigma", 1.0}, {"hurst", 0.8},
                                               {"mean1", -1.0}, {"mean2", -1.0}, {"var0", 0.15}});
    const SimGrid g{1e-3, 5000, 1000};
    const auto path = simulate_sample(model, g, 1, 0);
    for (double t : {1.0, 5.0}) {
        const auto d = malliavin_diagonal_at(path, model, g, t);
        const auto b = linear_memfpk_coeffs(p, t);
        CHECK(std::fabs(d[1][1] - b.b22) <= 1e-3 * std::fabs(b.b22));
        CHECK(std::fabs(d[1][0] - b.b21) <= 1e-3 * std::fabs(b.b21));
    }
}

TEST_CASE("near H = 1/2 the coefficients approach the white-noise limit") {
    const auto b = linear_memfpk_coeffs(ex1(0.51), 5.0);
    CHECK(std::fabs(b.b22 - 0.5) <= 0.05);
    const auto w = gwn_coeffs(1.0);
    CHECK(w.b22 == 0.5);
    CHECK(w.b21 == 0.0);
    const auto table = linear_coeff_table(LinearSystem::from(ex1(0.5)), 1e-2, 10);
    REQUIRE(table.size() == 11);
    for (const auto& c : table) CHECK(c.b22 == 0.5);
}

TEST_CASE("coefficient table matches the pointwise values") {
    const auto sys = LinearSystem::from(ex1());
    const auto table = linear_coeff_table(sys, 1e-3, 5000);
    REQUIRE(table.size() == 5001);
    CHECK(table[0].b22 == 0.0);
    for (std::size_t n : {1000u, 5000u}) {
        const auto b = linear_memfpk_coeffs(sys, n * 1e-3);
        CHECK(table[n].b22 == doctest::Approx(b.b22).epsilon(1e-6));
        CHECK(table[n].b21 == doctest::Approx(b.b21).epsilon(1e-6));
    }
}

TEST_CASE("parameter validation") {
    LinearParams p = ex1();
    p.k = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = ex1(1.0);
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = ex1(0.4);
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
