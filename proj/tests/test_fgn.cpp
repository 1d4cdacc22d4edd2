#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "memfpk/fgn.hpp"
#include "oracles.hpp"

using namespace memfpk::fgn;

namespace {

// Per-lag mean and standard error of the sample autocovariance over paths.
struct LagStats {
    std::vector<double> mean, se;
};

LagStats lag_stats(double hurst, std::size_t n, std::size_t paths, std::size_t max_lag, std::uint64_t seed) {
    FgnGenerator gen(hurst, 1.0, n);
    std::vector<double> x(n);
    std::vector<double> s1(max_lag + 1, 0.0), s2(max_lag + 1, 0.0);
    for (std::size_t p = 0; p < paths; ++p) {
        gen.sample(mix_seed(seed, p), x);
        for (std::size_t l = 0; l <= max_lag; ++l) {
            double acc = 0.0;
            for (std::size_t m = 0; m + l < n; ++m) acc += x[m] * x[m + l];
            const double c = acc / static_cast<double>(n - l);
            s1[l] += c;
            s2[l] += c * c;
        }
    }
    LagStats r;
    const double np = static_cast<double>(paths);
    for (std::size_t l = 0; l <= max_lag; ++l) {
        const double m = s1[l] / np;
        const double var = (s2[l] / np - m * m) * np / (np - 1.0);
        r.mean.push_back(m);
        r.se.push_back(std::sqrt(var / np));
    }
    return r;
}

}  // namespace

TEST_CASE("autocovariance at lag 0 is the increment variance") {
    CHECK(increment_autocovariance(0.8, 0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(increment_autocovariance(0.7, 0, 0.01) == doctest::Approx(std::pow(0.01, 1.4)).epsilon(1e-14));
}

TEST_CASE("autocovariance vanishes at H = 1/2") {
    CHECK(std::fabs(increment_autocovariance(0.5, 1, 1.0)) < 1e-15);
    CHECK(std::fabs(increment_autocovariance(0.5, 7, 0.3)) < 1e-15);
}

TEST_CASE("lag-1 autocovariance at H = 0.8") {
    // 0.5 (2^1.6 - 2) evaluated in long double, independently of the library formula
    const long double ref = 0.5L * (std::exp2l(1.6L) - 2.0L);
    CHECK(std::fabs(increment_autocovariance(0.8, 1, 1.0) - static_cast<double>(ref)) < 1e-14);
    CHECK(increment_autocovariance(0.8, 1, 1.0) == doctest::Approx(0.51572).epsilon(2e-5));
}

TEST_CASE("autocovariance rejects Hurst indices outside (0, 1)") {
    CHECK_THROWS_AS(increment_autocovariance(1.0, 1, 1.0), std::domain_error);
    CHECK_THROWS_AS(increment_autocovariance(0.0, 1, 1.0), std::domain_error);
    CHECK_THROWS_AS(increment_autocovariance(0.7, 1, 0.0), std::invalid_argument);
}

TEST_CASE("white-noise spectrum is flat at 1/(2 pi)") {
    CHECK(psd(0.5, 3.7) == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
    CHECK(psd(0.5, 0.01) == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("spectral density at H = 0.8, omega = 1") {
    const double ref = 0.8 * oracle::gamma_fn(1.6) * std::sin(0.8 * M_PI) / M_PI;
    CHECK(psd(0.8, 1.0) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(psd(0.8, 1.0) == doctest::Approx(0.1337).epsilon(5e-4));
    // power law in omega
    CHECK(psd(0.8, 2.0) == doctest::Approx(ref * std::pow(2.0, -0.6)).epsilon(1e-12));
}

TEST_CASE("spectral density diverges at omega = 0 for H > 1/2") {
    CHECK_THROWS_AS(psd(0.8, 0.0), std::domain_error);
    CHECK_NOTHROW(psd(0.5, 0.0));
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((FgnSpec{0.5, 1.0, 10, 1}.validate()), std::domain_error);
    CHECK_THROWS_AS((FgnSpec{1.0, 1.0, 10, 1}.validate()), std::domain_error);
    CHECK_THROWS_AS((FgnSpec{0.7, 0.0, 10, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((FgnSpec{0.7, 1.0, 0, 1}.validate()), std::invalid_argument);
    CHECK_NOTHROW((FgnSpec{0.7, 1.0, 1, 1}.validate()));
}

TEST_CASE("same seed gives bitwise identical paths") {
    const FgnSpec s{0.75, 1e-3, 1000, 42};
    const auto a = sample_path(s);
    const auto b = sample_path(s);
    REQUIRE(a.values.size() == 1000);
    CHECK(a.values == b.values);
    const auto c = sample_path({0.75, 1e-3, 1000, 43});
    CHECK(a.values != c.values);
}

TEST_CASE("seed mixing gives distinct streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t q = 0; q < 1000; ++q) seen.insert(mix_seed(7, q));
    CHECK(seen.size() == 1000);
    CHECK(mix_seed(7, 0) != mix_seed(8, 0));
}

TEST_CASE("single-step paths") {
    FgnGenerator g(0.7, 0.5, 1);
    std::vector<double> x(1);
    g.sample(3, x);
    CHECK(std::isfinite(x[0]));
}

TEST_CASE("lag-1 sample autocovariance, n = 2^14, 200 paths") {
    for (double h : {0.8, 0.51}) {
        const auto st = lag_stats(h, 1u << 14, 200, 1, 11);
        const double ref = 0.5 * (std::pow(2.0, 2.0 * h) - 2.0);
        CAPTURE(h);
        CHECK(std::fabs(st.mean[1] - ref) < 0.02);
    }
}

TEST_CASE("sample autocovariance at lags 0..5 within 4 standard errors") {
    for (double h : {0.6, 0.8, 0.95}) {
        const auto st = lag_stats(h, 1u << 12, 200, 5, 5);
        for (std::size_t l = 0; l <= 5; ++l) {
            CAPTURE(h);
            CAPTURE(l);
            CHECK(std::fabs(st.mean[l] - increment_autocovariance(h, l, 1.0)) <= 4.0 * st.se[l]);
        }
    }
}

TEST_CASE("increment mean is zero within 4 standard errors") {
    const std::size_t n = 1u << 12;
    FgnGenerator gen(0.8, 0.01, n);
    std::vector<double> x(n);
    // Per-path means are independent; their spread gives the standard error.
    double s = 0.0, s2 = 0.0;
    const int paths = 64;  // 64 * 4096 > 2.6e5 draws
    for (int p = 0; p < paths; ++p) {
        gen.sample(mix_seed(21, p), x);
        double m = 0.0;
        for (double v : x) m += v;
        m /= static_cast<double>(n);
        s += m;
        s2 += m * m;
    }
    const double mean = s / paths;
    const double se = std::sqrt((s2 / paths - mean * mean) / (paths - 1));
    CHECK(std::fabs(mean) <= 4.0 * se);
}

TEST_CASE("partial sums scale like (k dt)^{2H}") {
    const double h = 0.7, dt = 0.01;
    const std::size_t n = 256;
    FgnGenerator gen(h, dt, n);
    std::vector<double> x(n);
    const std::size_t ks[] = {1, 16, 256};
    double s2[3] = {0, 0, 0};
    const int paths = 4000;
    for (int p = 0; p < paths; ++p) {
        gen.sample(mix_seed(9, p), x);
        double acc = 0.0;
        std::size_t next = 0;
        for (std::size_t m = 0; m < n; ++m) {
            acc += x[m];
            if (m + 1 == ks[next]) s2[next++] += acc * acc;
        }
    }
    for (int i = 0; i < 3; ++i) {
        const double expect = std::pow(ks[i] * dt, 2.0 * h);
        // chi-square with `paths` degrees of freedom: relative SE sqrt(2/paths)
        CHECK(std::fabs(s2[i] / paths / expect - 1.0) < 4.0 * std::sqrt(2.0 / paths));
    }
}

TEST_CASE("Cholesky and circulant generators share the law") {
    const std::size_t n = 64;
    FgnGenerator dh(0.85, 1.0, n, Method::DaviesHarte);
    FgnGenerator ch(0.85, 1.0, n, Method::Cholesky);
    CHECK(dh.method() == Method::DaviesHarte);
    CHECK(ch.method() == Method::Cholesky);
    std::vector<double> x(n);
    const int paths = 4000;
    for (auto* g : {&dh, &ch}) {
        double c0 = 0.0, c3 = 0.0;
        for (int p = 0; p < paths; ++p) {
            g->sample(mix_seed(4, p), x);
            c0 += x[10] * x[10];
            c3 += x[10] * x[13];
        }
        CHECK(c0 / paths == doctest::Approx(1.0).epsilon(4.0 * std::sqrt(2.0 / paths)));
        const double rho = increment_autocovariance(0.85, 3, 1.0);
        // Var[x y] = 1 + rho^2 for unit-variance jointly Gaussian x, y
        CHECK(std::fabs(c3 / paths - rho) < 4.0 * std::sqrt((1.0 + rho * rho) / paths));
    }
    CHECK_THROWS_AS(FgnGenerator(0.8, 1.0, 5000, Method::Cholesky), std::invalid_argument);
}

TEST_CASE("white-noise increments have variance dt") {
    const auto w = sample_white_noise(0.01, 100000, 3);
    double s2 = 0.0;
    for (double v : w) s2 += v * v;
    CHECK(s2 / w.size() == doctest::Approx(0.01).epsilon(4.0 * std::sqrt(2.0 / 1e5)));
    IncrementSource src(0.5, 0.01, 10);
    CHECK(src.white());
    IncrementSource frac(0.7, 0.01, 10);
    CHECK_FALSE(frac.white());
}
