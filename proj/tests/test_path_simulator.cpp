#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "memfpk/errors.hpp"
#include "memfpk/fgn.hpp"
#include "memfpk/linear_reference.hpp"
#include "memfpk/model.hpp"
#include "memfpk/path_simulator.hpp"
#include "oracles.hpp"

using namespace memfpk;

namespace {

SystemModel linear_model(double k, double c, double sigma, double hurst) {
    return builtin("linear_sdof", {{"k", k}, {"c", c}, {"sigma", sigma}, {"hurst", hurst},
                                   {"mean1", -1.0}, {"mean2", -1.0}, {"var0", 0.15}});
}

SystemModel free_model(Vec2 sigma, Vec2 hurst) {
    SystemModel m;
    m.name = "free";
    m.drift = [](const Vec2&) { return Vec2{0.0, 0.0}; };
    m.jacobian = [](const Vec2&) { return Mat2{}; };
    m.sigma = sigma;
    m.hurst = hurst;
    return m;
}

// sigma H (2H-1) int_0^t [e^{A tau}]_{ji} tau^{2H-2} d tau, independently of the library
double malliavin_oracle(const Mat2& a, double sigma, double hurst, double t, int i, int j) {
    auto phi = [&](double tau) {
        const auto e = oracle::expm_series({a.m[0] * tau, a.m[1] * tau, a.m[2] * tau, a.m[3] * tau});
        return e[2 * j + i];
    };
    return sigma * hurst * (2.0 * hurst - 1.0) * oracle::singular_integral(phi, t, hurst, 128);
}

std::filesystem::path scratch(const char* name) {
    auto p = std::filesystem::temp_directory_path() / ("memfpk_test_" + std::string(name));
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("grid validation and time lookup") {
    CHECK_THROWS_AS((SimGrid{0.0, 10, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((SimGrid{1e-3, 0, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((SimGrid{1e-3, 10, 3}.validate()), ConfigError);
    const SimGrid g{1e-3, 8000, 50};
    CHECK(g.n_snapshots() == 161);
    CHECK(g.step_of(2.5) == 2500);
    CHECK_THROWS_AS(g.step_of(2.5004), std::invalid_argument);
}

TEST_CASE("no drift and no noise keeps the state fixed") {
    const auto m = free_model({0.0, 0.0}, {0.8, 0.8});
    const SimGrid g{1e-2, 100, 10};
    const auto p = integrate_path(m, g, {0.3, -0.7}, {}, {});
    REQUIRE(p.valid);
    REQUIRE(p.states.size() == 101);
    for (const auto& y : p.states) {
        CHECK(y[0] == 0.3);
        CHECK(y[1] == -0.7);
    }
}

TEST_CASE("pure noise is the running sum of increments") {
    const auto m = free_model({1.0, 2.0}, {0.7, 0.7});
    const SimGrid g{1e-2, 200, 10};
    const auto n1 = fgn::sample_path({0.7, 1e-2, 200, 1}).values;
    const auto n2 = fgn::sample_path({0.7, 1e-2, 200, 2}).values;
    const auto p = integrate_path(m, g, {0.0, 0.0}, n1, n2);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < 200; ++k) {
        s1 += n1[k];
        s2 += 2.0 * n2[k];
        CHECK(std::fabs(p.states[k + 1][0] - s1) < 1e-12);
        CHECK(std::fabs(p.states[k + 1][1] - s2) < 1e-12);
    }
    CHECK_THROWS_AS(integrate_path(m, g, {0.0, 0.0}, n1, {}), std::invalid_argument);
}

TEST_CASE("noise-free linear path follows e^{At} y0") {
    auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const SimGrid g{1e-3, 5000, 1000};
    const std::vector<double> zero(5000, 0.0);
    const auto p = integrate_path(m, g, {-1.0, -1.0}, {}, zero);
    const Mat2 a{0.0, 1.0, -1.0, -0.4};
    for (std::size_t k = 0; k <= 5; ++k) {
        const double t = static_cast<double>(k);
        const auto e = oracle::expm_series({a.m[0] * t, a.m[1] * t, a.m[2] * t, a.m[3] * t});
        const Vec2 ref{-(e[0] + e[1]), -(e[2] + e[3])};
        const Vec2 y = p.states[k * 1000];
        CHECK(std::fabs(y[0] - ref[0]) <= 1e-4);
        CHECK(std::fabs(y[1] - ref[1]) <= 1e-4);
    }
}

TEST_CASE("kernel weights telescope to H t^{2H-1}") {
    for (double h : {0.51, 0.65, 0.8, 0.95}) {
        const auto w = kernel_weights(h, 1e-3, 4000);
        CHECK(w[0] == 0.0);
        double s = 0.0;
        for (std::size_t k = 1; k <= 4000; ++k) {
            CHECK(w[k] > 0.0);
            if (k > 1) CHECK(w[k] < w[k - 1]);  // decreasing kernel
            s += w[k];
        }
        CHECK(s == doctest::Approx(h * std::pow(4.0, 2.0 * h - 1.0)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(kernel_weights(0.5, 1e-3, 10), std::domain_error);
}

TEST_CASE("Malliavin derivative vanishes at t = 0") {
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const auto p = simulate_sample(m, {1e-3, 100, 50}, 3, 0);
    REQUIRE(p.malliavin.size() == 3);
    for (const auto& v : p.malliavin[0][1]) CHECK(v == 0.0);
}

TEST_CASE("zero drift: D_{2,t}Y(t) = (0, sigma H t^{2H-1})") {
    const auto m = free_model({0.0, 1.0}, {0.8, 0.8});
    const SimGrid g{1e-3, 1000, 1000};
    const std::vector<double> noise(1000, 0.01);
    const auto p = integrate_path(m, g, {0.0, 0.0}, {}, noise);
    const auto d = malliavin_diagonal_at(p, m, g, 1.0);
    CHECK(std::fabs(d[1][0]) < 1e-15);
    CHECK(d[1][1] == doctest::Approx(0.8).epsilon(1e-13));
    CHECK(d[0][0] == 0.0);
    CHECK(d[0][1] == 0.0);
}

TEST_CASE("linear Malliavin derivative against a quadrature oracle") {
    const Mat2 a{0.0, 1.0, -1.0, -0.4};
    for (double h : {0.65, 0.8}) {
        const auto m = linear_model(1.0, 0.4, 1.0, h);
        const SimGrid g{1e-3, 5000, 1000};
        const auto p = simulate_sample(m, g, 17, 4);
        for (double t : {1.0, 5.0}) {
            const auto d = malliavin_diagonal_at(p, m, g, t);
            CAPTURE(h);
            CAPTURE(t);
            CHECK(std::fabs(d[1][0] - malliavin_oracle(a, 1.0, h, t, 1, 0)) <= 1e-3);
            CHECK(std::fabs(d[1][1] - malliavin_oracle(a, 1.0, h, t, 1, 1)) <= 1e-3);
        }
    }
}

TEST_CASE("the left-endpoint rule is first order, the midpoint rule better") {
    const Mat2 a{0.0, 1.0, -1.0, -0.4};
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const SimGrid g{1e-2, 100, 100};
    const auto p = simulate_sample(m, g, 1, 0);
    const double ref = malliavin_oracle(a, 1.0, 0.8, 1.0, 1, 1);
    const double mid = malliavin_diagonal_at(p, m, g, 1.0, KernelRule::Midpoint)[1][1];
    const double left = malliavin_diagonal_at(p, m, g, 1.0, KernelRule::Left)[1][1];
    CHECK(std::fabs(mid - ref) < std::fabs(left - ref));
}

TEST_CASE("Malliavin values scale linearly with sigma") {
    const SimGrid g{1e-3, 2000, 500};
    const std::vector<double> zero(2000, 0.0);
    const auto m1 = linear_model(1.0, 0.4, 1.0, 0.7);
    const auto m3 = linear_model(1.0, 0.4, 3.0, 0.7);
    const auto p = integrate_path(m1, g, {0.1, 0.2}, {}, zero);
    const auto d1 = malliavin_diagonal(p, m1, g, 2000);
    const auto d3 = malliavin_diagonal(p, m3, g, 2000);
    CHECK(d3[1][0] == doctest::Approx(3.0 * d1[1][0]).epsilon(1e-13));
    CHECK(d3[1][1] == doctest::Approx(3.0 * d1[1][1]).epsilon(1e-13));
}

TEST_CASE("oscillators have no Malliavin derivative in the displacement channel") {
    const auto m = builtin("duffing", {{"eta", 1}, {"alpha", -1}, {"beta", 1}, {"sigma", 0.6}, {"hurst", 0.65},
                                       {"mean1", 0}, {"mean2", 0}, {"var0", 0.05}});
    const auto p = simulate_sample(m, {1e-3, 1000, 100}, 5, 2);
    for (const auto& d : p.malliavin) {
        CHECK(d[0][0] == 0.0);
        CHECK(d[0][1] == 0.0);
    }
}

TEST_CASE("step propagators compose to the matrix exponential") {
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const auto p = simulate_sample(m, {1e-3, 3000, 1000}, 2, 1);
    Mat2 phi = Mat2::identity();
    for (const auto& pm : p.step_props) phi = pm * phi;
    const auto e = oracle::expm_series({0.0, 3.0, -3.0, -1.2});
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(phi.m[i] - e[i]) <= 1e-4);
}

TEST_CASE("nonlinear propagators are invertible") {
    const auto m = builtin("vdp", {{"eta", 2}, {"sigma", 1}, {"hurst", 0.6}, {"mean1", 0}, {"mean2", 0},
                                   {"var0", 0.05}});
    const auto p = simulate_sample(m, {1e-3, 2000, 100}, 9, 0);
    REQUIRE(p.valid);
    for (std::size_t k = 0; k < p.step_props.size(); ++k) {
        // det e^{J dt} = e^{tr(J) dt}
        const Vec2 mid = 0.5 * (p.states[k] + p.states[k + 1]);
        CHECK(p.step_props[k].det() == doctest::Approx(std::exp(m.jacobian(mid).trace() * 1e-3)).epsilon(1e-12));
        CHECK(p.step_props[k].det() > 0.0);
    }
}

TEST_CASE("a single step is the first kernel cell") {
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const SimGrid g{0.1, 1, 1};
    const std::vector<double> noise{0.05};
    const auto p = integrate_path(m, g, {0.0, 0.0}, {}, noise);
    const auto d = malliavin_diagonal(p, m, g, 1);
    const double w1 = 0.8 * std::pow(0.1, 0.6);
    CHECK(d[1][0] == doctest::Approx(w1 * p.half_props[0](0, 1)).epsilon(1e-14));
    CHECK(d[1][1] == doctest::Approx(w1 * p.half_props[0](1, 1)).epsilon(1e-14));
}

TEST_CASE("white noise gives half the intensity on the own channel") {
    const auto m = free_model({0.4, 1.5}, {0.5, 0.5});
    const SimGrid g{1e-2, 100, 50};
    const auto n1 = fgn::sample_white_noise(1e-2, 100, 1);
    const auto n2 = fgn::sample_white_noise(1e-2, 100, 2);
    const auto p = integrate_path(m, g, {0.0, 0.0}, n1, n2);
    const auto d = malliavin_diagonal(p, m, g, 100);
    CHECK(d[0][0] == 0.2);
    CHECK(d[0][1] == 0.0);
    CHECK(d[1][0] == 0.0);
    CHECK(d[1][1] == 0.75);
}

TEST_CASE("ensembles do not depend on the thread count") {
    const auto m = builtin("duffing", {{"eta", 1}, {"alpha", -1}, {"beta", 1}, {"sigma", 0.6}, {"hurst", 0.65},
                                       {"mean1", 0}, {"mean2", 0}, {"var0", 0.05}});
    const SimGrid g{1e-3, 500, 100};
    const auto a = run_ensemble(m, g, 24, 11, {.threads = 1});
    const auto b = run_ensemble(m, g, 24, 11, {.threads = 4});
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        CHECK(a.snapshots[k].y == b.snapshots[k].y);
        CHECK(a.snapshots[k].d == b.snapshots[k].d);
    }
    // sample q of the ensemble is simulate_sample(q)
    const auto p = simulate_sample(m, g, 11, 7);
    CHECK(a.snapshots.back().y[7] == p.states.back());
    CHECK(a.snapshots.back().d[7] == p.malliavin.back());
}

TEST_CASE("linear ensemble covariance at t = 5 within 3 standard errors") {
    LinearParams lp;
    lp.init.mean = {-1.0, -1.0};
    lp.init.var = 0.15;
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const double dt = 2.5e-3;
    const std::size_t n = 2000;
    const auto states = run_states(m, dt, n, {n}, 10000, 23, 0);
    const auto& ys = states[0];
    REQUIRE(ys.size() == 10000);
    const auto ref = gaussian_summary(lp, {5.0});
    const Mat2 s = ref.covariances[0];
    const Vec2 mu = ref.means[0];
    double m1 = 0, m2 = 0;
    for (const auto& y : ys) {
        m1 += y[0];
        m2 += y[1];
    }
    const double N = static_cast<double>(ys.size());
    m1 /= N;
    m2 /= N;
    double c11 = 0, c12 = 0, c22 = 0;
    for (const auto& y : ys) {
        c11 += (y[0] - m1) * (y[0] - m1);
        c12 += (y[0] - m1) * (y[1] - m2);
        c22 += (y[1] - m2) * (y[1] - m2);
    }
    c11 /= N - 1;
    c12 /= N - 1;
    c22 /= N - 1;
    CHECK(std::fabs(m1 - mu[0]) <= 3.0 * std::sqrt(s(0, 0) / N));
    CHECK(std::fabs(m2 - mu[1]) <= 3.0 * std::sqrt(s(1, 1) / N));
    // Gaussian sampling variance of a covariance entry: (S_ii S_jj + S_ij^2) / N
    CHECK(std::fabs(c11 - s(0, 0)) <= 3.0 * std::sqrt(2.0 * s(0, 0) * s(0, 0) / N));
    CHECK(std::fabs(c22 - s(1, 1)) <= 3.0 * std::sqrt(2.0 * s(1, 1) * s(1, 1) / N));
    CHECK(std::fabs(c12 - s(0, 1)) <= 3.0 * std::sqrt((s(0, 0) * s(1, 1) + s(0, 1) * s(0, 1)) / N));
}

TEST_CASE("ensemble files round-trip") {
    const auto m = linear_model(1.0, 0.4, 1.0, 0.8);
    const auto e = run_ensemble(m, {1e-3, 200, 50}, 10, 4);
    const auto dir = scratch("ensemble");
    write_ensemble(e, dir);
    const auto r = read_ensemble(dir);
    CHECK(r.model == e.model);
    CHECK(r.master_seed == 4);
    CHECK(r.grid.n_steps == 200);
    REQUIRE(r.snapshots.size() == e.snapshots.size());
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        CHECK(r.snapshots[k].time == e.snapshots[k].time);
        CHECK(r.snapshots[k].sample == e.snapshots[k].sample);
        CHECK(r.snapshots[k].y == e.snapshots[k].y);
        CHECK(r.snapshots[k].d == e.snapshots[k].d);
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_ensemble(dir), MissingInputError);
}

TEST_CASE("too many divergent paths is a numerical error") {
    auto m = free_model({0.0, 0.3}, {0.8, 0.8});
    m.drift = [](const Vec2& y) { return Vec2{10.0 * y[0] * y[0], 0.0}; };
    m.init.mean = {1.0, 0.0};
    m.init.var = 0.01;
    const SimGrid g{1e-3, 1000, 100};
    CHECK_THROWS_AS(run_ensemble(m, g, 20, 1), NumericalError);
    std::size_t bad = 0;
    const auto st = run_states(m, 1e-3, 1000, {1000}, 20, 1, 1, &bad);
    CHECK(bad == 20);
    CHECK(st[0].empty());
    CHECK_THROWS_AS(run_ensemble(m, g, 0, 1), ConfigError);
}
