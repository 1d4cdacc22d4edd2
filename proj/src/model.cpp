#include "memfpk/model.hpp"

#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

#include "memfpk/errors.hpp"

namespace memfpk {

namespace {

double require(const ParamMap& p, const std::string& model, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) {
        throw ConfigError("model '" + model + "': missing parameter '" + key + "'");
    }
    if (!std::isfinite(it->second)) {
        throw ConfigError("model '" + model + "': parameter '" + key + "' is not finite");
    }
    return it->second;
}

double optional(const ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

void read_noise_sdof(SystemModel& m, const ParamMap& p) {
    double sigma = 0.0;
    if (p.count("sigma")) {
        sigma = require(p, m.name, "sigma");
    } else {
        sigma = require(p, m.name, "sigma2");
    }
    if (optional(p, "sigma1", 0.0) != 0.0) {
        throw ConfigError("model '" + m.name + "': SDOF oscillators take noise on the velocity only (sigma1 must be 0)");
    }
    const double h = p.count("hurst") ? require(p, m.name, "hurst") : require(p, m.name, "hurst2");
    if (p.count("hurst1") && p.at("hurst1") != h) {
        throw ConfigError("model '" + m.name + "': oscillators use a single Hurst index (H1 = H2)");
    }
    m.sigma = {0.0, sigma};
    m.hurst = {h, h};
}

void read_noise_general(SystemModel& m, const ParamMap& p) {
    m.sigma = {require(p, m.name, "sigma1"), require(p, m.name, "sigma2")};
    m.hurst = {require(p, m.name, "hurst1"), require(p, m.name, "hurst2")};
}

void read_init(SystemModel& m, const ParamMap& p) {
    m.init.mean = {require(p, m.name, "mean1"), require(p, m.name, "mean2")};
    m.init.var = require(p, m.name, "var0");
}

SystemModel make_linear(const ParamMap& p) {
    SystemModel m;
    m.name = "linear_sdof";
    const double k = require(p, m.name, "k");
    const double c = require(p, m.name, "c");
    if (k < 0.0 || c < 0.0) throw ConfigError("linear_sdof: k and c must be non-negative");
    m.drift = [k, c](const Vec2& y) { return Vec2{y[1], -k * y[0] - c * y[1]}; };
    m.jacobian = [k, c](const Vec2&) { return Mat2{0.0, 1.0, -k, -c}; };
    read_noise_sdof(m, p);
    read_init(m, p);
    m.params = p;
    return m;
}

SystemModel make_duffing(const ParamMap& p) {
    SystemModel m;
    m.name = "duffing";
    const double eta = require(p, m.name, "eta");
    const double alpha = require(p, m.name, "alpha");
    const double beta = require(p, m.name, "beta");
    if (eta <= 0.0) throw ConfigError("duffing: damping eta must be positive");
    m.drift = [=](const Vec2& y) {
        const double x = y[0];
        return Vec2{y[1], -eta * y[1] - alpha * x - beta * x * x * x};
    };
    m.jacobian = [=](const Vec2& y) {
        return Mat2{0.0, 1.0, -alpha - 3.0 * beta * y[0] * y[0], -eta};
    };
    read_noise_sdof(m, p);
    read_init(m, p);
    m.params = p;
    return m;
}

SystemModel make_vdp(const ParamMap& p) {
    SystemModel m;
    m.name = "vdp";
    const double eta = require(p, m.name, "eta");
    if (eta <= 0.0) throw ConfigError("vdp: eta must be positive");
    m.drift = [=](const Vec2& y) {
        const double x = y[0];
        const double v = y[1];
        return Vec2{v, -eta * (-1.0 + x * x + v * v) * v - x};
    };
    m.jacobian = [=](const Vec2& y) {
        const double x = y[0];
        const double v = y[1];
        return Mat2{0.0, 1.0, -2.0 * eta * x * v - 1.0, -eta * (-1.0 + x * x + 3.0 * v * v)};
    };
    read_noise_sdof(m, p);
    read_init(m, p);
    m.params = p;
    return m;
}

int hill_exponent(const ParamMap& p, const std::string& key) {
    const double v = require(p, "toggle", key);
    if (v < 1.0 || std::floor(v) != v) {
        throw ConfigError("toggle: Hill coefficient '" + key + "' must be an integer >= 1");
    }
    return static_cast<int>(v);
}

// |y|^m and its derivative m |y|^{m-1} sign(y).
double hill_pow(double y, int m) { return std::pow(std::fabs(y), m); }
double hill_dpow(double y, int m) {
    if (y == 0.0) return 0.0;  // one-sided kink for m = 1
    return m * std::pow(std::fabs(y), m - 1) * (y > 0.0 ? 1.0 : -1.0);
}

SystemModel make_toggle(const ParamMap& p) {
    SystemModel m;
    m.name = "toggle";
    const double a1 = require(p, m.name, "alpha1");
    const double a2 = require(p, m.name, "alpha2");
    if (a1 <= 0.0 || a2 <= 0.0) throw ConfigError("toggle: synthesis rates must be positive");
    const int m1 = hill_exponent(p, "m1");
    const int m2 = hill_exponent(p, "m2");
    m.drift = [=](const Vec2& y) {
        return Vec2{a1 / (1.0 + hill_pow(y[1], m1)) - y[0], a2 / (1.0 + hill_pow(y[0], m2)) - y[1]};
    };
    m.jacobian = [=](const Vec2& y) {
        const double d1 = 1.0 + hill_pow(y[1], m1);
        const double d2 = 1.0 + hill_pow(y[0], m2);
        return Mat2{-1.0, -a1 * hill_dpow(y[1], m1) / (d1 * d1), -a2 * hill_dpow(y[0], m2) / (d2 * d2),
                    -1.0};
    };
    read_noise_general(m, p);
    read_init(m, p);
    m.params = p;
    return m;
}

struct Registry {
    std::mutex mutex;
    std::map<std::string, ModelFactory> factories{
        {"linear_sdof", make_linear},
        {"duffing", make_duffing},
        {"vdp", make_vdp},
        {"toggle", make_toggle},
    };
};

Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace

void SystemModel::validate() const {
    if (!drift || !jacobian) throw ConfigError("model '" + name + "' lacks drift or Jacobian");
    if (sigma[0] < 0.0 || sigma[1] < 0.0) throw ConfigError("noise intensities must be non-negative");
    if (sigma[0] == 0.0 && sigma[1] == 0.0) throw ConfigError("at least one noise intensity must be non-zero");
    for (int i = 0; i < 2; ++i) {
        const double h = hurst[i];
        if (!(h == 0.5 || (h > 0.5 && h < 1.0))) {
            std::ostringstream os;
            os << "Hurst index H" << (i + 1) << " = " << h << " outside (1/2, 1)";
            throw ConfigError(os.str());
        }
    }
    if (!(init.var > 0.0)) throw ConfigError("initial variance must be positive");
}

SystemModel builtin(const std::string& name, const ParamMap& params) {
    ModelFactory factory;
    {
        auto& r = registry();
        std::lock_guard lock(r.mutex);
        auto it = r.factories.find(name);
        if (it == r.factories.end()) throw ConfigError("unknown model '" + name + "'");
        factory = it->second;
    }
    SystemModel m = factory(params);
    m.validate();
    return m;
}

void register_model(const std::string& name, ModelFactory factory) {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    r.factories[name] = std::move(factory);
}

std::vector<std::string> registered_models() {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    std::vector<std::string> names;
    for (const auto& [k, v] : r.factories) names.push_back(k);
    return names;
}

JacobianReport verify_jacobian(const SystemModel& model, std::size_t n_points, std::uint64_t seed,
                               double lo, double hi) {
    if (n_points == 0) throw std::invalid_argument("verify_jacobian needs at least one point");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    JacobianReport rep;
    rep.n_points = n_points;
    for (std::size_t n = 0; n < n_points; ++n) {
        const Vec2 y{u(rng), u(rng)};
        const Mat2 j = model.jacobian(y);
        // Column scale for the error normalisation: a Jacobian entry of 0 is
        // compared against the largest entry of the matrix.
        const double scale = std::max(1.0, max_abs(j));
        for (int col = 0; col < 2; ++col) {
            const double h = 1e-6 * std::max(1.0, std::fabs(y[col]));
            Vec2 yp = y;
            Vec2 ym = y;
            yp[col] += h;
            ym[col] -= h;
            const Vec2 fp = model.drift(yp);
            const Vec2 fm = model.drift(ym);
            for (int row = 0; row < 2; ++row) {
                const double fd = (fp[row] - fm[row]) / (2.0 * h);
                const double err = std::fabs(fd - j(row, col)) / scale;
                rep.max_rel_error = std::max(rep.max_rel_error, err);
            }
        }
    }
    rep.pass = rep.max_rel_error <= 1e-5;
    return rep;
}

}  // namespace memfpk
