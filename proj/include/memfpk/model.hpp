#pragma once

// Two-dimensional systems dY = f(Y) dt + diag(sigma) dB^H with Gaussian
// initial data, and a name-keyed registry of builtin models.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "memfpk/linalg.hpp"

namespace memfpk {

using ParamMap = std::map<std::string, double>;

/// N(mean, var * I).
struct GaussianInit {
    Vec2 mean{0.0, 0.0};
    double var = 1.0;

    Mat2 covariance() const { return Mat2::diag(var, var); }
};

struct SystemModel {
    std::string name;
    std::function<Vec2(const Vec2&)> drift;
    std::function<Mat2(const Vec2&)> jacobian;
    Vec2 sigma{0.0, 0.0};  // diagonal noise intensities
    Vec2 hurst{0.75, 0.75};  // per channel; 0.5 selects white noise
    GaussianInit init;
    ParamMap params;  // everything needed to rebuild the model

    /// Single-degree-of-freedom oscillator: noise enters the velocity only.
    bool sdof() const { return sigma[0] == 0.0; }

    /// Throws ConfigError on invalid noise, Hurst indices or initial data.
    void validate() const;
};

/// Builds a registered model from a flat parameter map.
///
/// Keys shared by every builtin: `mean1`, `mean2`, `var0`, and either
/// `sigma`/`hurst` (SDOF models; sigma1 = 0 implied) or
/// `sigma1`, `sigma2`, `hurst1`, `hurst2`.
///
///   linear_sdof  k, c          f = (v, -k x - c v)
///   duffing      eta, alpha, beta   f = (v, -eta v - alpha x - beta x^3)
///   vdp          eta           f = (v, -eta (-1 + x^2 + v^2) v - x)
///   toggle       alpha1, alpha2, m1, m2
///                f = (alpha1/(1+|y2|^m1) - y1, alpha2/(1+|y1|^m2) - y2)
///
/// Throws ConfigError for unknown names and missing or out-of-range values.
SystemModel builtin(const std::string& name, const ParamMap& params);

using ModelFactory = std::function<SystemModel(const ParamMap&)>;

/// Adds a user-defined model to the registry (replaces an existing entry).
void register_model(const std::string& name, ModelFactory factory);

std::vector<std::string> registered_models();

struct JacobianReport {
    double max_rel_error = 0.0;
    std::size_t n_points = 0;
    bool pass = false;
};

/// Compares the analytic Jacobian with central finite differences at random
/// states drawn uniformly from [lo, hi]^2. Passes iff max relative error <= 1e-5.
JacobianReport verify_jacobian(const SystemModel& model, std::size_t n_points, std::uint64_t seed,
                               double lo = -2.5, double hi = 2.5);

}  // namespace memfpk
