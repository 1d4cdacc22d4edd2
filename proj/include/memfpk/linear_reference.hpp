#pragma once

// Exact results for linear systems dY = A Y dt + diag(sigma) dB^H:
// matrix exponential, transient Gaussian mean/covariance, the analytic
// density, and the memory-dependent diffusion coefficients.

#include <cstddef>
#include <vector>

#include "memfpk/linalg.hpp"
#include "memfpk/model.hpp"
#include "memfpk/pdf_grid.hpp"

namespace memfpk {

/// x'' + c x' + k x = sigma xi^H(t), state (x, v).
struct LinearParams {
    double k = 1.0;
    double c = 0.4;
    double sigma = 1.0;
    double hurst = 0.8;
    GaussianInit init;

    Mat2 a() const { return {0.0, 1.0, -k, -c}; }

    /// k, c >= 0 (k = c = 0 is the free particle used in closed-form checks);
    /// sigma >= 0; H = 1/2 or 1/2 < H < 1.
    void validate() const;

    /// Reads k, c, sigma, H and the initial data of a linear_sdof model.
    static LinearParams from_model(const SystemModel& m);
};

/// General 2x2 linear drift with diagonal noise sharing one Hurst index.
struct LinearSystem {
    Mat2 a;
    Vec2 sigma{0.0, 1.0};
    double hurst = 0.8;
    GaussianInit init;

    static LinearSystem from(const LinearParams& p);
};

/// e^{At}. Underdamped oscillators (0 <= zeta < 1, k > 0) use the damped
/// sine/cosine closed form; everything else the generic 2x2 exponential.
Mat2 expm_A(const LinearParams& p, double t);

struct GaussianSummary {
    std::vector<double> times;
    std::vector<Vec2> means;
    std::vector<Mat2> covariances;
    std::vector<double> cov_error;  // estimated max-abs quadrature error per time
};

/// Mean e^{At} mu0 and covariance
///   e^{At} S0 e^{A't} + H(2H-1) int int e^{A(t-u)} S S' e^{A'(t-v)} |u-v|^{2H-2} du dv.
/// The double integral uses product integration over uniform cells (kernel
/// integrated exactly, smooth factor at cell midpoints) with Richardson
/// extrapolation; cells are doubled until the estimate changes by less than
/// rel_tol * max|Sigma|. Throws NumericalError if 2^14 cells do not suffice.
GaussianSummary gaussian_summary(const LinearSystem& sys, const std::vector<double>& times,
                                 double rel_tol = 1e-8);
GaussianSummary gaussian_summary(const LinearParams& p, const std::vector<double>& times,
                                 double rel_tol = 1e-8);

/// Stationary covariance of the white-noise (H = 1/2) oscillator with k, c > 0:
/// diag(sigma^2/(2ck), sigma^2/(2c)).
Mat2 gwn_stationary_covariance(const LinearParams& p);

/// Gaussian density sampled at the grid nodes. Throws NumericalError if the
/// covariance is not positive definite.
PdfGrid gaussian_pdf(const Vec2& mean, const Mat2& cov, const GridGeometry& geom, double time);
PdfGrid analytic_pdf(const LinearParams& p, double t, const GridGeometry& geom);

/// Diffusion coefficients of the linear memFPK equation,
///   b_ij(t) = sigma_i E[D_{i,t} Y_j] = sigma_i^2 H(2H-1) int_0^t [e^{A tau}]_{ji} tau^{2H-2} d tau.
/// For the oscillator (sigma_1 = 0) b11 = b12 = 0 and the (1,2) entry of
/// e^{A tau} enters b21.
struct LinearCoeffs {
    double b11 = 0.0;
    double b12 = 0.0;
    double b21 = 0.0;
    double b22 = 0.0;
    double error = 0.0;  // last change under cell halving
};

/// Product-integration rule of the path simulator, refined by halving cells
/// until successive values agree to rel_tol.
LinearCoeffs linear_memfpk_coeffs(const LinearSystem& sys, double t, double rel_tol = 1e-6);
LinearCoeffs linear_memfpk_coeffs(const LinearParams& p, double t, double rel_tol = 1e-6);

/// Coefficients at t_n = n dt for n = 0..n_steps, as running sums of the same
/// rule with `substeps` cells per solver step. For H = 1/2 every entry is the
/// white-noise value.
std::vector<LinearCoeffs> linear_coeff_table(const LinearSystem& sys, double dt, std::size_t n_steps,
                                             std::size_t substeps = 8);

/// White-noise limit of the oscillator: constant (b21, b22) = (0, sigma^2/2).
LinearCoeffs gwn_coeffs(double sigma);

}  // namespace memfpk
