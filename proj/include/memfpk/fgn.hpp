#pragma once

// Exact fractional Gaussian noise: increments of fractional Brownian motion
// on a uniform grid, generated by circulant embedding (Davies-Harte) with a
// Cholesky fallback for small problems.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace memfpk::fgn {

struct FgnSpec {
    double hurst = 0.75;
    double dt = 1.0;
    std::size_t n_steps = 1;
    std::uint64_t seed = 0;

    /// Throws std::domain_error unless 1/2 < hurst < 1, std::invalid_argument
    /// for dt <= 0 or n_steps == 0.
    void validate() const;
};

struct FgnIncrements {
    std::vector<double> values;  // B^H(t_{m+1}) - B^H(t_m)
    FgnSpec spec;
};

/// Covariance of two FBM increments `lag` steps apart:
/// (dt^{2H}/2)(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).
double increment_autocovariance(double hurst, std::size_t lag, double dt);

/// Power spectral density of unit FGN, H Gamma(2H) sin(H pi)/pi |omega|^{1-2H}.
double psd(double hurst, double omega);

/// 64-bit seed derivation (SplitMix64 finaliser applied to
/// master + golden_gamma * (index + 1)). Used for per-sample and
/// per-channel streams so ensembles do not depend on scheduling.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

enum class Method { Auto, DaviesHarte, Cholesky };

/// Reusable sampler for a fixed (H, dt, n). Owns its FFT plan and buffers;
/// one instance per worker thread.
class FgnGenerator {
public:
    FgnGenerator(double hurst, double dt, std::size_t n_steps, Method method = Method::Auto);
    ~FgnGenerator();
    FgnGenerator(FgnGenerator&&) noexcept;
    FgnGenerator& operator=(FgnGenerator&&) noexcept;
    FgnGenerator(const FgnGenerator&) = delete;
    FgnGenerator& operator=(const FgnGenerator&) = delete;

    /// Fills `out` (size n_steps) with one exact FGN realisation.
    void sample(std::uint64_t seed, std::span<double> out);

    std::size_t size() const { return n_; }
    double hurst() const { return hurst_; }
    /// Method actually used after the embedding check.
    Method method() const { return method_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double hurst_ = 0.0;
    double dt_ = 0.0;
    std::size_t n_ = 0;
    Method method_ = Method::Auto;
};

FgnIncrements sample_path(const FgnSpec& spec);

/// White-noise mode (H = 1/2): i.i.d. N(0, dt) increments.
std::vector<double> sample_white_noise(double dt, std::size_t n_steps, std::uint64_t seed);

/// Either a fractional or a white-noise (hurst == 0.5) increment source.
class IncrementSource {
public:
    IncrementSource(double hurst, double dt, std::size_t n_steps);
    void sample(std::uint64_t seed, std::span<double> out);
    bool white() const { return white_; }

private:
    bool white_ = false;
    double dt_ = 0.0;
    std::unique_ptr<FgnGenerator> fgn_;
};

}  // namespace memfpk::fgn
