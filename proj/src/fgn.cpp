#include "memfpk/fgn.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace memfpk::fgn {

namespace {

// FFTW's planner is not thread-safe; execution with distinct arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void check_hurst_open(double hurst) {
    if (!(hurst > 0.0 && hurst < 1.0)) {
        throw std::domain_error("Hurst index must lie in (0, 1), got " + std::to_string(hurst));
    }
}

}  // namespace

void FgnSpec::validate() const {
    if (!(hurst > 0.5 && hurst < 1.0)) {
        throw std::domain_error("FGN Hurst index must lie in (1/2, 1), got " + std::to_string(hurst));
    }
    if (!(dt > 0.0)) throw std::invalid_argument("FGN time step must be positive");
    if (n_steps == 0) throw std::invalid_argument("FGN path needs at least one step");
}

double increment_autocovariance(double hurst, std::size_t lag, double dt) {
    check_hurst_open(hurst);
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    const double h2 = 2.0 * hurst;
    const double k = static_cast<double>(lag);
    const double scale = 0.5 * std::pow(dt, h2);
    if (lag == 0) return std::pow(dt, h2);
    return scale * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(k - 1.0, h2));
}

double psd(double hurst, double omega) {
    check_hurst_open(hurst);
    if (hurst > 0.5 && omega == 0.0) {
        throw std::domain_error("FGN spectral density diverges at omega = 0 for H > 1/2");
    }
    const double pi = std::numbers::pi;
    const double amp = hurst * std::tgamma(2.0 * hurst) * std::sin(hurst * pi) / pi;
    if (hurst == 0.5) return amp;
    return amp * std::pow(std::fabs(omega), 1.0 - 2.0 * hurst);
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct FgnGenerator::Impl {
    // Davies-Harte state
    std::size_t m = 0;  // embedding length (2M)
    std::vector<double> scale;  // sqrt factors, size M+1
    fftw_complex* spectrum = nullptr;
    double* out = nullptr;
    fftw_plan plan = nullptr;

    // Cholesky state (lower triangle, row-major n x n)
    std::vector<double> chol;

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (plan) fftw_destroy_plan(plan);
        if (spectrum) fftw_free(spectrum);
        if (out) fftw_free(out);
    }
};

namespace {

// Returns false if the Toeplitz covariance is not numerically positive definite.
bool cholesky_factor(double hurst, double dt, std::size_t n, std::vector<double>& l) {
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) gamma[k] = increment_autocovariance(hurst, k, dt);
    l.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = gamma[i - j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return true;
}

constexpr std::size_t kCholeskyLimit = 4096;

}  // namespace

FgnGenerator::FgnGenerator(double hurst, double dt, std::size_t n_steps, Method method)
    : impl_(std::make_unique<Impl>()), hurst_(hurst), dt_(dt), n_(n_steps), method_(method) {
    FgnSpec{hurst, dt, n_steps, 0}.validate();

    if (method_ != Method::Cholesky && n_ >= 2) {
        std::size_t half = 1;
        while (half < n_ - 1) half <<= 1;
        const std::size_t m = 2 * half;
        impl_->m = m;

        std::vector<double> row(m);
        for (std::size_t k = 0; k <= half; ++k) row[k] = increment_autocovariance(hurst, k, dt);
        for (std::size_t k = 1; k < half; ++k) row[m - k] = row[k];

        std::vector<std::complex<double>> eig(half + 1);
        {
            std::lock_guard lock(planner_mutex());
            fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(m), row.data(),
                                               reinterpret_cast<fftw_complex*>(eig.data()),
                                               FFTW_ESTIMATE);
            fftw_execute(p);
            fftw_destroy_plan(p);
        }

        double lmax = 0.0;
        double lmin = 0.0;
        for (const auto& e : eig) {
            lmax = std::max(lmax, e.real());
            lmin = std::min(lmin, e.real());
        }
        const bool embeddable = lmin >= -1e-10 * lmax;
        if (embeddable) {
            impl_->scale.resize(half + 1);
            const double md = static_cast<double>(m);
            for (std::size_t k = 0; k <= half; ++k) {
                const double lam = std::max(0.0, eig[k].real());
                const bool real_mode = (k == 0 || k == half);
                impl_->scale[k] = std::sqrt(lam / (real_mode ? md : 2.0 * md));
            }
            std::lock_guard lock(planner_mutex());
            impl_->spectrum = fftw_alloc_complex(half + 1);
            impl_->out = fftw_alloc_real(m);
            impl_->plan = fftw_plan_dft_c2r_1d(static_cast<int>(m), impl_->spectrum, impl_->out,
                                               FFTW_ESTIMATE);
            method_ = Method::DaviesHarte;
            return;
        }
        if (method_ == Method::DaviesHarte || n_ > kCholeskyLimit) {
            throw std::runtime_error("circulant embedding is not nonnegative definite for n = " +
                                     std::to_string(n_));
        }
    }

    if (n_ > kCholeskyLimit) {
        throw std::invalid_argument("Cholesky FGN generation limited to n <= 4096");
    }
    if (!cholesky_factor(hurst, dt, n_, impl_->chol)) {
        throw std::runtime_error("FGN covariance matrix is not positive definite");
    }
    method_ = Method::Cholesky;
}

FgnGenerator::~FgnGenerator() = default;
FgnGenerator::FgnGenerator(FgnGenerator&&) noexcept = default;
FgnGenerator& FgnGenerator::operator=(FgnGenerator&&) noexcept = default;

void FgnGenerator::sample(std::uint64_t seed, std::span<double> out) {
    if (out.size() != n_) throw std::invalid_argument("output span does not match generator size");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    if (method_ == Method::Cholesky) {
        std::vector<double> z(n_);
        for (auto& v : z) v = normal(rng);
        const auto& l = impl_->chol;
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k <= i; ++k) s += l[i * n_ + k] * z[k];
            out[i] = s;
        }
        return;
    }
    const std::size_t half = impl_->m / 2;
    auto* w = impl_->spectrum;
    const auto& sc = impl_->scale;
    w[0][0] = sc[0] * normal(rng);
    w[0][1] = 0.0;
    for (std::size_t k = 1; k < half; ++k) {
        w[k][0] = sc[k] * normal(rng);
        w[k][1] = sc[k] * normal(rng);
    }
    w[half][0] = sc[half] * normal(rng);
    w[half][1] = 0.0;
    fftw_execute_dft_c2r(impl_->plan, w, impl_->out);
    std::copy_n(impl_->out, n_, out.begin());
}

FgnIncrements sample_path(const FgnSpec& spec) {
    spec.validate();
    FgnGenerator gen(spec.hurst, spec.dt, spec.n_steps);
    FgnIncrements r{std::vector<double>(spec.n_steps), spec};
    gen.sample(spec.seed, r.values);
    return r;
}

std::vector<double> sample_white_noise(double dt, std::size_t n_steps, std::uint64_t seed) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    std::vector<double> v(n_steps);
    for (auto& x : v) x = normal(rng);
    return v;
}

IncrementSource::IncrementSource(double hurst, double dt, std::size_t n_steps)
    : white_(hurst == 0.5), dt_(dt) {
    if (!white_) fgn_ = std::make_unique<FgnGenerator>(hurst, dt, n_steps);
}

void IncrementSource::sample(std::uint64_t seed, std::span<double> out) {
    if (fgn_) {
        fgn_->sample(seed, out);
        return;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt_));
    for (auto& x : out) x = normal(rng);
}

}  // namespace memfpk::fgn
