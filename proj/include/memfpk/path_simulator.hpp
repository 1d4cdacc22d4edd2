#pragma once

// Sample paths of dY = f(Y) dt + diag(sigma) dB^H with one-step state
// transition matrices and the diagonal Malliavin derivatives D_{i,t}Y(t)
// at snapshot times.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "memfpk/linalg.hpp"
#include "memfpk/model.hpp"

namespace memfpk {

struct SimGrid {
    double dt = 1e-3;
    std::size_t n_steps = 1000;
    std::size_t snapshot_stride = 50;

    /// Throws ConfigError unless dt > 0, n_steps >= 1, stride >= 1 and
    /// stride divides n_steps.
    void validate() const;

    std::size_t n_snapshots() const { return n_steps / snapshot_stride + 1; }
    std::size_t snapshot_step(std::size_t k) const { return k * snapshot_stride; }
    double time(std::size_t step) const { return static_cast<double>(step) * dt; }
    double horizon() const { return time(n_steps); }

    /// Step index of time t; throws std::invalid_argument if t is not on the grid.
    std::size_t step_of(double t) const;
};

/// Where the transition matrix is evaluated inside each kernel cell.
enum class KernelRule {
    Midpoint,  // Phi(t_h, t_{m+1}) exp(J dt/2)
    Left,      // Phi(t_h, t_m)
};

/// Malliavin values of both channels at one time: d[i] = D_{i,t}Y(t).
using MalliavinPair = std::array<Vec2, 2>;

struct SamplePath {
    std::vector<Vec2> states;  // Y(t_m), m = 0..n_steps
    std::vector<Mat2> step_props;  // P_m = exp(J(Y_{m+1/2}) dt)
    std::vector<Mat2> half_props;  // exp(J(Y_{m+1/2}) dt/2)
    std::vector<MalliavinPair> malliavin;  // one entry per snapshot
    bool valid = true;
    std::size_t diverged_at = 0;  // first step with a non-finite state
};

/// Heun predictor-corrector with additive noise. `noise[i]` holds the n_steps
/// increments of channel i; a channel with sigma_i = 0 may pass an empty span.
/// Integration stops at the first non-finite state and flags the path.
SamplePath integrate_path(const SystemModel& model, const SimGrid& grid, const Vec2& y0,
                          std::span<const double> noise1, std::span<const double> noise2);

/// Kernel weights W[k] = H ((k dt)^{2H-1} - ((k-1) dt)^{2H-1}), k = 1..n;
/// W[k] is H(2H-1) times the exact integral of |t_h - s|^{2H-2} over the
/// cell [t_{h-k}, t_{h-k+1}]. W[0] is unused and set to 0.
std::vector<double> kernel_weights(double hurst, double dt, std::size_t n);

/// D_{i,t_h}Y(t_h) for both channels from the stored propagators. `weights`
/// are kernel_weights of each channel (pass empty vectors to have them computed).
/// A white-noise channel (H = 1/2) yields sigma_i e_i / 2.
MalliavinPair malliavin_diagonal(const SamplePath& path, const SystemModel& model, const SimGrid& grid,
                                 std::size_t h, KernelRule rule = KernelRule::Midpoint,
                                 const std::array<std::vector<double>, 2>& weights = {});

/// Time-based overload; t must be a grid time.
MalliavinPair malliavin_diagonal_at(const SamplePath& path, const SystemModel& model,
                                    const SimGrid& grid, double t,
                                    KernelRule rule = KernelRule::Midpoint);

/// Fills path.malliavin for every snapshot.
void fill_malliavin(SamplePath& path, const SystemModel& model, const SimGrid& grid,
                    KernelRule rule = KernelRule::Midpoint);

/// Every non-divergent sample at one snapshot, in sample-index order.
struct SnapshotTable {
    double time = 0.0;
    std::vector<std::uint64_t> sample;
    std::vector<Vec2> y;
    std::vector<MalliavinPair> d;
};

struct EnsembleResult {
    SimGrid grid;
    std::string model;
    std::uint64_t master_seed = 0;
    std::size_t n_samples = 0;
    KernelRule rule = KernelRule::Midpoint;
    std::vector<std::uint64_t> diverged;  // sample indices excluded from the tables
    std::vector<SnapshotTable> snapshots;
};

struct EnsembleOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    KernelRule rule = KernelRule::Midpoint;
    double max_divergent_fraction = 0.01;
};

/// Seeds: sample q uses s_q = mix_seed(master, q); its initial state draws from
/// mix_seed(s_q, 0) and channel i from mix_seed(s_q, i + 1). Results do not
/// depend on the thread count. Throws NumericalError if more than
/// max_divergent_fraction of the paths diverge.
EnsembleResult run_ensemble(const SystemModel& model, const SimGrid& grid, std::size_t n_samples,
                            std::uint64_t master_seed, const EnsembleOptions& opts = {});

/// The full path of sample q, exactly as run_ensemble integrates it.
SamplePath simulate_sample(const SystemModel& model, const SimGrid& grid, std::uint64_t master_seed,
                           std::uint64_t q, KernelRule rule = KernelRule::Midpoint);

/// States only, for Monte Carlo references. Returns one state vector per
/// requested step (divergent samples dropped); `n_diverged` receives their count.
std::vector<std::vector<Vec2>> run_states(const SystemModel& model, double dt, std::size_t n_steps,
                                          const std::vector<std::size_t>& report_steps,
                                          std::size_t n_samples, std::uint64_t master_seed,
                                          unsigned threads, std::size_t* n_diverged = nullptr);

/// Ensemble on disk: `meta.json` plus `snap_<k>.csv` per snapshot with columns
/// sample,y1,y2,d11,d12,d21,d22 where d_ij = D_i Y_j (sigma_i not applied).
void write_ensemble(const EnsembleResult& e, const std::filesystem::path& dir);
EnsembleResult read_ensemble(const std::filesystem::path& dir);

}  // namespace memfpk
