#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchnet/dataset.hpp"
#include "patchnet/learner.hpp"

namespace patchnet::rollout {

enum class Source { homogenized, patch_dynamics, gap_tooth, learned_mlp, learned_stencil };

std::string to_string(Source s);

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::size_t nx = 0;
    std::size_t ny = 1;
    Source source = Source::homogenized;

    // Strictly increasing times, one state of nx * ny values per time.
    void validate() const;
    std::size_t size() const { return times.size(); }
};

// Learned right-hand side on the macro grid described by `geometry`. Stencil
// models demand the spacing they were trained on.
std::vector<double> rhs_from_model(const nn::Model& model, std::span<const double> u, const data::Geometry& geometry);

struct RolloutOptions {
    double dt = 0.0;
    // Effective diffusivity estimate for the step bound 0.4 dx^2 / (2 a).
    double a_estimate = 1.0;
    double blowup = 1e6;
};

using MacroRhs = std::function<void(std::span<const double> u, std::span<double> dudt)>;

// Fixed-step RK4 with exact landing on t_grid. Dirichlet ends of a 1D
// geometry are held fixed.
Trajectory integrate(const MacroRhs& rhs, const data::Geometry& geometry, std::span<const double> u0,
                     std::span<const double> t_grid, const RolloutOptions& options, Source source);

Trajectory integrate_learned(const nn::Model& model, const data::Geometry& geometry, std::span<const double> u0,
                             std::span<const double> t_grid, const RolloutOptions& options);

enum class MeanMode { grand, per_snapshot };

// sum_j |v_j - w_j|^2 / sum_j |w_j - mean(w)|^2 with w the reference.
double rmse(const Trajectory& pred, const Trajectory& ref, MeanMode mode = MeanMode::grand);

// Conjugate pairs are one mode; amplitudes use the real-amplitude convention,
// so 2 sin(3x) has amplitude 2 and a constant c has amplitude |c|.
struct Mode {
    long kx = 0;
    long ky = 0;
    bool operator==(const Mode&) const = default;
};

struct ModeAmplitude {
    Mode mode;
    double amplitude = 0.0;
};

// All modes of a periodic field, one entry per conjugate pair.
std::vector<ModeAmplitude> mode_amplitudes(std::span<const double> u, std::size_t nx, std::size_t ny);

struct FourierProjection {
    std::vector<Mode> modes;                     // ranked at the first time
    std::vector<std::vector<double>> amplitude;  // [time][mode]
};

FourierProjection fourier_projection(const Trajectory& traj, std::size_t m = 6);

struct ErrorReport {
    std::vector<double> times;
    std::vector<std::vector<double>> mse;  // [trajectory][time]
    std::vector<double> rmse;              // per trajectory
    double mean_mse = 0.0;
    // sum |p - r|^2 / sum |r|^2 over every snapshot.
    double relative_mse = 0.0;
    // Per snapshot: RMS of the reference and |p - r| / |r|.
    std::vector<double> amplitude;
    std::vector<double> relative_error;
    double spearman = 0.0;
};

// Pairs predictions[i] with references[i].
ErrorReport error_report(std::span<const Trajectory> predictions, std::span<const Trajectory> references);

// Rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace patchnet::rollout
