#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "patchnet/dataset.hpp"
#include "patchnet/field.hpp"
#include "patchnet/micro_solvers.hpp"

namespace patchnet::eqfree {

// p(x) = sum_m coeffs[m] * (x - center)^m
struct Polynomial {
    double center = 0.0;
    std::vector<double> coeffs;

    double operator()(double x) const;
    double derivative(double x, unsigned order = 1) const;
};

// Teeth on a Dirichlet interval. Macro node 0 is x_lo and node teeth + 1 is
// x_hi; both are zero-width ghost teeth carrying the boundary values. Interior
// teeth sit at x_lo + i * spacing() for i = 1 .. teeth.
struct ToothGrid1D {
    double x_lo = 0.0;
    double x_hi = 1.0;
    std::size_t teeth = 9;
    double h = 2e-3;        // tooth (core) width
    double buffer = 4e-2;   // buffered patch width H
    unsigned coupling_degree = 2;
    unsigned lifting_degree = 2;
    double u_lo = 0.0;
    double u_hi = 0.0;

    std::size_t nodes() const { return teeth + 2; }
    double spacing() const;
    double center(std::size_t node) const;
    double width(std::size_t node) const;
    bool is_boundary(std::size_t node) const { return node == 0 || node + 1 == nodes(); }
    std::vector<double> centers() const;
    void validate() const;
};

// Values at every macro node, boundary nodes included.
struct MacroField1D {
    std::vector<double> u;
    double t = 0.0;
};

enum class ProjectiveScheme { euler, rk2 };

struct PatchConfig1D {
    ToothGrid1D grid;
    double dx = 5e-5;          // micro resolution
    double dt_micro = 1e-5;
    double dt_macro = 1e-3;
    std::size_t n_burst = 1;
    std::size_t n_heal = 0;
    double theta = 0.5;
    ProjectiveScheme scheme = ProjectiveScheme::euler;

    void validate(const micro::DetailedProblem1D& problem) const;
};

// Exact average over [a, b] of the piecewise-linear interpolant of a state
// (the trapezoid rule when a and b are nodes).
double interval_average(const micro::MicroState1D& state, double a, double b);

// One state per interior tooth, each covering at least its tooth interval.
MacroField1D restrict_teeth(std::span<const micro::MicroState1D> teeth, const ToothGrid1D& grid, double t = 0.0);

Polynomial coupling_polynomial(const MacroField1D& field, std::size_t node, const ToothGrid1D& grid);

// p' at the left and right tooth edges.
std::pair<double, double> tooth_edge_slopes(const Polynomial& p, const ToothGrid1D& grid, std::size_t node);

// Taylor profile with finite-difference derivatives, sampled on the buffered
// patch [x_i - H/2, x_i + H/2] with spacing dx.
micro::MicroState1D lift(const MacroField1D& field, std::size_t node, const ToothGrid1D& grid, double dx);

// Sampled initial data on the tooth cores (gap-tooth) or buffered patches.
std::vector<micro::MicroState1D> sample_teeth(const std::function<double(double)>& u0, const ToothGrid1D& grid,
                                              double dx, bool buffered);

// Neumann-coupled teeth, precomputed for one grid and medium.
class GapTooth1D {
public:
    GapTooth1D(const ToothGrid1D& grid, const micro::DetailedProblem1D& problem, double dx, double theta = 0.5);

    std::vector<micro::MicroState1D> step(std::span<const micro::MicroState1D> teeth, double dt) const;
    MacroField1D restrict(std::span<const micro::MicroState1D> teeth, double t = 0.0) const;
    const ToothGrid1D& grid() const { return grid_; }

private:
    ToothGrid1D grid_;
    micro::DetailedProblem1D problem_;
    double dx_, theta_;
    std::vector<std::vector<double>> a_half_;
    // Effective coefficient converting an edge slope into a flux.
    std::vector<std::pair<double, double>> edge_a_;
};

std::vector<micro::MicroState1D> gap_tooth_step_1d(std::span<const micro::MicroState1D> teeth, const ToothGrid1D& grid,
                                                   const micro::DetailedProblem1D& problem, double dt,
                                                   double theta = 0.5);

// Buffered patches with Dirichlet buffer edges, precomputed per config.
class PatchDynamics1D {
public:
    PatchDynamics1D(const PatchConfig1D& config, const micro::DetailedProblem1D& problem);

    // Lift, heal, burst and restrict every tooth; zero at boundary nodes.
    std::vector<double> estimate(const MacroField1D& field) const;
    // One projective step (Euler or Heun) of length dt_macro.
    MacroField1D advance(const MacroField1D& field) const;
    const PatchConfig1D& config() const { return config_; }

private:
    PatchConfig1D config_;
    micro::DetailedProblem1D problem_;
    std::vector<std::vector<double>> a_half_;
};

std::vector<double> estimate_dUdt(const MacroField1D& field, const PatchConfig1D& config,
                                  const micro::DetailedProblem1D& problem);

MacroField1D projective_step(const MacroField1D& field, std::span<const double> dudt, double dt);

data::Geometry geometry_1d(const ToothGrid1D& grid);

// Initial macro values are tooth averages of u0 on the fine grid; the
// boundary nodes take the grid's Dirichlet data.
data::SnapshotDataset simulate_patch_dynamics_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                                 const std::function<double(double)>& u0, double T,
                                                 double sample_interval);
data::SnapshotDataset simulate_patch_dynamics_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                                 const MacroField1D& u0, double T, double sample_interval);

// Gap-tooth mode: continuous micro time, dU/dt from one-step differences.
data::SnapshotDataset simulate_gap_tooth_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                            const std::function<double(double)>& u0, double T,
                                            double sample_interval);

// ---------------------------------------------------------------------------
// 2D patches on the periodic lattice.

enum class Coupling2D {
    // Ghost = interior value one `shift` inward + increment of the macro interpolant.
    period_shift,
    // Ghost = macro interpolant itself (plain Dirichlet coupling).
    interpolated,
};

struct PatchGrid2D {
    micro::LatticeProblem2D lattice = micro::LatticeProblem2D::reference_medium(480);
    std::size_t patches = 16;   // per side
    std::size_t interior = 5;   // lattice points per side inside a patch
    std::size_t core = 3;       // points per side averaged by restriction
    std::size_t phase = 2;      // patch centre lattice index = I * spacing() + phase
    std::size_t shift = 0;      // period_shift distance; 0 selects the lattice period
    Coupling2D coupling = Coupling2D::period_shift;
    micro::TimeScheme scheme = micro::TimeScheme::rk4;
    double dt = 0.0;            // 0 selects the explicit stability bound

    std::size_t spacing() const { return lattice.nx / patches; }
    std::size_t radius() const { return (interior - 1) / 2; }
    std::size_t shift_distance() const { return shift == 0 ? lattice.period : shift; }
    long center_index(std::size_t I) const { return static_cast<long>(I * spacing() + phase); }
    double center(std::size_t I) const;
    double micro_dt() const;
    // Fraction of the domain covered by patches including ghost rings.
    double footprint() const;
    void validate() const;
};

// Ghost values of patch (I, J) from the box-consistent tensor-product
// quadratic through the 3x3 neighbourhood of U. Order: left edge (a = -r-1)
// for b = -r..r, right edge, bottom edge (b = -r-1) for a = -r..r, top edge.
std::vector<double> patch_edge_values_2d(const Field2D& U, std::size_t I, std::size_t J, const PatchGrid2D& grid);

// Lattice offsets (a, b) of the ghost points in the order used above.
std::vector<std::pair<long, long>> ghost_offsets(const PatchGrid2D& grid);

class GapTooth2D {
public:
    // `dt` is the micro step used by step(); RK4 requires dt <= stable_dt().
    GapTooth2D(PatchGrid2D grid, double dt);

    // Patch-major state: patch (I, J) interior point (a, b), |a|, |b| <= r,
    // lives at ((I * P + J) * m + (a + r)) * m + (b + r).
    std::vector<double> initial_state(const std::function<double(double, double)>& u0) const;
    Field2D restrict(std::span<const double> state) const;
    // Instantaneous lattice right-hand side on every patch interior.
    std::vector<double> rhs(std::span<const double> state) const;
    Field2D restricted_rhs(std::span<const double> state) const;
    void step(std::vector<double>& state) const;

    const PatchGrid2D& grid() const { return grid_; }
    double dt() const { return dt_; }

private:
    enum Dir { east = 0, west = 1, north = 2, south = 3 };
    struct Ghost {
        std::size_t interior;   // interior point the ghost bond attaches to
        Dir dir;
        long source;            // interior point copied by period_shift, -1 otherwise
        double weights[3][3];   // macro weights, [alpha + 1][beta + 1]
    };
    double ghost_value(const Ghost& g, std::span<const double> U, std::size_t I, std::size_t J,
                       std::span<const double> v) const;
    void patch_rhs(std::size_t patch, std::span<const double> U, std::span<const double> v,
                   std::span<double> out) const;

    PatchGrid2D grid_;
    std::size_t P_, m_, r_;
    double dt_;
    std::vector<Ghost> ghosts_;
    // Per patch: bond coefficient / h^2 for each interior point and direction.
    std::vector<std::vector<double>> bonds_;
    // Backward Euler: per patch index into implicit_inverse_.
    std::vector<std::size_t> inverse_of_;
    std::vector<std::vector<double>> implicit_inverse_;
};

data::Geometry geometry_2d(const PatchGrid2D& grid);

data::SnapshotDataset simulate_gap_tooth_2d(const PatchGrid2D& grid, const std::function<double(double, double)>& u0,
                                            double T, double sample_interval);

}  // namespace patchnet::eqfree
