#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "patchnet/field.hpp"

namespace patchnet::micro {

// Periodic function a(y) with unit period.
class Diffusivity {
public:
    enum class Kind { constant, sinusoidal, table };

    static Diffusivity constant(double value);
    // mean + amplitude * sin(2 pi y)
    static Diffusivity sinusoidal(double mean, double amplitude);
    // Uniform samples at y_j = j / n, periodic linear interpolation.
    static Diffusivity table(std::vector<double> samples);

    double operator()(double y) const;
    // Samples at y_j = j / n.
    std::vector<double> samples(std::size_t n) const;
    double lower_bound() const;
    double upper_bound() const;

    Kind kind() const { return kind_; }
    const std::vector<double>& parameters() const { return params_; }

private:
    Diffusivity(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}
    Kind kind_;
    std::vector<double> params_;
};

enum class BoundaryKind { dirichlet, neumann };

// Dirichlet: `value` is u at that end. Neumann: `value` is the flux
// a * du/dx at that end, measured in the +x direction on both sides.
struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::dirichlet;
    double value = 0.0;

    static BoundaryCondition dirichlet(double v) { return {BoundaryKind::dirichlet, v}; }
    static BoundaryCondition neumann(double flux) { return {BoundaryKind::neumann, flux}; }
};

struct BoundaryPair {
    BoundaryCondition lo;
    BoundaryCondition hi;
};

struct DetailedProblem1D {
    Diffusivity a = Diffusivity::constant(1.0);
    double epsilon = 1.0;
    double x_lo = 0.0;
    double x_hi = 1.0;
    BoundaryPair bc;

    void validate() const;
};

// Vertex-centred fine grid: node i sits at x0 + i * dx.
struct MicroState1D {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> u;
    double t = 0.0;

    std::size_t size() const { return u.size(); }
    double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
    double x_end() const { return x(u.size() - 1); }
    void validate() const;
};

// a((x_i + dx/2) / eps) for every interval of the grid (size() - 1 values).
std::vector<double> sample_diffusivity(const DetailedProblem1D& problem, const MicroState1D& grid);

// One theta-scheme step of the conservative flux-form discretization.
// theta = 1/2 is Crank-Nicolson, theta = 1 backward Euler.
MicroState1D step_micro_1d(const MicroState1D& state, std::span<const double> half_diffusivity,
                           const BoundaryPair& bc, double dt, double theta = 0.5);

// Right-hand side of the semi-discrete system (Dirichlet nodes get zero).
std::vector<double> micro_rhs_1d(const MicroState1D& state, std::span<const double> half_diffusivity,
                                 const BoundaryPair& bc);

// Trapezoidal mass, the quantity the flux form conserves with zero-flux ends.
double trapezoid_mass(const MicroState1D& state);

// Integrates the detailed problem, landing exactly on every t_grid entry.
std::vector<MicroState1D> solve_detailed_1d(const DetailedProblem1D& problem, const MicroState1D& u0,
                                            std::span<const double> t_grid, double max_dt,
                                            double theta = 0.5);

// ---------------------------------------------------------------------------
// 2D heterogeneous lattice on [0, 2 pi)^2.

enum class TimeScheme { rk4, backward_euler };

// Periodic bond diffusivities. kappa_x(ix, iy) belongs to the bond between
// (ix, iy) and (ix + 1, iy); kappa_y(ix, iy) to the bond (ix, iy)-(ix, iy + 1).
// Tiles are stored as period x period arrays indexed [ix % p][iy % p].
struct LatticeProblem2D {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t period = 1;
    Field2D tile_x;
    Field2D tile_y;

    double h() const;
    double kappa_x(long ix, long iy) const;
    double kappa_y(long ix, long iy) const;
    double kappa_max() const;
    // Explicit stability bound h^2 / (4 max kappa).
    double stable_dt() const;
    void validate() const;

    static LatticeProblem2D uniform(std::size_t n, double kappa);
    // The 3-periodic medium used in the 2D experiment.
    static LatticeProblem2D reference_medium(std::size_t n);
};

// Bond coefficients expanded over the whole lattice for repeated evaluation.
class LatticeOperator {
public:
    explicit LatticeOperator(const LatticeProblem2D& problem);
    // out = L u, with L the generator of the lattice ODE.
    void apply(const Field2D& u, Field2D& out) const;

private:
    std::size_t nx_, ny_;
    double inv_h2_;
    Field2D kx_, ky_;
};

Field2D lattice_rhs(const Field2D& u, const LatticeProblem2D& problem);

// One step on the full periodic lattice. RK4 refuses dt above stable_dt().
Field2D step_lattice_2d(const Field2D& u, const LatticeProblem2D& problem, double dt,
                        TimeScheme scheme = TimeScheme::rk4);

// Patch mode: `u` is an (m+2) x (m+2) block whose outer ring holds
// caller-supplied ghost values that stay fixed during the step. (ix0, iy0) is
// the global lattice index of the first interior point; it selects the
// diffusivity phase.
Field2D step_lattice_patch(const Field2D& u, const LatticeProblem2D& problem, long ix0, long iy0,
                           double dt);

}  // namespace patchnet::micro
