#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "patchnet/field.hpp"
#include "patchnet/micro_solvers.hpp"

namespace patchnet::homog {

// Corrector chi on y_j = j / n and the effective coefficient it implies.
struct CellSolution {
    std::vector<double> chi;
    double a_star = std::numeric_limits<double>::quiet_NaN();

    std::size_t n() const { return chi.size(); }
};

// Periodic cell problem d/dy(a dchi/dy) = da/dy with zero-mean chi. `a` holds
// node samples a(y_j); interval coefficients are midpoint averages.
CellSolution solve_cell_problem(std::span<const double> a);

// a* = int a (1 - dchi/dy) dy, periodic trapezoid rule. Stores a* in `cell`.
double effective_diffusivity(CellSolution& cell, std::span<const double> a);

// Max-norm residual of the discrete cell equation.
double cell_residual(const CellSolution& cell, std::span<const double> a);

double harmonic_mean(std::span<const double> a);
double arithmetic_mean(std::span<const double> a);

// Effective coefficient of a periodic medium, cell problem on n samples.
double effective_coefficient(const micro::Diffusivity& a, std::size_t n = 4096);

// ---------------------------------------------------------------------------

struct HomogenizedModel1D {
    double a_star = 1.0;
    double x_lo = 0.0;
    double x_hi = 1.0;
    double dx = 5e-3;

    std::size_t nodes() const;
    double x(std::size_t j) const { return x_lo + static_cast<double>(j) * dx; }
    void validate() const;
};

struct Snapshots1D {
    std::vector<double> x;
    std::vector<double> t;
    std::vector<std::vector<double>> u;

    // Linear interpolation of snapshot k at position xq.
    double at(std::size_t k, double xq) const;
};

// Method of lines with central differences, RK4 with dt <= 0.4 dx^2 / (2 a*),
// Dirichlet ends fixed at the endpoint values of u0.
Snapshots1D solve_homogenized_1d(const HomogenizedModel1D& model, std::span<const double> u0,
                                 std::span<const double> t_grid);

struct HomogenizedModel2D {
    double a_xx = 1.0;
    double a_yy = 1.0;

    void validate() const;
    static HomogenizedModel2D reference() { return {1.2644, 1.3398}; }
};

// Exact per-mode decay on the periodic grid over [0, 2 pi)^2.
std::vector<Field2D> solve_homogenized_2d(const HomogenizedModel2D& model, const Field2D& u0,
                                          std::span<const double> t_grid);

// a_xx u_xx + a_yy u_yy evaluated spectrally.
Field2D homogenized_rhs_2d(const HomogenizedModel2D& model, const Field2D& u);

// ---------------------------------------------------------------------------
// Brute-force cross-check of 2D coefficients.

enum class Axis { x, y };

struct DecayFit {
    double rate = 0.0;               // least-squares rate over the window
    double rate_first_half = 0.0;
    double rate_second_half = 0.0;
    double max_fit_deviation = 0.0;  // max relative gap between data and fit
    double coefficient = 0.0;        // rate mapped back to a continuum coefficient
};

// Evolves sin(x) or sin(y) on the full lattice with RK4 at the stable dt and
// fits log amplitude of that mode over [t_begin, t_end].
DecayFit lattice_mode_decay(const micro::LatticeProblem2D& problem, Axis axis, double t_begin, double t_end,
                            std::size_t samples = 11);

}  // namespace patchnet::homog
