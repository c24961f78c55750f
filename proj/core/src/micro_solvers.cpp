#include "patchnet/micro_solvers.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "patchnet/errors.hpp"
#include "patchnet/ode.hpp"
#include "tridiagonal.hpp"

namespace patchnet::micro {

namespace {

double frac(double y) { return y - std::floor(y); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Diffusivity Diffusivity::constant(double value) {
    if (!(value > 0.0)) throw InputError("diffusivity must be positive");
    return Diffusivity(Kind::constant, {value});
}

Diffusivity Diffusivity::sinusoidal(double mean, double amplitude) {
    if (!(mean - std::abs(amplitude) > 0.0)) throw InputError("sinusoidal diffusivity must stay positive");
    return Diffusivity(Kind::sinusoidal, {mean, amplitude});
}

Diffusivity Diffusivity::table(std::vector<double> samples) {
    if (samples.size() < 2) throw InputError("diffusivity table needs at least 2 samples");
    for (double s : samples)
        if (!(s > 0.0) || !std::isfinite(s)) throw InputError("diffusivity samples must be positive");
    return Diffusivity(Kind::table, std::move(samples));
}

double Diffusivity::operator()(double y) const {
    switch (kind_) {
        case Kind::constant:
            return params_[0];
        case Kind::sinusoidal:
            return params_[0] + params_[1] * std::sin(2.0 * std::numbers::pi * frac(y));
        case Kind::table: {
            const std::size_t n = params_.size();
            const double pos = frac(y) * static_cast<double>(n);
            const std::size_t j = std::min(static_cast<std::size_t>(pos), n - 1);
            const double w = pos - static_cast<double>(j);
            return (1.0 - w) * params_[j] + w * params_[(j + 1) % n];
        }
    }
    return 0.0;
}

std::vector<double> Diffusivity::samples(std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = (*this)(static_cast<double>(j) / static_cast<double>(n));
    return out;
}

double Diffusivity::lower_bound() const {
    switch (kind_) {
        case Kind::constant: return params_[0];
        case Kind::sinusoidal: return params_[0] - std::abs(params_[1]);
        case Kind::table: return *std::min_element(params_.begin(), params_.end());
    }
    return 0.0;
}

double Diffusivity::upper_bound() const {
    switch (kind_) {
        case Kind::constant: return params_[0];
        case Kind::sinusoidal: return params_[0] + std::abs(params_[1]);
        case Kind::table: return *std::max_element(params_.begin(), params_.end());
    }
    return 0.0;
}

void DetailedProblem1D::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(x_hi > x_lo)) throw ConfigError("domain length must be positive");
    if (!(a.lower_bound() > 0.0)) throw ConfigError("diffusivity must be positive");
    if (!std::isfinite(bc.lo.value) || !std::isfinite(bc.hi.value))
        throw ConfigError("boundary values must be finite");
}

void MicroState1D::validate() const {
    if (!(dx > 0.0)) throw InputError("micro grid spacing must be positive");
    if (u.size() < 3) throw InputError("micro grid needs at least 3 nodes");
    if (!all_finite(u)) throw InputError("micro state contains non-finite values");
}

std::vector<double> sample_diffusivity(const DetailedProblem1D& problem, const MicroState1D& grid) {
    problem.validate();
    grid.validate();
    const double tol = 1e-9 * (problem.x_hi - problem.x_lo);
    if (grid.x0 < problem.x_lo - tol || grid.x_end() > problem.x_hi + tol)
        throw GeometryError("micro grid [" + std::to_string(grid.x0) + ", " + std::to_string(grid.x_end()) +
                            "] lies outside the problem domain");
    std::vector<double> a(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        a[i] = problem.a((grid.x0 + (static_cast<double>(i) + 0.5) * grid.dx) / problem.epsilon);
    return a;
}

namespace {

// L u + b for the flux form; Dirichlet rows are zero.
void apply_operator(const std::vector<double>& u, std::span<const double> a, const BoundaryPair& bc, double dx,
                    std::vector<double>& out) {
    const std::size_t m = u.size();
    const double inv = 1.0 / (dx * dx);
    for (std::size_t i = 1; i + 1 < m; ++i)
        out[i] = (a[i] * (u[i + 1] - u[i]) - a[i - 1] * (u[i] - u[i - 1])) * inv;
    out[0] = bc.lo.kind == BoundaryKind::dirichlet ? 0.0 : (a[0] * (u[1] - u[0]) / dx - bc.lo.value) * 2.0 / dx;
    out[m - 1] = bc.hi.kind == BoundaryKind::dirichlet
                     ? 0.0
                     : (bc.hi.value - a[m - 2] * (u[m - 1] - u[m - 2]) / dx) * 2.0 / dx;
}

}  // namespace

std::vector<double> micro_rhs_1d(const MicroState1D& state, std::span<const double> half_diffusivity,
                                 const BoundaryPair& bc) {
    state.validate();
    if (half_diffusivity.size() + 1 != state.size()) throw InputError("diffusivity/grid size mismatch");
    std::vector<double> out(state.size());
    apply_operator(state.u, half_diffusivity, bc, state.dx, out);
    return out;
}

MicroState1D step_micro_1d(const MicroState1D& state, std::span<const double> half_diffusivity,
                           const BoundaryPair& bc, double dt, double theta) {
    state.validate();
    if (!(dt > 0.0)) throw InputError("step_micro_1d: dt must be positive");
    if (!(theta >= 0.0 && theta <= 1.0)) throw InputError("step_micro_1d: theta must lie in [0, 1]");
    if (half_diffusivity.size() + 1 != state.size()) throw InputError("diffusivity/grid size mismatch");
    if (!all_finite(half_diffusivity) || !std::isfinite(bc.lo.value) || !std::isfinite(bc.hi.value))
        throw InputError("step_micro_1d: non-finite coefficients or boundary data");

    const std::size_t m = state.size();
    const double dx = state.dx;
    const double r = dt / (dx * dx);
    const auto& a = half_diffusivity;

    std::vector<double> lu(m);
    apply_operator(state.u, a, bc, dx, lu);

    std::vector<double> sub(m, 0.0), diag(m, 1.0), sup(m, 0.0), rhs(m);
    for (std::size_t i = 1; i + 1 < m; ++i) {
        sub[i] = -theta * r * a[i - 1];
        sup[i] = -theta * r * a[i];
        diag[i] = 1.0 + theta * r * (a[i - 1] + a[i]);
        rhs[i] = state.u[i] + (1.0 - theta) * dt * lu[i];
    }
    // Neumann ends use half control volumes; the flux is a constant source.
    if (bc.lo.kind == BoundaryKind::dirichlet) {
        rhs[0] = bc.lo.value;
    } else {
        diag[0] = 1.0 + theta * 2.0 * r * a[0];
        sup[0] = -theta * 2.0 * r * a[0];
        rhs[0] = state.u[0] + (1.0 - theta) * dt * lu[0] - theta * dt * 2.0 * bc.lo.value / dx;
    }
    if (bc.hi.kind == BoundaryKind::dirichlet) {
        rhs[m - 1] = bc.hi.value;
    } else {
        diag[m - 1] = 1.0 + theta * 2.0 * r * a[m - 2];
        sub[m - 1] = -theta * 2.0 * r * a[m - 2];
        rhs[m - 1] = state.u[m - 1] + (1.0 - theta) * dt * lu[m - 1] + theta * dt * 2.0 * bc.hi.value / dx;
    }
    detail::solve_tridiagonal(sub, diag, sup, rhs);

    MicroState1D next{state.x0, state.dx, std::move(rhs), state.t + dt};
    if (!all_finite(next.u)) throw NumericalError("step_micro_1d: non-finite result");
    return next;
}

double trapezoid_mass(const MicroState1D& state) {
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < state.size(); ++i) s += state.u[i];
    s += 0.5 * (state.u.front() + state.u.back());
    return s * state.dx;
}

std::vector<MicroState1D> solve_detailed_1d(const DetailedProblem1D& problem, const MicroState1D& u0,
                                            std::span<const double> t_grid, double max_dt, double theta) {
    problem.validate();
    if (t_grid.empty()) throw InputError("solve_detailed_1d: empty time grid");
    if (u0.dx > problem.epsilon / 20.0 * (1.0 + 1e-9))
        throw ConfigError("solve_detailed_1d: grid spacing " + std::to_string(u0.dx) +
                          " does not resolve epsilon (need dx <= eps/20)");
    const std::vector<double> a = sample_diffusivity(problem, u0);

    std::vector<MicroState1D> out;
    out.reserve(t_grid.size());
    MicroState1D state = u0;
    state.t = t_grid[0];
    out.push_back(state);
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        const double interval = t_grid[k] - t_grid[k - 1];
        if (!(interval > 0.0)) throw InputError("solve_detailed_1d: time grid must be increasing");
        const std::size_t n = ode::substeps(interval, max_dt);
        const double dt = interval / static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s) state = step_micro_1d(state, a, problem.bc, dt, theta);
        state.t = t_grid[k];
        out.push_back(state);
    }
    return out;
}

// ---------------------------------------------------------------------------

double LatticeProblem2D::h() const { return 2.0 * std::numbers::pi / static_cast<double>(nx); }

namespace {
std::size_t pmod(long i, std::size_t p) {
    const long r = i % static_cast<long>(p);
    return static_cast<std::size_t>(r < 0 ? r + static_cast<long>(p) : r);
}
}  // namespace

double LatticeProblem2D::kappa_x(long ix, long iy) const { return tile_x(pmod(ix, period), pmod(iy, period)); }
double LatticeProblem2D::kappa_y(long ix, long iy) const { return tile_y(pmod(ix, period), pmod(iy, period)); }

double LatticeProblem2D::kappa_max() const {
    return std::max(*std::max_element(tile_x.data.begin(), tile_x.data.end()),
                    *std::max_element(tile_y.data.begin(), tile_y.data.end()));
}

double LatticeProblem2D::stable_dt() const { return h() * h() / (4.0 * kappa_max()); }

void LatticeProblem2D::validate() const {
    if (nx == 0 || nx != ny) throw ConfigError("lattice must be square and non-empty");
    if (period == 0 || nx % period != 0) throw ConfigError("lattice size must be divisible by the kappa period");
    if (tile_x.nx != period || tile_x.ny != period || tile_y.nx != period || tile_y.ny != period)
        throw ConfigError("kappa tiles must be period x period");
    for (double k : tile_x.data)
        if (!(k > 0.0)) throw ConfigError("kappa entries must be positive");
    for (double k : tile_y.data)
        if (!(k > 0.0)) throw ConfigError("kappa entries must be positive");
}

LatticeProblem2D LatticeProblem2D::uniform(std::size_t n, double kappa) {
    LatticeProblem2D p{n, n, 1, Field2D(1, 1, kappa), Field2D(1, 1, kappa)};
    p.validate();
    return p;
}

LatticeProblem2D LatticeProblem2D::reference_medium(std::size_t n) {
    // The two published 3x3 arrays, first index along y. Bonds along x take
    // the `ky` array shifted by (+1, +2) cells, bonds along y take `kx`; this
    // is the reading whose homogenized coefficients match 1.2644 and 1.3398.
    static constexpr double kx[3][3] = {
        {1.0566, 0.6668, 1.1568}, {6.5894, 0.8683, 2.4174}, {0.9473, 1.1407, 1.6610}};
    static constexpr double ky[3][3] = {
        {3.6355, 0.4470, 2.3896}, {0.8628, 4.8558, 0.2833}, {4.5025, 1.5865, 0.5679}};
    LatticeProblem2D p{n, n, 3, Field2D(3, 3), Field2D(3, 3)};
    for (std::size_t ix = 0; ix < 3; ++ix) {
        for (std::size_t iy = 0; iy < 3; ++iy) {
            p.tile_x(ix, iy) = ky[(iy + 2) % 3][(ix + 1) % 3];
            p.tile_y(ix, iy) = kx[iy][ix];
        }
    }
    p.validate();
    return p;
}

LatticeOperator::LatticeOperator(const LatticeProblem2D& problem)
    : nx_(problem.nx), ny_(problem.ny), inv_h2_(1.0 / (problem.h() * problem.h())),
      kx_(problem.nx, problem.ny), ky_(problem.nx, problem.ny) {
    problem.validate();
    for (std::size_t ix = 0; ix < nx_; ++ix) {
        for (std::size_t iy = 0; iy < ny_; ++iy) {
            kx_(ix, iy) = problem.kappa_x(static_cast<long>(ix), static_cast<long>(iy));
            ky_(ix, iy) = problem.kappa_y(static_cast<long>(ix), static_cast<long>(iy));
        }
    }
}

void LatticeOperator::apply(const Field2D& u, Field2D& out) const {
    if (u.nx != nx_ || u.ny != ny_) throw InputError("lattice field shape mismatch");
    out.nx = nx_;
    out.ny = ny_;
    out.data.resize(u.size());
    const double* U = u.data.data();
    const double* KX = kx_.data.data();
    const double* KY = ky_.data.data();
    for (std::size_t ix = 0; ix < nx_; ++ix) {
        const std::size_t xm = (ix == 0 ? nx_ - 1 : ix - 1) * ny_;
        const std::size_t xp = (ix + 1 == nx_ ? 0 : ix + 1) * ny_;
        const std::size_t x0 = ix * ny_;
        for (std::size_t iy = 0; iy < ny_; ++iy) {
            const std::size_t ym = iy == 0 ? ny_ - 1 : iy - 1;
            const std::size_t yp = iy + 1 == ny_ ? 0 : iy + 1;
            const double c = U[x0 + iy];
            const double flux = KX[x0 + iy] * (U[xp + iy] - c) + KX[xm + iy] * (U[xm + iy] - c) +
                                KY[x0 + iy] * (U[x0 + yp] - c) + KY[x0 + ym] * (U[x0 + ym] - c);
            out.data[x0 + iy] = flux * inv_h2_;
        }
    }
}

Field2D lattice_rhs(const Field2D& u, const LatticeProblem2D& problem) {
    Field2D out;
    LatticeOperator(problem).apply(u, out);
    return out;
}

namespace {

Field2D step_backward_euler(const Field2D& u, const LatticeProblem2D& problem, double dt) {
    const std::size_t nx = problem.nx, ny = problem.ny, n = nx * ny;
    const double r = dt / (problem.h() * problem.h());
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(5 * n);
    auto idx = [&](long ix, long iy) {
        return static_cast<int>(pmod(ix, nx) * ny + pmod(iy, ny));
    };
    for (long ix = 0; ix < static_cast<long>(nx); ++ix) {
        for (long iy = 0; iy < static_cast<long>(ny); ++iy) {
            const double ke = problem.kappa_x(ix, iy), kw = problem.kappa_x(ix - 1, iy);
            const double kn = problem.kappa_y(ix, iy), ks = problem.kappa_y(ix, iy - 1);
            const int row = idx(ix, iy);
            entries.emplace_back(row, row, 1.0 + r * (ke + kw + kn + ks));
            entries.emplace_back(row, idx(ix + 1, iy), -r * ke);
            entries.emplace_back(row, idx(ix - 1, iy), -r * kw);
            entries.emplace_back(row, idx(ix, iy + 1), -r * kn);
            entries.emplace_back(row, idx(ix, iy - 1), -r * ks);
        }
    }
    Eigen::SparseMatrix<double> A(static_cast<int>(n), static_cast<int>(n));
    A.setFromTriplets(entries.begin(), entries.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.compute(A);
    const Eigen::Map<const Eigen::VectorXd> b(u.data.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd x = cg.solveWithGuess(b, b);
    if (cg.info() != Eigen::Success) throw NumericalError("backward Euler lattice solve did not converge");
    return Field2D(nx, ny, std::vector<double>(x.data(), x.data() + n));
}

}  // namespace

Field2D step_lattice_2d(const Field2D& u, const LatticeProblem2D& problem, double dt, TimeScheme scheme) {
    problem.validate();
    if (u.nx != problem.nx || u.ny != problem.ny) throw InputError("field does not match lattice dimensions");
    if (!(dt > 0.0)) throw InputError("step_lattice_2d: dt must be positive");
    if (scheme == TimeScheme::backward_euler) return step_backward_euler(u, problem, dt);
    if (dt > problem.stable_dt() * (1.0 + 1e-12))
        throw ConfigError("step_lattice_2d: dt " + std::to_string(dt) + " exceeds explicit stability bound " +
                          std::to_string(problem.stable_dt()));

    const LatticeOperator op(problem);
    Field2D k1, k2, k3, k4, tmp(u.nx, u.ny);
    op.apply(u, k1);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + 0.5 * dt * k1.data[i];
    op.apply(tmp, k2);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + 0.5 * dt * k2.data[i];
    op.apply(tmp, k3);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + dt * k3.data[i];
    op.apply(tmp, k4);
    Field2D next = u;
    for (std::size_t i = 0; i < u.size(); ++i)
        next.data[i] += dt / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
    return next;
}

Field2D step_lattice_patch(const Field2D& u, const LatticeProblem2D& problem, long ix0, long iy0, double dt) {
    problem.validate();
    if (u.nx != u.ny || u.nx < 3) throw InputError("patch block must be square with a ghost ring");
    if (!(dt > 0.0)) throw InputError("step_lattice_patch: dt must be positive");
    if (dt > problem.stable_dt() * (1.0 + 1e-12))
        throw ConfigError("step_lattice_patch: dt exceeds explicit stability bound");
    const std::size_t n = u.nx;
    const double inv_h2 = 1.0 / (problem.h() * problem.h());
    // Local (i, j) maps to global (ix0 + i - 1, iy0 + j - 1).
    auto rhs = [&](const Field2D& v, Field2D& out) {
        out = Field2D(n, n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const long gx = ix0 + static_cast<long>(i) - 1, gy = iy0 + static_cast<long>(j) - 1;
                const double c = v(i, j);
                out(i, j) = (problem.kappa_x(gx, gy) * (v(i + 1, j) - c) +
                             problem.kappa_x(gx - 1, gy) * (v(i - 1, j) - c) +
                             problem.kappa_y(gx, gy) * (v(i, j + 1) - c) +
                             problem.kappa_y(gx, gy - 1) * (v(i, j - 1) - c)) *
                            inv_h2;
            }
        }
    };
    Field2D k1, k2, k3, k4, tmp = u;
    rhs(u, k1);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + 0.5 * dt * k1.data[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + 0.5 * dt * k2.data[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < u.size(); ++i) tmp.data[i] = u.data[i] + dt * k3.data[i];
    rhs(tmp, k4);
    Field2D next = u;
    for (std::size_t i = 0; i < u.size(); ++i)
        next.data[i] += dt / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
    return next;
}

}  // namespace patchnet::micro
