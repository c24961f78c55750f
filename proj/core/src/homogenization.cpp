#include "patchnet/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "patchnet/errors.hpp"
#include "patchnet/fft.hpp"
#include "patchnet/ode.hpp"
#include "tridiagonal.hpp"

namespace patchnet::homog {

namespace {

void check_positive(std::span<const double> a) {
    for (double v : a)
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("diffusivity samples must be positive and finite");
}

// Coefficient on the interval (y_j, y_{j+1}), periodic.
double half(std::span<const double> a, std::size_t j) { return 0.5 * (a[j] + a[(j + 1) % a.size()]); }

// Discrete cell equation residual at node j, in long double.
long double residual_at(const std::vector<double>& chi, std::span<const double> a, std::size_t j) {
    const std::size_t n = a.size();
    const long double h = 1.0L / static_cast<long double>(n);
    const std::size_t jm = (j + n - 1) % n, jp = (j + 1) % n;
    const long double ap = half(a, j), am = half(a, jm);
    const long double lhs = (ap * (static_cast<long double>(chi[jp]) - chi[j]) -
                             am * (static_cast<long double>(chi[j]) - chi[jm])) /
                            (h * h);
    return lhs - (ap - am) / h;
}

}  // namespace

double harmonic_mean(std::span<const double> a) {
    if (a.empty()) throw InputError("harmonic_mean: empty input");
    double s = 0.0;
    for (double v : a) s += 1.0 / v;
    return static_cast<double>(a.size()) / s;
}

double arithmetic_mean(std::span<const double> a) {
    if (a.empty()) throw InputError("arithmetic_mean: empty input");
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

CellSolution solve_cell_problem(std::span<const double> a) {
    const std::size_t n = a.size();
    if (n < 16) throw InputError("solve_cell_problem: need at least 16 cell samples");
    check_positive(a);
    const double h = 1.0 / static_cast<double>(n);

    // Pin chi_0 = 0 and drop the (redundant) equation at node 0; the rest is
    // tridiagonal in chi_1 .. chi_{n-1}.
    const std::size_t m = n - 1;
    std::vector<double> sub(m), diag(m), sup(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t j = k + 1;
        const double ap = half(a, j), am = half(a, j - 1);
        sub[k] = -am;
        sup[k] = -ap;
        diag[k] = am + ap;
        rhs[k] = -h * (ap - am);
    }
    std::vector<double> x = rhs;
    detail::solve_tridiagonal(sub, diag, sup, x);

    CellSolution cell;
    cell.chi.assign(n, 0.0);
    for (std::size_t k = 0; k < m; ++k) cell.chi[k + 1] = x[k];

    // One sweep of refinement with an extended-precision residual.
    std::vector<double> r(m);
    for (std::size_t k = 0; k < m; ++k) r[k] = static_cast<double>(residual_at(cell.chi, a, k + 1) * h * h);
    detail::solve_tridiagonal(sub, diag, sup, r);
    for (std::size_t k = 0; k < m; ++k) cell.chi[k + 1] += r[k];

    long double mean = 0.0L;
    for (double c : cell.chi) mean += c;
    mean /= static_cast<long double>(n);
    for (double& c : cell.chi) c = static_cast<double>(c - mean);
    return cell;
}

double effective_diffusivity(CellSolution& cell, std::span<const double> a) {
    const std::size_t n = a.size();
    if (cell.chi.size() != n) throw InputError("effective_diffusivity: cell and diffusivity grids differ");
    check_positive(a);
    const double h = 1.0 / static_cast<double>(n);
    long double sum = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
        const double slope = (cell.chi[(j + 1) % n] - cell.chi[j]) / h;
        sum += half(a, j) * (1.0 - slope);
    }
    cell.a_star = static_cast<double>(sum / static_cast<long double>(n));
    return cell.a_star;
}

double cell_residual(const CellSolution& cell, std::span<const double> a) {
    if (cell.chi.size() != a.size()) throw InputError("cell_residual: grid mismatch");
    long double worst = 0.0L;
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(residual_at(cell.chi, a, j)));
    return static_cast<double>(worst);
}

double effective_coefficient(const micro::Diffusivity& a, std::size_t n) {
    const std::vector<double> s = a.samples(n);
    CellSolution cell = solve_cell_problem(s);
    return effective_diffusivity(cell, s);
}

// ---------------------------------------------------------------------------

std::size_t HomogenizedModel1D::nodes() const {
    return static_cast<std::size_t>(std::llround((x_hi - x_lo) / dx)) + 1;
}

void HomogenizedModel1D::validate() const {
    if (!(a_star > 0.0)) throw ConfigError("homogenized coefficient must be positive");
    if (!(x_hi > x_lo) || !(dx > 0.0)) throw ConfigError("invalid homogenized grid");
    const double cells = (x_hi - x_lo) / dx;
    if (std::abs(cells - std::round(cells)) > 1e-8 * cells || cells < 2.0)
        throw ConfigError("homogenized grid spacing must divide the domain");
}

double Snapshots1D::at(std::size_t k, double xq) const {
    const auto& v = u.at(k);
    if (xq <= x.front()) return v.front();
    if (xq >= x.back()) return v.back();
    const double dx = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
    const double pos = (xq - x.front()) / dx;
    std::size_t j = static_cast<std::size_t>(pos);
    if (j + 1 >= x.size()) j = x.size() - 2;
    const double w = pos - static_cast<double>(j);
    if (w < 1e-9) return v[j];
    if (w > 1.0 - 1e-9) return v[j + 1];
    return (1.0 - w) * v[j] + w * v[j + 1];
}

Snapshots1D solve_homogenized_1d(const HomogenizedModel1D& model, std::span<const double> u0,
                                 std::span<const double> t_grid) {
    model.validate();
    const std::size_t n = model.nodes();
    if (u0.size() != n) throw InputError("solve_homogenized_1d: u0 does not match the reference grid");
    for (double v : u0)
        if (!std::isfinite(v)) throw InputError("solve_homogenized_1d: non-finite initial data");

    const double c = model.a_star / (model.dx * model.dx);
    const ode::Rhs rhs = [n, c](const ode::State& u, ode::State& du) {
        du[0] = 0.0;
        du[n - 1] = 0.0;
        for (std::size_t j = 1; j + 1 < n; ++j) du[j] = c * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
    };
    const double max_dt = 0.4 * model.dx * model.dx / (2.0 * model.a_star);

    Snapshots1D out;
    out.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.x[j] = model.x(j);
    out.t.assign(t_grid.begin(), t_grid.end());
    out.u = ode::rk4(rhs, ode::State(u0.begin(), u0.end()), t_grid, max_dt);
    return out;
}

void HomogenizedModel2D::validate() const {
    if (!(a_xx > 0.0) || !(a_yy > 0.0)) throw ConfigError("homogenized coefficients must be positive");
}

std::vector<Field2D> solve_homogenized_2d(const HomogenizedModel2D& model, const Field2D& u0,
                                          std::span<const double> t_grid) {
    model.validate();
    if (u0.nx < 2 || u0.ny < 2) throw ConfigError("solve_homogenized_2d: needs a periodic grid of at least 2x2");
    Fft2D fft(u0.nx, u0.ny);
    const auto spectrum = fft.forward(u0);
    std::vector<Field2D> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        auto s = spectrum;
        for (std::size_t i = 0; i < u0.nx; ++i) {
            const double kx = static_cast<double>(Fft2D::wavenumber(i, u0.nx));
            for (std::size_t j = 0; j < u0.ny; ++j) {
                const double ky = static_cast<double>(Fft2D::wavenumber(j, u0.ny));
                s[i * u0.ny + j] *= std::exp(-(model.a_xx * kx * kx + model.a_yy * ky * ky) * (t - t_grid[0]));
            }
        }
        out.push_back(fft.inverse_real(s));
    }
    return out;
}

Field2D homogenized_rhs_2d(const HomogenizedModel2D& model, const Field2D& u) {
    model.validate();
    Fft2D fft(u.nx, u.ny);
    auto s = fft.forward(u);
    for (std::size_t i = 0; i < u.nx; ++i) {
        const double kx = static_cast<double>(Fft2D::wavenumber(i, u.nx));
        for (std::size_t j = 0; j < u.ny; ++j) {
            const double ky = static_cast<double>(Fft2D::wavenumber(j, u.ny));
            s[i * u.ny + j] *= -(model.a_xx * kx * kx + model.a_yy * ky * ky);
        }
    }
    return fft.inverse_real(s);
}

// ---------------------------------------------------------------------------

DecayFit lattice_mode_decay(const micro::LatticeProblem2D& problem, Axis axis, double t_begin, double t_end,
                            std::size_t samples) {
    problem.validate();
    if (!(t_end > t_begin) || t_begin < 0.0 || samples < 4)
        throw InputError("lattice_mode_decay: need 0 <= t_begin < t_end and at least 4 samples");
    const std::size_t n = problem.nx;
    const double h = problem.h();

    Field2D u(n, n), mode(n, n);
    for (std::size_t ix = 0; ix < n; ++ix)
        for (std::size_t iy = 0; iy < n; ++iy)
            mode(ix, iy) = std::sin(static_cast<double>(axis == Axis::x ? ix : iy) * h);
    u = mode;
    const double norm2 = std::inner_product(mode.data.begin(), mode.data.end(), mode.data.begin(), 0.0);
    auto amplitude = [&](const Field2D& v) {
        return std::inner_product(v.data.begin(), v.data.end(), mode.data.begin(), 0.0) / norm2;
    };

    const micro::LatticeOperator op(problem);
    const ode::Rhs rhs = [&op, n](const ode::State& v, ode::State& dv) {
        Field2D in(n, n, std::vector<double>(v));
        Field2D out;
        op.apply(in, out);
        dv = std::move(out.data);
    };

    std::vector<double> times(samples + 1);
    times[0] = 0.0;
    for (std::size_t k = 0; k < samples; ++k)
        times[k + 1] = t_begin + (t_end - t_begin) * static_cast<double>(k) / static_cast<double>(samples - 1);
    std::vector<double> grid = times;
    if (t_begin == 0.0) grid.erase(grid.begin());
    const auto states = ode::rk4(rhs, u.data, grid, problem.stable_dt());
    const std::size_t first = states.size() - samples;

    std::vector<double> t(samples), logamp(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        t[k] = grid[first + k];
        const double amp = amplitude(Field2D(n, n, states[first + k]));
        if (!(amp > 0.0)) throw NumericalError("lattice_mode_decay: mode amplitude vanished");
        logamp[k] = std::log(amp);
    }
    auto slope = [&](std::size_t b, std::size_t e) {
        const double m = static_cast<double>(e - b);
        double st = 0, sl = 0, stt = 0, stl = 0;
        for (std::size_t k = b; k < e; ++k) {
            st += t[k];
            sl += logamp[k];
            stt += t[k] * t[k];
            stl += t[k] * logamp[k];
        }
        const double s = (m * stl - st * sl) / (m * stt - st * st);
        return std::pair{s, (sl - s * st) / m};
    };
    const auto [s_all, c_all] = slope(0, samples);
    DecayFit fit;
    fit.rate = -s_all;
    fit.rate_first_half = -slope(0, samples / 2 + 1).first;
    fit.rate_second_half = -slope(samples / 2, samples).first;
    for (std::size_t k = 0; k < samples; ++k)
        fit.max_fit_deviation = std::max(fit.max_fit_deviation, std::abs(std::exp(logamp[k] - (c_all + s_all * t[k])) - 1.0));
    const double s = std::sin(0.5 * h);
    fit.coefficient = fit.rate * h * h / (4.0 * s * s);
    return fit;
}

}  // namespace patchnet::homog
