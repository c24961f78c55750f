#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "patchnet/equation_free.hpp"
#include "patchnet/errors.hpp"
#include "patchnet/stencil.hpp"

namespace patchnet::eqfree {

using micro::MicroState1D;

namespace {

// n such that length = n * dx, or ConfigError.
std::size_t cells(double length, double dx, const char* what) {
    const double r = length / dx;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-6 * std::max(1.0, r))
        throw ConfigError(std::string(what) + " is not a whole number of micro cells");
    return static_cast<std::size_t>(n);
}

// Average of xi^m over [s - w/2, s + w/2]; the point value when w == 0.
double box_moment(double s, double w, unsigned m) {
    if (w == 0.0) return std::pow(s, m);
    const double hi = s + 0.5 * w, lo = s - 0.5 * w;
    return (std::pow(hi, m + 1) - std::pow(lo, m + 1)) / (static_cast<double>(m + 1) * w);
}

void check_field(const MacroField1D& field, const ToothGrid1D& grid) {
    if (field.u.size() != grid.nodes()) throw InputError("macro field does not match the tooth grid");
    for (double v : field.u)
        if (!std::isfinite(v)) throw InputError("macro field contains non-finite values");
}

}  // namespace

double Polynomial::operator()(double x) const { return derivative(x, 0); }

double Polynomial::derivative(double x, unsigned order) const {
    // Horner on the differentiated coefficients m!/(m-order)! * c_m.
    const double s = x - center;
    double sum = 0.0;
    for (std::size_t m = coeffs.size(); m-- > order;) {
        double f = 1.0;
        for (std::size_t q = m - order + 1; q <= m; ++q) f *= static_cast<double>(q);
        sum = sum * s + f * coeffs[m];
    }
    return sum;
}

double ToothGrid1D::spacing() const { return (x_hi - x_lo) / static_cast<double>(teeth + 1); }

double ToothGrid1D::center(std::size_t node) const {
    if (node + 1 == nodes()) return x_hi;
    return x_lo + static_cast<double>(node) * spacing();
}

double ToothGrid1D::width(std::size_t node) const { return is_boundary(node) ? 0.0 : h; }

std::vector<double> ToothGrid1D::centers() const {
    std::vector<double> c(nodes());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = center(i);
    return c;
}

void ToothGrid1D::validate() const {
    if (!(x_hi > x_lo)) throw ConfigError("tooth grid: empty domain");
    if (teeth == 0) throw ConfigError("tooth grid: need at least one tooth");
    if (!(h > 0.0) || !(buffer >= h) || !(buffer < spacing()))
        throw ConfigError("tooth grid: need 0 < h <= H < tooth spacing");
    if (coupling_degree < 2 || coupling_degree % 2 != 0)
        throw ConfigError("tooth grid: coupling degree must be even and at least 2");
    if (lifting_degree < coupling_degree) throw ConfigError("tooth grid: lifting degree must be >= coupling degree");
    if (nodes() < lifting_degree + 1) throw ConfigError("tooth grid: not enough macro nodes for the lifting stencil");
    if (!std::isfinite(u_lo) || !std::isfinite(u_hi)) throw ConfigError("tooth grid: boundary data must be finite");
}

void PatchConfig1D::validate(const micro::DetailedProblem1D& problem) const {
    grid.validate();
    problem.validate();
    if (!(dx > 0.0) || dx > problem.epsilon / 20.0 * (1.0 + 1e-9))
        throw ConfigError("patch config: micro spacing must resolve epsilon (dx <= eps/20)");
    if (!(dt_micro > 0.0) || n_burst == 0) throw ConfigError("patch config: need dt_micro > 0 and n_burst >= 1");
    if (!(dt_macro >= static_cast<double>(n_burst) * dt_micro * (1.0 - 1e-12)))
        throw ConfigError("patch config: macro step shorter than a burst");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("patch config: theta must lie in [0, 1]");
    cells(grid.h, dx, "tooth width");
    cells(grid.buffer, dx, "buffer width");
    if (grid.buffer > grid.h) cells(0.5 * (grid.buffer - grid.h), dx, "buffer margin");
    if (grid.center(1) - 0.5 * grid.buffer < grid.x_lo - 1e-12 ||
        grid.center(grid.teeth) + 0.5 * grid.buffer > grid.x_hi + 1e-12)
        throw ConfigError("patch config: buffers extend outside the domain");
    if (grid.x_lo < problem.x_lo || grid.x_hi > problem.x_hi)
        throw ConfigError("patch config: tooth grid extends outside the problem domain");
}

double interval_average(const MicroState1D& state, double a, double b) {
    const double tol = 1e-9 * state.dx;
    if (!(b > a)) throw GeometryError("interval_average: empty interval");
    if (a < state.x0 - tol || b > state.x_end() + tol) throw GeometryError("tooth is not covered by its micro state");
    const std::size_t n = state.size();
    auto value = [&](double x) {
        const double pos = std::clamp((x - state.x0) / state.dx, 0.0, static_cast<double>(n - 1));
        std::size_t j = std::min(static_cast<std::size_t>(pos), n - 2);
        const double w = pos - static_cast<double>(j);
        return (1.0 - w) * state.u[j] + w * state.u[j + 1];
    };
    const double pa = std::clamp((a - state.x0) / state.dx, 0.0, static_cast<double>(n - 1));
    const double pb = std::clamp((b - state.x0) / state.dx, 0.0, static_cast<double>(n - 1));
    // Snap to nodes that the ends are meant to coincide with.
    const double ra = std::round(pa), rb = std::round(pb);
    const double qa = std::abs(pa - ra) < 1e-9 ? ra : pa;
    const double qb = std::abs(pb - rb) < 1e-9 ? rb : pb;

    long double sum = 0.0L;
    const std::size_t first = static_cast<std::size_t>(std::floor(qa));
    for (std::size_t j = first; j + 1 < n && static_cast<double>(j) < qb; ++j) {
        const double l = std::max(qa, static_cast<double>(j));
        const double r = std::min(qb, static_cast<double>(j + 1));
        if (r <= l) continue;
        const double xl = state.x0 + l * state.dx, xr = state.x0 + r * state.dx;
        const double ul = (l == static_cast<double>(j)) ? state.u[j] : value(xl);
        const double ur = (r == static_cast<double>(j + 1)) ? state.u[j + 1] : value(xr);
        sum += 0.5L * (static_cast<long double>(ul) + ur) * (r - l);
    }
    return static_cast<double>(sum / (qb - qa));
}

MacroField1D restrict_teeth(std::span<const MicroState1D> teeth, const ToothGrid1D& grid, double t) {
    grid.validate();
    if (teeth.size() != grid.teeth) throw GeometryError("restrict: one micro state per tooth required");
    MacroField1D field;
    field.t = t;
    field.u.resize(grid.nodes());
    field.u.front() = grid.u_lo;
    field.u.back() = grid.u_hi;
    for (std::size_t i = 1; i <= grid.teeth; ++i) {
        const double c = grid.center(i);
        field.u[i] = interval_average(teeth[i - 1], c - 0.5 * grid.h, c + 0.5 * grid.h);
    }
    return field;
}

Polynomial coupling_polynomial(const MacroField1D& field, std::size_t node, const ToothGrid1D& grid) {
    grid.validate();
    check_field(field, grid);
    if (grid.is_boundary(node) || node >= grid.nodes()) throw InputError("coupling_polynomial: not an interior tooth");
    const unsigned k = grid.coupling_degree;
    const std::size_t width = k + 1;
    if (grid.nodes() < width) throw ConfigError("coupling_polynomial: fewer than k+1 macro nodes");
    const std::size_t start = stencil::window_start(node, width, grid.nodes());

    // Work in units of the tooth spacing for conditioning.
    const double D = grid.spacing();
    const double xi = grid.center(node);
    Eigen::MatrixXd A(width, width);
    Eigen::VectorXd b(width);
    for (std::size_t r = 0; r < width; ++r) {
        const std::size_t j = start + r;
        const double s = (grid.center(j) - xi) / D, w = grid.width(j) / D;
        for (unsigned m = 0; m <= k; ++m) A(static_cast<Eigen::Index>(r), m) = box_moment(s, w, m);
        b(static_cast<Eigen::Index>(r)) = field.u[j];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw NumericalError("coupling_polynomial: singular box-average system");
    const Eigen::VectorXd c = lu.solve(b);

    Polynomial p{xi, std::vector<double>(width)};
    for (unsigned m = 0; m <= k; ++m) p.coeffs[m] = c(m) / std::pow(D, m);
    return p;
}

std::pair<double, double> tooth_edge_slopes(const Polynomial& p, const ToothGrid1D& grid, std::size_t node) {
    const double c = grid.center(node);
    return {p.derivative(c - 0.5 * grid.h), p.derivative(c + 0.5 * grid.h)};
}

MicroState1D lift(const MacroField1D& field, std::size_t node, const ToothGrid1D& grid, double dx) {
    grid.validate();
    check_field(field, grid);
    if (grid.is_boundary(node) || node >= grid.nodes()) throw InputError("lift: not an interior tooth");
    const unsigned d = grid.lifting_degree;
    if (d < 2) throw ConfigError("lift: degree must be at least 2");
    const std::size_t width = d + 1;
    if (grid.nodes() < width) throw ConfigError("lift: not enough macro nodes for the lifting stencil");
    const std::size_t start = stencil::window_start(node, width, grid.nodes());

    std::vector<double> xs(width);
    for (std::size_t r = 0; r < width; ++r) xs[r] = grid.center(start + r);
    const double xi = grid.center(node);
    const auto w = stencil::fornberg_weights(xi, xs, d);
    std::vector<double> D(d + 1, 0.0);
    for (unsigned k = 1; k <= d; ++k)
        for (std::size_t r = 0; r < width; ++r) D[k] += w[k][r] * field.u[start + r];
    D[0] = field.u[node];

    const std::size_t n = cells(grid.buffer, dx, "buffer width");
    MicroState1D state{xi - 0.5 * grid.buffer, dx, std::vector<double>(n + 1), field.t};
    for (std::size_t j = 0; j <= n; ++j) {
        const double s = state.x(j) - xi;
        // Horner on the Taylor coefficients D_k / k!
        double v = 0.0;
        for (unsigned k = d + 1; k-- > 0;) {
            double fact = 1.0;
            for (unsigned q = 2; q <= k; ++q) fact *= q;
            v = v * s + D[k] / fact;
        }
        state.u[j] = v;
    }
    return state;
}

std::vector<MicroState1D> sample_teeth(const std::function<double(double)>& u0, const ToothGrid1D& grid, double dx,
                                       bool buffered) {
    grid.validate();
    const double width = buffered ? grid.buffer : grid.h;
    const std::size_t n = cells(width, dx, buffered ? "buffer width" : "tooth width");
    std::vector<MicroState1D> out;
    out.reserve(grid.teeth);
    for (std::size_t i = 1; i <= grid.teeth; ++i) {
        MicroState1D s{grid.center(i) - 0.5 * width, dx, std::vector<double>(n + 1), 0.0};
        for (std::size_t j = 0; j <= n; ++j) s.u[j] = u0(s.x(j));
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

GapTooth1D::GapTooth1D(const ToothGrid1D& grid, const micro::DetailedProblem1D& problem, double dx, double theta)
    : grid_(grid), problem_(problem), dx_(dx), theta_(theta) {
    grid_.validate();
    problem_.validate();
    const std::size_t n = cells(grid_.h, dx_, "tooth width");
    const std::size_t window = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(problem_.epsilon / dx_)), 1, n);
    for (std::size_t i = 1; i <= grid_.teeth; ++i) {
        MicroState1D g{grid_.center(i) - 0.5 * grid_.h, dx_, std::vector<double>(n + 1, 0.0), 0.0};
        auto a = micro::sample_diffusivity(problem_, g);
        // Harmonic mean over one micro period inside each edge.
        double inv_l = 0.0, inv_r = 0.0;
        for (std::size_t j = 0; j < window; ++j) {
            inv_l += 1.0 / a[j];
            inv_r += 1.0 / a[n - 1 - j];
        }
        edge_a_.emplace_back(static_cast<double>(window) / inv_l, static_cast<double>(window) / inv_r);
        a_half_.push_back(std::move(a));
    }
}

MacroField1D GapTooth1D::restrict(std::span<const MicroState1D> teeth, double t) const {
    return restrict_teeth(teeth, grid_, t);
}

std::vector<MicroState1D> GapTooth1D::step(std::span<const MicroState1D> teeth, double dt) const {
    const MacroField1D U = restrict(teeth, teeth.empty() ? 0.0 : teeth[0].t);
    std::vector<MicroState1D> next;
    next.reserve(teeth.size());
    for (std::size_t i = 1; i <= grid_.teeth; ++i) {
        const auto [sl, sr] = tooth_edge_slopes(coupling_polynomial(U, i, grid_), grid_, i);
        const micro::BoundaryPair bc{micro::BoundaryCondition::neumann(edge_a_[i - 1].first * sl),
                                     micro::BoundaryCondition::neumann(edge_a_[i - 1].second * sr)};
        next.push_back(micro::step_micro_1d(teeth[i - 1], a_half_[i - 1], bc, dt, theta_));
    }
    return next;
}

std::vector<MicroState1D> gap_tooth_step_1d(std::span<const MicroState1D> teeth, const ToothGrid1D& grid,
                                            const micro::DetailedProblem1D& problem, double dt, double theta) {
    if (teeth.empty()) throw GeometryError("gap_tooth_step_1d: no teeth");
    return GapTooth1D(grid, problem, teeth[0].dx, theta).step(teeth, dt);
}

// ---------------------------------------------------------------------------

PatchDynamics1D::PatchDynamics1D(const PatchConfig1D& config, const micro::DetailedProblem1D& problem)
    : config_(config), problem_(problem) {
    config_.validate(problem_);
    const auto& g = config_.grid;
    const std::size_t n = cells(g.buffer, config_.dx, "buffer width");
    for (std::size_t i = 1; i <= g.teeth; ++i) {
        MicroState1D geom{g.center(i) - 0.5 * g.buffer, config_.dx, std::vector<double>(n + 1, 0.0), 0.0};
        a_half_.push_back(micro::sample_diffusivity(problem_, geom));
    }
}

std::vector<double> PatchDynamics1D::estimate(const MacroField1D& field) const {
    const auto& g = config_.grid;
    check_field(field, g);
    std::vector<double> dudt(g.nodes(), 0.0);
    for (std::size_t i = 1; i <= g.teeth; ++i) {
        // Bursts evolve the deviation from U_i; constants are steady, so this
        // only removes roundoff proportional to |U|.
        MicroState1D s = lift(field, i, g, config_.dx);
        for (double& v : s.u) v -= field.u[i];
        const micro::BoundaryPair bc{micro::BoundaryCondition::dirichlet(s.u.front()),
                                     micro::BoundaryCondition::dirichlet(s.u.back())};
        const double c = g.center(i), lo = c - 0.5 * g.h, hi = c + 0.5 * g.h;
        try {
            for (std::size_t k = 0; k < config_.n_heal; ++k)
                s = micro::step_micro_1d(s, a_half_[i - 1], bc, config_.dt_micro, config_.theta);
            const double before = interval_average(s, lo, hi);
            for (std::size_t k = 0; k < config_.n_burst; ++k)
                s = micro::step_micro_1d(s, a_half_[i - 1], bc, config_.dt_micro, config_.theta);
            const double after = interval_average(s, lo, hi);
            dudt[i] = (after - before) / (static_cast<double>(config_.n_burst) * config_.dt_micro);
        } catch (const Error& e) {
            throw NumericalError("estimate_dUdt: tooth " + std::to_string(i) + ": " + e.what());
        }
        if (!std::isfinite(dudt[i])) throw NumericalError("estimate_dUdt: non-finite estimate in tooth " + std::to_string(i));
    }
    return dudt;
}

MacroField1D PatchDynamics1D::advance(const MacroField1D& field) const {
    const auto k1 = estimate(field);
    MacroField1D next = projective_step(field, k1, config_.dt_macro);
    if (config_.scheme == ProjectiveScheme::rk2) {
        const auto k2 = estimate(next);
        for (std::size_t i = 0; i < next.u.size(); ++i)
            next.u[i] = field.u[i] + 0.5 * config_.dt_macro * (k1[i] + k2[i]);
    }
    return next;
}

std::vector<double> estimate_dUdt(const MacroField1D& field, const PatchConfig1D& config,
                                  const micro::DetailedProblem1D& problem) {
    return PatchDynamics1D(config, problem).estimate(field);
}

MacroField1D projective_step(const MacroField1D& field, std::span<const double> dudt, double dt) {
    if (!(dt > 0.0)) throw InputError("projective_step: dt must be positive");
    if (dudt.size() != field.u.size()) throw InputError("projective_step: size mismatch");
    MacroField1D next{field.u, field.t + dt};
    for (std::size_t i = 0; i < next.u.size(); ++i) next.u[i] += dt * dudt[i];
    return next;
}

data::Geometry geometry_1d(const ToothGrid1D& grid) {
    data::Geometry g;
    g.dim = 1;
    g.nx = grid.nodes();
    g.ny = 1;
    g.x = grid.centers();
    g.periodic = false;
    g.dirichlet_ends = true;
    return g;
}

namespace {

std::size_t ratio(double a, double b, const char* what) {
    const double r = a / b, n = std::round(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, r)) throw ConfigError(std::string(what) + " must be a whole multiple");
    return static_cast<std::size_t>(n);
}

void guard(const std::vector<double>& u, std::size_t step, double t) {
    for (double v : u)
        if (!(std::abs(v) <= 1e6))
            throw NumericalError("macro field blew up at step " + std::to_string(step) + " (t = " + std::to_string(t) + ")");
}

}  // namespace

data::SnapshotDataset simulate_patch_dynamics_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                                 const MacroField1D& u0, double T, double sample_interval) {
    PatchConfig1D cfg = config;
    cfg.grid.u_lo = u0.u.front();
    cfg.grid.u_hi = u0.u.back();
    const PatchDynamics1D pd(cfg, problem);
    check_field(u0, cfg.grid);
    if (T < 0.0 || !(sample_interval > 0.0)) throw ConfigError("simulate: need T >= 0 and a positive sampling interval");
    const std::size_t steps = T == 0.0 ? 0 : ratio(T, cfg.dt_macro, "horizon / macro step");
    const std::size_t stride = ratio(sample_interval, cfg.dt_macro, "sampling interval / macro step");
    if (steps % stride != 0) throw ConfigError("simulate: sampling interval must divide the horizon");

    data::SnapshotDataset ds;
    ds.geometry = geometry_1d(cfg.grid);
    ds.provenance.scheme = "patch-dynamics";
    ds.trajectories.emplace_back();
    auto& records = ds.trajectories.back().records;

    MacroField1D U = u0;
    U.t = 0.0;
    for (std::size_t n = 0;; ++n) {
        const double t = static_cast<double>(n) * cfg.dt_macro;
        U.t = t;
        const auto k1 = pd.estimate(U);
        if (n % stride == 0) records.push_back({t, U.u, k1});
        if (n == steps) break;
        MacroField1D next = projective_step(U, k1, cfg.dt_macro);
        if (cfg.scheme == ProjectiveScheme::rk2) {
            const auto k2 = pd.estimate(next);
            for (std::size_t i = 0; i < next.u.size(); ++i) next.u[i] = U.u[i] + 0.5 * cfg.dt_macro * (k1[i] + k2[i]);
        }
        U = std::move(next);
        guard(U.u, n + 1, t + cfg.dt_macro);
    }
    return ds;
}

data::SnapshotDataset simulate_patch_dynamics_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                                 const std::function<double(double)>& u0, double T,
                                                 double sample_interval) {
    ToothGrid1D grid = config.grid;
    grid.u_lo = u0(grid.x_lo);
    grid.u_hi = u0(grid.x_hi);
    const auto teeth = sample_teeth(u0, grid, config.dx, false);
    return simulate_patch_dynamics_1d(config, problem, restrict_teeth(teeth, grid), T, sample_interval);
}

data::SnapshotDataset simulate_gap_tooth_1d(const PatchConfig1D& config, const micro::DetailedProblem1D& problem,
                                            const std::function<double(double)>& u0, double T,
                                            double sample_interval) {
    PatchConfig1D cfg = config;
    cfg.grid.u_lo = u0(cfg.grid.x_lo);
    cfg.grid.u_hi = u0(cfg.grid.x_hi);
    cfg.validate(problem);
    const GapTooth1D gt(cfg.grid, problem, cfg.dx, cfg.theta);
    if (T < 0.0 || !(sample_interval > 0.0)) throw ConfigError("simulate: need T >= 0 and a positive sampling interval");
    const double dt = cfg.dt_micro;
    const std::size_t steps = T == 0.0 ? 0 : ratio(T, dt, "horizon / micro step");
    const std::size_t stride = ratio(sample_interval, dt, "sampling interval / micro step");
    if (steps % stride != 0) throw ConfigError("simulate: sampling interval must divide the horizon");

    data::SnapshotDataset ds;
    ds.geometry = geometry_1d(cfg.grid);
    ds.provenance.scheme = "gap-tooth";
    ds.trajectories.emplace_back();
    auto& records = ds.trajectories.back().records;

    auto teeth = sample_teeth(u0, cfg.grid, cfg.dx, false);
    for (std::size_t n = 0;; ++n) {
        const double t = static_cast<double>(n) * dt;
        auto next = gt.step(teeth, dt);
        if (n % stride == 0) {
            const MacroField1D U = gt.restrict(teeth, t), V = gt.restrict(next, t + dt);
            std::vector<double> d(U.u.size(), 0.0);
            for (std::size_t i = 1; i + 1 < d.size(); ++i) d[i] = (V.u[i] - U.u[i]) / dt;
            guard(U.u, n, t);
            records.push_back({t, U.u, std::move(d)});
        }
        if (n == steps) break;
        teeth = std::move(next);
    }
    return ds;
}

}  // namespace patchnet::eqfree
