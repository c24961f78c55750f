#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "patchnet/equation_free.hpp"
#include "patchnet/errors.hpp"
#include "patchnet/ode.hpp"

namespace patchnet::eqfree {

namespace {

// Quadratic through three neighbouring core averages at -D, 0, +D whose
// discrete core averages reproduce them; `mom2` is the core's mean squared
// offset. Returns weights for the neighbours (-1, 0, +1) at offset s.
std::array<double, 3> box_weights(double s, double D, double mom2) {
    const double d2 = D * D;
    return {s * (s - D) / (2.0 * d2) - mom2 / (2.0 * d2), -(s + D) * (s - D) / d2 + mom2 / d2,
            s * (s + D) / (2.0 * d2) - mom2 / (2.0 * d2)};
}

double core_moment(const PatchGrid2D& grid) {
    const double c = static_cast<double>((grid.core - 1) / 2);
    const double h = grid.lattice.h();
    return h * h * c * (c + 1.0) / 3.0;
}

}  // namespace

double PatchGrid2D::center(std::size_t I) const {
    return static_cast<double>(center_index(I)) * lattice.h();
}

double PatchGrid2D::micro_dt() const { return dt > 0.0 ? dt : lattice.stable_dt(); }

double PatchGrid2D::footprint() const {
    const double f = static_cast<double>(interior + 2) / static_cast<double>(spacing());
    return f * f;
}

void PatchGrid2D::validate() const {
    lattice.validate();
    if (patches < 3 || lattice.nx % patches != 0) throw ConfigError("patch grid: patches must divide the lattice (>= 3)");
    if (interior < 3 || interior % 2 == 0) throw ConfigError("patch grid: interior size must be odd and >= 3");
    if (core < 1 || core % 2 == 0 || core > interior) throw ConfigError("patch grid: core must be odd and fit the interior");
    if (interior + 2 >= spacing()) throw ConfigError("patch grid: patches overlap");
    if (phase >= spacing()) throw ConfigError("patch grid: phase must be below the patch spacing");
    if (!(footprint() < 0.1)) throw ConfigError("patch grid: patches cover 10% of the domain or more");
    if (coupling == Coupling2D::period_shift) {
        const std::size_t s = shift_distance();
        if (s < 1 || s > 2 * radius() + 1) throw ConfigError("patch grid: shift must stay inside the patch");
    }
    if (dt < 0.0) throw ConfigError("patch grid: negative dt");
    if (scheme == micro::TimeScheme::rk4 && dt > lattice.stable_dt() * (1.0 + 1e-12))
        throw ConfigError("patch grid: dt exceeds the explicit stability bound");
}

std::vector<std::pair<long, long>> ghost_offsets(const PatchGrid2D& grid) {
    const long r = static_cast<long>(grid.radius());
    std::vector<std::pair<long, long>> out;
    for (long b = -r; b <= r; ++b) out.emplace_back(-r - 1, b);
    for (long b = -r; b <= r; ++b) out.emplace_back(r + 1, b);
    for (long a = -r; a <= r; ++a) out.emplace_back(a, -r - 1);
    for (long a = -r; a <= r; ++a) out.emplace_back(a, r + 1);
    return out;
}

std::vector<double> patch_edge_values_2d(const Field2D& U, std::size_t I, std::size_t J, const PatchGrid2D& grid) {
    grid.validate();
    if (U.nx != grid.patches || U.ny != grid.patches) throw InputError("macro field does not match the patch grid");
    const double h = grid.lattice.h(), D = static_cast<double>(grid.spacing()) * h, mom2 = core_moment(grid);
    std::vector<double> out;
    for (const auto& [a, b] : ghost_offsets(grid)) {
        const auto wx = box_weights(static_cast<double>(a) * h, D, mom2);
        const auto wy = box_weights(static_cast<double>(b) * h, D, mom2);
        double v = 0.0;
        for (int al = -1; al <= 1; ++al)
            for (int be = -1; be <= 1; ++be)
                v += wx[al + 1] * wy[be + 1] * U.wrap(static_cast<long>(I) + al, static_cast<long>(J) + be);
        out.push_back(v);
    }
    return out;
}

GapTooth2D::GapTooth2D(PatchGrid2D grid, double dt)
    : grid_(std::move(grid)), P_(grid_.patches), m_(grid_.interior), r_(grid_.radius()), dt_(dt) {
    grid_.validate();
    if (!(dt_ > 0.0)) throw ConfigError("gap-tooth 2D: dt must be positive");
    if (grid_.scheme == micro::TimeScheme::rk4 && dt_ > grid_.lattice.stable_dt() * (1.0 + 1e-12))
        throw ConfigError("gap-tooth 2D: dt exceeds the explicit stability bound");

    const long r = static_cast<long>(r_), m = static_cast<long>(m_);
    const double h = grid_.lattice.h(), D = static_cast<double>(grid_.spacing()) * h, mom2 = core_moment(grid_);
    const long s = static_cast<long>(grid_.shift_distance());
    const bool shifted = grid_.coupling == Coupling2D::period_shift;
    auto local = [&](long a, long b) { return static_cast<std::size_t>((a + r) * m + (b + r)); };

    for (const auto& [a, b] : ghost_offsets(grid_)) {
        Ghost g{};
        long sa = a, sb = b;  // source point for period_shift
        if (a < -r) { g.dir = west; g.interior = local(-r, b); sa = a + s; }
        else if (a > r) { g.dir = east; g.interior = local(r, b); sa = a - s; }
        else if (b < -r) { g.dir = south; g.interior = local(a, -r); sb = b + s; }
        else { g.dir = north; g.interior = local(a, r); sb = b - s; }
        g.source = shifted ? static_cast<long>(local(sa, sb)) : -1;
        const auto wx = box_weights(static_cast<double>(a) * h, D, mom2);
        const auto wy = box_weights(static_cast<double>(b) * h, D, mom2);
        const auto sx = box_weights(static_cast<double>(sa) * h, D, mom2);
        const auto sy = box_weights(static_cast<double>(sb) * h, D, mom2);
        for (int al = 0; al < 3; ++al)
            for (int be = 0; be < 3; ++be)
                g.weights[al][be] = wx[al] * wy[be] - (shifted ? sx[al] * sy[be] : 0.0);
        ghosts_.push_back(g);
    }

    const double inv_h2 = 1.0 / (h * h);
    const auto& lat = grid_.lattice;
    std::map<std::pair<long, long>, std::size_t> phase_to_inverse;
    for (std::size_t I = 0; I < P_; ++I) {
        for (std::size_t J = 0; J < P_; ++J) {
            const long cx = grid_.center_index(I), cy = grid_.center_index(J);
            std::vector<double> bonds(4 * m_ * m_);
            for (long a = -r; a <= r; ++a) {
                for (long b = -r; b <= r; ++b) {
                    const long gx = cx + a, gy = cy + b;
                    double* k = &bonds[4 * local(a, b)];
                    k[east] = lat.kappa_x(gx, gy) * inv_h2;
                    k[west] = lat.kappa_x(gx - 1, gy) * inv_h2;
                    k[north] = lat.kappa_y(gx, gy) * inv_h2;
                    k[south] = lat.kappa_y(gx, gy - 1) * inv_h2;
                }
            }
            if (grid_.scheme == micro::TimeScheme::backward_euler) {
                const std::size_t p = lat.period;
                const std::pair<long, long> key{cx % static_cast<long>(p), cy % static_cast<long>(p)};
                auto it = phase_to_inverse.find(key);
                if (it == phase_to_inverse.end()) {
                    // M = I - dt (L + coupling of ghosts to their interior sources).
                    const auto n = static_cast<Eigen::Index>(m_ * m_);
                    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
                    for (long a = -r; a <= r; ++a) {
                        for (long b = -r; b <= r; ++b) {
                            const auto i = static_cast<Eigen::Index>(local(a, b));
                            const double* k = &bonds[4 * local(a, b)];
                            M(i, i) += dt_ * (k[east] + k[west] + k[north] + k[south]);
                            if (a < r) M(i, static_cast<Eigen::Index>(local(a + 1, b))) -= dt_ * k[east];
                            if (a > -r) M(i, static_cast<Eigen::Index>(local(a - 1, b))) -= dt_ * k[west];
                            if (b < r) M(i, static_cast<Eigen::Index>(local(a, b + 1))) -= dt_ * k[north];
                            if (b > -r) M(i, static_cast<Eigen::Index>(local(a, b - 1))) -= dt_ * k[south];
                        }
                    }
                    for (const Ghost& g : ghosts_)
                        if (g.source >= 0)
                            M(static_cast<Eigen::Index>(g.interior), g.source) -= dt_ * bonds[4 * g.interior + g.dir];
                    const Eigen::MatrixXd inv = M.partialPivLu().inverse();
                    std::vector<double> flat(static_cast<std::size_t>(n * n));
                    for (Eigen::Index i = 0; i < n; ++i)
                        for (Eigen::Index j = 0; j < n; ++j) flat[static_cast<std::size_t>(i * n + j)] = inv(i, j);
                    it = phase_to_inverse.emplace(key, implicit_inverse_.size()).first;
                    implicit_inverse_.push_back(std::move(flat));
                }
                inverse_of_.push_back(it->second);
            }
            bonds_.push_back(std::move(bonds));
        }
    }
}

std::vector<double> GapTooth2D::initial_state(const std::function<double(double, double)>& u0) const {
    const long r = static_cast<long>(r_);
    const long n = static_cast<long>(grid_.lattice.nx);
    const double h = grid_.lattice.h();
    auto wrap = [n](long i) { return ((i % n) + n) % n; };
    std::vector<double> state(P_ * P_ * m_ * m_);
    std::size_t k = 0;
    for (std::size_t I = 0; I < P_; ++I)
        for (std::size_t J = 0; J < P_; ++J)
            for (long a = -r; a <= r; ++a)
                for (long b = -r; b <= r; ++b)
                    state[k++] = u0(static_cast<double>(wrap(grid_.center_index(I) + a)) * h,
                                    static_cast<double>(wrap(grid_.center_index(J) + b)) * h);
    return state;
}

namespace {

Field2D core_average(std::span<const double> values, std::size_t P, std::size_t m, std::size_t core) {
    const std::size_t lo = (m - core) / 2;
    Field2D U(P, P);
    const double w = 1.0 / static_cast<double>(core * core);
    for (std::size_t p = 0; p < P * P; ++p) {
        const double* v = values.data() + p * m * m;
        double s = 0.0;
        for (std::size_t a = lo; a < lo + core; ++a)
            for (std::size_t b = lo; b < lo + core; ++b) s += v[a * m + b];
        U.data[p] = s * w;
    }
    return U;
}

}  // namespace

Field2D GapTooth2D::restrict(std::span<const double> state) const {
    if (state.size() != P_ * P_ * m_ * m_) throw InputError("gap-tooth 2D: state size mismatch");
    return core_average(state, P_, m_, grid_.core);
}

double GapTooth2D::ghost_value(const Ghost& g, std::span<const double> U, std::size_t I, std::size_t J,
                               std::span<const double> v) const {
    double val = g.source >= 0 ? v[static_cast<std::size_t>(g.source)] : 0.0;
    const long P = static_cast<long>(P_);
    for (long al = -1; al <= 1; ++al) {
        const auto In = static_cast<std::size_t>((static_cast<long>(I) + al + P) % P);
        for (long be = -1; be <= 1; ++be) {
            const auto Jn = static_cast<std::size_t>((static_cast<long>(J) + be + P) % P);
            val += g.weights[al + 1][be + 1] * U[In * P_ + Jn];
        }
    }
    return val;
}

void GapTooth2D::patch_rhs(std::size_t patch, std::span<const double> U, std::span<const double> v,
                           std::span<double> out) const {
    const std::size_t m = m_;
    const double* bonds = bonds_[patch].data();
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const std::size_t i = a * m + b;
            const double c = v[i];
            const double* k = bonds + 4 * i;
            double f = 0.0;
            if (a + 1 < m) f += k[east] * (v[i + m] - c);
            if (a > 0) f += k[west] * (v[i - m] - c);
            if (b + 1 < m) f += k[north] * (v[i + 1] - c);
            if (b > 0) f += k[south] * (v[i - 1] - c);
            out[i] = f;
        }
    }
    const std::size_t I = patch / P_, J = patch % P_;
    for (const Ghost& g : ghosts_)
        out[g.interior] += bonds[4 * g.interior + g.dir] * (ghost_value(g, U, I, J, v) - v[g.interior]);
}

std::vector<double> GapTooth2D::rhs(std::span<const double> state) const {
    const Field2D U = restrict(state);
    std::vector<double> out(state.size());
    const std::size_t block = m_ * m_;
    for (std::size_t p = 0; p < P_ * P_; ++p)
        patch_rhs(p, U.data, state.subspan(p * block, block), std::span<double>(out).subspan(p * block, block));
    return out;
}

Field2D GapTooth2D::restricted_rhs(std::span<const double> state) const {
    return core_average(rhs(state), P_, m_, grid_.core);
}

void GapTooth2D::step(std::vector<double>& state) const {
    const std::size_t n = state.size();
    if (grid_.scheme == micro::TimeScheme::rk4) {
        const auto k1 = rhs(state);
        std::vector<double> tmp(n);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt_ * k1[i];
        const auto k2 = rhs(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt_ * k2[i];
        const auto k3 = rhs(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt_ * k3[i];
        const auto k4 = rhs(tmp);
        for (std::size_t i = 0; i < n; ++i) state[i] += dt_ / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        return;
    }
    // Backward Euler: the intra-patch part (including ghost sources) is
    // implicit; macro increments are taken from the current averages.
    const Field2D U = restrict(state);
    const std::size_t block = m_ * m_;
    std::vector<double> b(block);
    for (std::size_t p = 0; p < P_ * P_; ++p) {
        double* v = state.data() + p * block;
        std::copy(v, v + block, b.begin());
        const std::size_t I = p / P_, J = p % P_;
        for (const Ghost& g : ghosts_) {
            Ghost inc = g;
            inc.source = -1;
            b[g.interior] += dt_ * bonds_[p][4 * g.interior + g.dir] * ghost_value(inc, U.data, I, J, {});
        }
        const double* inv = implicit_inverse_[inverse_of_[p]].data();
        for (std::size_t i = 0; i < block; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < block; ++j) s += inv[i * block + j] * b[j];
            v[i] = s;
        }
    }
}

data::Geometry geometry_2d(const PatchGrid2D& grid) {
    data::Geometry g;
    g.dim = 2;
    g.nx = grid.patches;
    g.ny = grid.patches;
    for (std::size_t I = 0; I < grid.patches; ++I) g.x.push_back(grid.center(I));
    g.y = g.x;
    g.periodic = true;
    g.dirichlet_ends = false;
    return g;
}

data::SnapshotDataset simulate_gap_tooth_2d(const PatchGrid2D& grid, const std::function<double(double, double)>& u0,
                                            double T, double sample_interval) {
    grid.validate();
    if (T < 0.0 || !(sample_interval > 0.0)) throw ConfigError("simulate: need T >= 0 and a positive sampling interval");
    const double r = T / sample_interval;
    const std::size_t samples = static_cast<std::size_t>(std::llround(r));
    if (std::abs(r - static_cast<double>(samples)) > 1e-9 * std::max(1.0, r))
        throw ConfigError("simulate: sampling interval must divide the horizon");
    const std::size_t sub = ode::substeps(sample_interval, grid.micro_dt());
    const GapTooth2D gt(grid, sample_interval / static_cast<double>(sub));

    data::SnapshotDataset ds;
    ds.geometry = geometry_2d(grid);
    ds.provenance.scheme = "gap-tooth";
    ds.trajectories.emplace_back();
    auto& records = ds.trajectories.back().records;

    auto state = gt.initial_state(u0);
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * sample_interval;
        Field2D U = gt.restrict(state);
        for (std::size_t p = 0; p < U.size(); ++p)
            if (!(std::abs(U.data[p]) <= 1e6))
                throw NumericalError("gap-tooth 2D: patch " + std::to_string(p) + " blew up near t = " + std::to_string(t));
        records.push_back({t, std::move(U.data), gt.restricted_rhs(state).data});
        if (k == samples) break;
        for (std::size_t s = 0; s < sub; ++s) gt.step(state);
    }
    return ds;
}

}  // namespace patchnet::eqfree
