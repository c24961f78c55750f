#include "patchnet/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchnet/errors.hpp"

namespace patchnet::ode {

std::size_t substeps(double interval, double max_dt) {
    if (!(max_dt > 0.0)) throw InputError("substeps: max_dt must be positive");
    if (interval <= 0.0) return 0;
    const double n = std::ceil(interval / max_dt * (1.0 - 1e-12));
    return static_cast<std::size_t>(std::max(1.0, n));
}

void rk4_step(const Rhs& rhs, State& u, double dt) {
    const std::size_t n = u.size();
    State k1(n), k2(n), k3(n), k4(n), tmp(n);
    rhs(u, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

std::vector<State> rk4(const Rhs& rhs, State u0, std::span<const double> t_grid, double max_dt,
                       double blowup) {
    if (t_grid.empty()) throw InputError("rk4: empty time grid");
    std::vector<State> out;
    out.reserve(t_grid.size());
    out.push_back(u0);
    State u = std::move(u0);
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        const double interval = t_grid[k] - t_grid[k - 1];
        if (!(interval > 0.0)) throw InputError("rk4: time grid must be strictly increasing");
        const std::size_t n = substeps(interval, max_dt);
        const double dt = interval / static_cast<double>(n);
        for (std::size_t s = 0; s < n; ++s) {
            rk4_step(rhs, u, dt);
            double peak = 0.0;
            for (double v : u) peak = std::max(peak, std::abs(v));
            if (!(peak <= blowup)) {
                throw NumericalError("rk4: state blew up (max|u| = " + std::to_string(peak) +
                                     ") near t = " +
                                     std::to_string(t_grid[k - 1] + static_cast<double>(s + 1) * dt));
            }
        }
        out.push_back(u);
    }
    return out;
}

}  // namespace patchnet::ode
