#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace patchnet::ode {

using State = std::vector<double>;
using Rhs = std::function<void(const State& u, State& dudt)>;

// Number of equal substeps of length <= max_dt covering an interval.
std::size_t substeps(double interval, double max_dt);

// Classical RK4 with a fixed step per output interval, chosen so that every
// entry of t_grid is hit exactly. Returns one state per t_grid entry; the
// first is u0. Throws NumericalError once max|u| exceeds blowup.
std::vector<State> rk4(const Rhs& rhs, State u0, std::span<const double> t_grid, double max_dt,
                       double blowup = std::numeric_limits<double>::infinity());

void rk4_step(const Rhs& rhs, State& u, double dt);

}  // namespace patchnet::ode
