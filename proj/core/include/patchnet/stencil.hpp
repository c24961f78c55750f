#pragma once

#include <span>
#include <vector>

namespace patchnet::stencil {

// Finite-difference weights (Fornberg's recursion) for derivatives 0..max_order
// at x0 from values at `nodes`. Result[m][j] weights node j for derivative m.
std::vector<std::vector<double>> fornberg_weights(double x0, std::span<const double> nodes, unsigned max_order);

// First index of a window of `width` consecutive points out of `count`,
// centred on `i` where possible and shifted inward near the ends.
std::size_t window_start(std::size_t i, std::size_t width, std::size_t count);

}  // namespace patchnet::stencil
