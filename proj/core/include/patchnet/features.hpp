#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "patchnet/field.hpp"

namespace patchnet::features {

enum class Derivative { value, dx, dxx, dy, dyy, dxy };
enum class Method { finite_difference, spectral };

std::string to_string(Derivative d);
Derivative derivative_from_string(const std::string& s);

struct FeatureSpec {
    std::vector<Derivative> derivatives;
    Method method = Method::finite_difference;
    std::size_t stencil = 3;   // finite differences only
    double spacing = 1.0;      // finite differences only; spectral assumes [0, 2 pi)

    void validate() const;
    std::size_t width() const { return derivatives.size(); }

    // (U, U_x, U_xx) with 3-point differences.
    static FeatureSpec default_1d(double spacing);
    // (U, U_x, U_y, U_xx, U_yy, U_xy) by FFT.
    static FeatureSpec default_2d();
};

// Points x features. Centred differences inside, one-sided of the same order
// at the ends.
Eigen::MatrixXd fd_derivatives_1d(std::span<const double> u, const FeatureSpec& spec);

// Points (row-major over the grid) x features on the periodic [0, 2 pi)^2 grid.
Eigen::MatrixXd spectral_derivatives_2d(const Field2D& u, const FeatureSpec& spec);

// Dispatches on spec.method; 1D fields use ny == 1.
Eigen::MatrixXd compute(std::span<const double> u, std::size_t nx, std::size_t ny, const FeatureSpec& spec);

}  // namespace patchnet::features
