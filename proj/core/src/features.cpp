#include "patchnet/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "patchnet/errors.hpp"
#include "patchnet/fft.hpp"
#include "patchnet/stencil.hpp"

namespace patchnet::features {

namespace {

struct Order {
    unsigned x, y;
};

Order order_of(Derivative d) {
    switch (d) {
        case Derivative::value: return {0, 0};
        case Derivative::dx: return {1, 0};
        case Derivative::dxx: return {2, 0};
        case Derivative::dy: return {0, 1};
        case Derivative::dyy: return {0, 2};
        case Derivative::dxy: return {1, 1};
    }
    return {0, 0};
}

}  // namespace

std::string to_string(Derivative d) {
    switch (d) {
        case Derivative::value: return "u";
        case Derivative::dx: return "u_x";
        case Derivative::dxx: return "u_xx";
        case Derivative::dy: return "u_y";
        case Derivative::dyy: return "u_yy";
        case Derivative::dxy: return "u_xy";
    }
    return "?";
}

Derivative derivative_from_string(const std::string& s) {
    for (Derivative d : {Derivative::value, Derivative::dx, Derivative::dxx, Derivative::dy, Derivative::dyy,
                         Derivative::dxy})
        if (to_string(d) == s) return d;
    throw ConfigError("unknown derivative feature '" + s + "'");
}

void FeatureSpec::validate() const {
    if (derivatives.empty()) throw ConfigError("feature spec: no derivatives");
    for (std::size_t i = 0; i < derivatives.size(); ++i)
        for (std::size_t j = i + 1; j < derivatives.size(); ++j)
            if (derivatives[i] == derivatives[j]) throw ConfigError("feature spec: duplicate derivative");
    if (method == Method::finite_difference) {
        if (stencil < 3 || stencil % 2 == 0) throw ConfigError("feature spec: stencil size must be odd and >= 3");
        if (!(spacing > 0.0)) throw ConfigError("feature spec: spacing must be positive");
    }
}

FeatureSpec FeatureSpec::default_1d(double spacing) {
    return {{Derivative::value, Derivative::dx, Derivative::dxx}, Method::finite_difference, 3, spacing};
}

FeatureSpec FeatureSpec::default_2d() {
    return {{Derivative::value, Derivative::dx, Derivative::dy, Derivative::dxx, Derivative::dyy, Derivative::dxy},
            Method::spectral, 3, 0.0};
}

Eigen::MatrixXd fd_derivatives_1d(std::span<const double> u, const FeatureSpec& spec) {
    spec.validate();
    if (spec.method != Method::finite_difference) throw InputError("fd_derivatives_1d: spec is not finite-difference");
    const std::size_t n = u.size();
    const auto cols = static_cast<Eigen::Index>(spec.width());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        const Order o = order_of(spec.derivatives[static_cast<std::size_t>(c)]);
        if (o.y != 0) throw InputError("fd_derivatives_1d: y derivative requested on a 1D field");
        if (o.x == 0) {
            for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), c) = u[i];
            continue;
        }
        // Interior: centred stencil of the given size. Near the ends a
        // one-sided window of stencil - 1 + order points keeps the order.
        const std::size_t centred = spec.stencil;
        const std::size_t sided = spec.stencil - 1 + o.x;
        if (n < std::max(centred, sided)) throw InputError("fd_derivatives_1d: fewer points than the stencil");
        const std::size_t half = centred / 2;
        std::vector<double> nodes;
        for (std::size_t i = 0; i < n; ++i) {
            const bool inside = i >= half && i + half < n;
            const std::size_t width = inside ? centred : sided;
            const std::size_t start = inside ? i - half : stencil::window_start(i, width, n);
            nodes.resize(width);
            for (std::size_t k = 0; k < width; ++k) nodes[k] = (static_cast<double>(start + k) - static_cast<double>(i));
            const auto w = stencil::fornberg_weights(0.0, nodes, o.x);
            double d = 0.0;
            for (std::size_t k = 0; k < width; ++k) d += w[o.x][k] * u[start + k];
            out(static_cast<Eigen::Index>(i), c) = d / std::pow(spec.spacing, o.x);
        }
    }
    return out;
}

Eigen::MatrixXd spectral_derivatives_2d(const Field2D& u, const FeatureSpec& spec) {
    spec.validate();
    if (spec.method != Method::spectral) throw InputError("spectral_derivatives_2d: spec is not spectral");
    Fft2D fft(u.nx, u.ny);
    const auto spectrum = fft.forward(u);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(u.size()), static_cast<Eigen::Index>(spec.width()));
    const std::complex<double> I(0.0, 1.0);
    for (std::size_t c = 0; c < spec.width(); ++c) {
        const Order o = order_of(spec.derivatives[c]);
        auto s = spectrum;
        if (o.x + o.y > 0) {
            for (std::size_t i = 0; i < u.nx; ++i) {
                const long kx = Fft2D::wavenumber(i, u.nx);
                // The Nyquist mode has no sign; odd derivatives drop it.
                const bool nyq_x = u.nx % 2 == 0 && i == u.nx / 2;
                for (std::size_t j = 0; j < u.ny; ++j) {
                    const long ky = Fft2D::wavenumber(j, u.ny);
                    const bool nyq_y = u.ny % 2 == 0 && j == u.ny / 2;
                    auto& z = s[i * u.ny + j];
                    if ((nyq_x && o.x % 2 == 1) || (nyq_y && o.y % 2 == 1)) {
                        z = 0.0;
                        continue;
                    }
                    for (unsigned q = 0; q < o.x; ++q) z *= I * static_cast<double>(kx);
                    for (unsigned q = 0; q < o.y; ++q) z *= I * static_cast<double>(ky);
                }
            }
        }
        const Field2D d = fft.inverse_real(s);
        for (std::size_t p = 0; p < d.size(); ++p) out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = d.data[p];
    }
    return out;
}

Eigen::MatrixXd compute(std::span<const double> u, std::size_t nx, std::size_t ny, const FeatureSpec& spec) {
    if (u.size() != nx * ny) throw InputError("features: field size does not match its shape");
    if (spec.method == Method::finite_difference) {
        if (ny != 1) throw InputError("features: finite differences are implemented for 1D fields");
        return fd_derivatives_1d(u, spec);
    }
    return spectral_derivatives_2d(Field2D(nx, ny, std::vector<double>(u.begin(), u.end())), spec);
}

}  // namespace patchnet::features
