#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "patchnet/errors.hpp"
#include "patchnet/features.hpp"
#include "patchnet/fft.hpp"
#include "patchnet/random.hpp"

using namespace patchnet;
using namespace patchnet::features;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<double> sample_1d(std::size_t n, double dx, const std::function<double(double)>& f) {
    std::vector<double> u(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = f(static_cast<double>(j) * dx);
    return u;
}

Field2D sample_2d(std::size_t nx, std::size_t ny, const std::function<double(double, double)>& f) {
    Field2D u(nx, ny);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) u(i, j) = f(2 * pi * i / nx, 2 * pi * j / ny);
    return u;
}

}  // namespace

TEST(FeatureSpec, NamesRoundTrip) {
    for (Derivative d : {Derivative::value, Derivative::dx, Derivative::dxx, Derivative::dy, Derivative::dyy,
                         Derivative::dxy})
        EXPECT_EQ(derivative_from_string(to_string(d)), d);
    EXPECT_EQ(to_string(Derivative::dxx), "u_xx");
    EXPECT_THROW(derivative_from_string("u_xxx"), ConfigError);
}

TEST(FeatureSpec, Validation) {
    EXPECT_NO_THROW(FeatureSpec::default_1d(0.1).validate());
    EXPECT_NO_THROW(FeatureSpec::default_2d().validate());
    EXPECT_EQ(FeatureSpec::default_2d().width(), 6u);
    FeatureSpec s = FeatureSpec::default_1d(0.1);
    s.derivatives.push_back(Derivative::dx);
    EXPECT_THROW(s.validate(), ConfigError);
    s = FeatureSpec::default_1d(0.1);
    s.stencil = 4;
    EXPECT_THROW(s.validate(), ConfigError);
    s.stencil = 1;
    EXPECT_THROW(s.validate(), ConfigError);
    s = FeatureSpec::default_1d(0.0);
    EXPECT_THROW(s.validate(), ConfigError);
    s = FeatureSpec::default_1d(0.1);
    s.derivatives.clear();
    EXPECT_THROW(s.validate(), ConfigError);
}

// --- finite differences -------------------------------------------------

TEST(FiniteDifference, ConstantField) {
    const std::vector<double> u(11, 2.0);
    const auto F = fd_derivatives_1d(u, FeatureSpec::default_1d(0.1));
    ASSERT_EQ(F.rows(), 11);
    ASSERT_EQ(F.cols(), 3);
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
        EXPECT_EQ(F(i, 0), 2.0);
        EXPECT_NEAR(F(i, 1), 0.0, 1e-12);
        EXPECT_NEAR(F(i, 2), 0.0, 1e-10);
    }
}

TEST(FiniteDifference, ExactOnQuadraticsEverywhere) {
    const double dx = 0.1;
    const auto u = sample_1d(11, dx, [](double x) { return 1.0 - 2.0 * x + 3.0 * x * x; });
    const auto F = fd_derivatives_1d(u, FeatureSpec::default_1d(dx));
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
        const double x = static_cast<double>(i) * dx;
        EXPECT_NEAR(F(i, 1), -2.0 + 6.0 * x, 1e-12) << i;
        EXPECT_NEAR(F(i, 2), 6.0, 1e-10) << i;
    }
}

TEST(FiniteDifference, LinearFieldHasUnitSlope) {
    const auto u = sample_1d(11, 0.1, [](double x) { return x; });
    const auto F = fd_derivatives_1d(u, FeatureSpec::default_1d(0.1));
    for (Eigen::Index i = 1; i + 1 < F.rows(); ++i) {
        EXPECT_NEAR(F(i, 1), 1.0, 1e-13);
        EXPECT_NEAR(F(i, 2), 0.0, 1e-11);
    }
}

TEST(FiniteDifference, SineMatchesClosedFormDifference) {
    const double dx = 0.1, k = 2 * pi;
    const auto u = sample_1d(11, dx, [&](double x) { return std::sin(k * x); });
    const auto F = fd_derivatives_1d(u, FeatureSpec::default_1d(dx));
    for (Eigen::Index i = 1; i + 1 < F.rows(); ++i) {
        const double x = static_cast<double>(i) * dx;
        EXPECT_NEAR(F(i, 2), -(2.0 / (dx * dx)) * (1.0 - std::cos(k * dx)) * std::sin(k * x), 1e-12);
        EXPECT_NEAR(F(i, 1), std::sin(k * dx) / dx * std::cos(k * x), 1e-12);
    }
}

TEST(FiniteDifference, BoundaryStencilsAreSecondOrder) {
    auto err = [](std::size_t n) {
        const double dx = 1.0 / static_cast<double>(n - 1);
        const auto u = sample_1d(n, dx, [](double x) { return std::exp(x); });
        const auto F = fd_derivatives_1d(u, FeatureSpec::default_1d(dx));
        return std::max(std::abs(F(0, 1) - 1.0), std::abs(F(0, 2) - 1.0));
    };
    EXPECT_GT(err(21) / err(41), 3.5);
}

TEST(FiniteDifference, WiderStencilIsFourthOrderInside) {
    auto err = [](std::size_t n) {
        const double dx = 1.0 / static_cast<double>(n - 1);
        const auto u = sample_1d(n, dx, [](double x) { return std::sin(3 * x); });
        FeatureSpec s = FeatureSpec::default_1d(dx);
        s.stencil = 5;
        const auto F = fd_derivatives_1d(u, s);
        const Eigen::Index mid = static_cast<Eigen::Index>(n / 2);
        return std::abs(F(mid, 2) + 9 * std::sin(3 * mid * dx));
    };
    EXPECT_NEAR(err(21) / err(41), 16.0, 1.0);
}

TEST(FiniteDifference, TooFewPointsIsInputError) {
    const std::vector<double> u{1.0, 2.0};
    EXPECT_THROW(fd_derivatives_1d(u, FeatureSpec::default_1d(0.1)), InputError);
    FeatureSpec spectral = FeatureSpec::default_2d();
    EXPECT_THROW(compute(std::vector<double>(3, 0.0), 3, 1, FeatureSpec::default_1d(0.1)), InputError);
    EXPECT_THROW(compute(std::vector<double>(5, 0.0), 2, 2, spectral), InputError);
}

TEST(FiniteDifference, Linearity) {
    Rng rng(3);
    std::vector<double> u(15), v(15), w(15);
    for (auto& x : u) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const double a = 1.7, b = -0.4;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = a * u[j] + b * v[j];
    const auto spec = FeatureSpec::default_1d(0.05);
    const Eigen::MatrixXd diff = fd_derivatives_1d(w, spec) - a * fd_derivatives_1d(u, spec) - b * fd_derivatives_1d(v, spec);
    // Entries scale like 1/dx^2 = 400.
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12 * 400);
}

// --- spectral ------------------------------------------------------------

TEST(Spectral, ConstantHasZeroDerivatives) {
    const auto F = spectral_derivatives_2d(sample_2d(16, 16, [](double, double) { return 3.0; }), FeatureSpec::default_2d());
    for (Eigen::Index p = 0; p < F.rows(); ++p) {
        EXPECT_NEAR(F(p, 0), 3.0, 1e-14);
        for (Eigen::Index c = 1; c < F.cols(); ++c) EXPECT_NEAR(F(p, c), 0.0, 1e-12);
    }
}

TEST(Spectral, SingleModesAreExact) {
    const FeatureSpec spec = FeatureSpec::default_2d();  // u, u_x, u_y, u_xx, u_yy, u_xy
    const auto u = sample_2d(16, 12, [](double x, double) { return std::sin(3 * x); });
    const auto F = spectral_derivatives_2d(u, spec);
    const auto v = sample_2d(16, 12, [](double x, double y) { return std::sin(2 * x) * std::cos(y); });
    const auto G = spectral_derivatives_2d(v, spec);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 12; ++j) {
            const double x = 2 * pi * i / 16, y = 2 * pi * j / 12;
            const auto p = static_cast<Eigen::Index>(i * 12 + j);
            EXPECT_NEAR(F(p, 1), 3 * std::cos(3 * x), 1e-12);
            EXPECT_NEAR(F(p, 3), -9 * std::sin(3 * x), 1e-12);
            EXPECT_NEAR(F(p, 2), 0.0, 1e-12);
            EXPECT_NEAR(G(p, 5), 2 * std::cos(2 * x) * -std::sin(y), 1e-12);
            EXPECT_NEAR(G(p, 4), -std::sin(2 * x) * std::cos(y), 1e-12);
        }
}

TEST(Spectral, NyquistModeDroppedForOddDerivatives) {
    // cos(4x) on 8 points is the Nyquist mode: u_x must vanish, u_xx = -16 u.
    const auto u = sample_2d(8, 8, [](double x, double) { return std::cos(4 * x); });
    const auto F = spectral_derivatives_2d(u, FeatureSpec::default_2d());
    for (Eigen::Index p = 0; p < F.rows(); ++p) {
        EXPECT_NEAR(F(p, 1), 0.0, 1e-12);
        EXPECT_NEAR(F(p, 3), -16 * F(p, 0), 1e-11);
    }
}

TEST(Spectral, BandLimitedFieldAndLinearity) {
    Rng rng(11);
    auto random_field = [&] {
        std::vector<std::array<double, 4>> terms(6);
        for (auto& t : terms) t = {rng.uniform(-1, 1), std::floor(rng.uniform(-5, 6)), std::floor(rng.uniform(-5, 6)),
                                   rng.uniform(0, 2 * pi)};
        return terms;
    };
    const auto tu = random_field(), tv = random_field();
    auto eval = [](const std::vector<std::array<double, 4>>& t, double x, double y, int dx, int dy) {
        double s = 0.0;
        for (const auto& [a, kx, ky, ph] : t) {
            // d^n/dz^n cos(z) = cos(z + n pi / 2)
            const int n = dx + dy;
            s += a * std::pow(kx, dx) * std::pow(ky, dy) * std::cos(kx * x + ky * y + ph + n * pi / 2);
        }
        return s;
    };
    const auto spec = FeatureSpec::default_2d();
    const std::array<std::pair<int, int>, 6> order{{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {0, 2}, {1, 1}}};
    const auto u = sample_2d(16, 16, [&](double x, double y) { return eval(tu, x, y, 0, 0); });
    const auto v = sample_2d(16, 16, [&](double x, double y) { return eval(tv, x, y, 0, 0); });
    const auto F = spectral_derivatives_2d(u, spec);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j)
            for (std::size_t c = 0; c < 6; ++c)
                EXPECT_NEAR(F(static_cast<Eigen::Index>(i * 16 + j), static_cast<Eigen::Index>(c)),
                            eval(tu, 2 * pi * i / 16, 2 * pi * j / 16, order[c].first, order[c].second), 1e-11);

    Field2D w(16, 16);
    for (std::size_t k = 0; k < w.size(); ++k) w.data[k] = 2.0 * u.data[k] - 3.0 * v.data[k];
    const Eigen::MatrixXd diff = spectral_derivatives_2d(w, spec) - 2.0 * F + 3.0 * spectral_derivatives_2d(v, spec);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12 * 100);
}

TEST(Spectral, RealFieldHasRealDerivatives) {
    Rng rng(5);
    Field2D u(12, 10);
    for (double& v : u.data) v = rng.uniform(-1, 1);
    Fft2D fft(12, 10);
    auto s = fft.forward(u);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            const long kx = Fft2D::wavenumber(i, 12), ky = Fft2D::wavenumber(j, 10);
            const bool nyq = i == 6 || j == 5;
            s[i * 10 + j] *= nyq ? 0.0 : std::complex<double>(0, 1) * static_cast<double>(kx) * std::complex<double>(0, 1) * static_cast<double>(ky);
        }
    EXPECT_NO_THROW(fft.inverse_real(s));
    // A purely imaginary image is rejected.
    std::vector<std::complex<double>> bad(120, 0.0);
    bad[1] = {0.0, 1.0};
    EXPECT_THROW(fft.inverse_real(bad), NumericalError);
}

TEST(Spectral, RejectsFiniteDifferenceSpec) {
    EXPECT_THROW(spectral_derivatives_2d(Field2D(4, 4), FeatureSpec::default_1d(0.1)), InputError);
}

TEST(Compute, DispatchesOnMethod) {
    const auto u = sample_1d(9, 0.25, [](double x) { return x * x; });
    const auto F = compute(u, 9, 1, FeatureSpec::default_1d(0.25));
    EXPECT_NEAR(F(4, 2), 2.0, 1e-12);
    const auto v = sample_2d(8, 8, [](double x, double) { return std::sin(x); });
    const auto G = compute(v.data, 8, 8, FeatureSpec::default_2d());
    EXPECT_NEAR(G(8, 1), std::cos(2 * pi / 8), 1e-12);
}
