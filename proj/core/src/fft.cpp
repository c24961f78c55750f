#include "patchnet/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>

#include "patchnet/errors.hpp"

namespace patchnet {

Fft2D::Fft2D(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
    if (nx < 2 || ny < 2) throw InputError("Fft2D: grid must be at least 2 x 2");
    auto* buf = fftw_alloc_complex(nx * ny);
    buffer_ = buf;
    const int n0 = static_cast<int>(nx), n1 = static_cast<int>(ny);
    forward_plan_ = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft2D::~Fft2D() {
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(buffer_);
}

long Fft2D::wavenumber(std::size_t k, std::size_t n) {
    return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

std::vector<std::complex<double>> Fft2D::forward(const Field2D& u) {
    if (u.nx != nx_ || u.ny != ny_) throw InputError("Fft2D: field shape does not match the transform");
    auto* buf = static_cast<fftw_complex*>(buffer_);
    for (std::size_t i = 0; i < u.size(); ++i) {
        buf[i][0] = u.data[i];
        buf[i][1] = 0.0;
    }
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    std::vector<std::complex<double>> out(u.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {buf[i][0], buf[i][1]};
    return out;
}

Field2D Fft2D::inverse_real(const std::vector<std::complex<double>>& spectrum) {
    if (spectrum.size() != nx_ * ny_) throw InputError("Fft2D: spectrum size does not match the transform");
    auto* buf = static_cast<fftw_complex*>(buffer_);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        buf[i][0] = spectrum[i].real();
        buf[i][1] = spectrum[i].imag();
    }
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const double scale = 1.0 / static_cast<double>(nx_ * ny_);
    Field2D out(nx_, ny_);
    double peak = 0.0, imag_peak = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = buf[i][0] * scale;
        peak = std::max(peak, std::abs(out.data[i]));
        imag_peak = std::max(imag_peak, std::abs(buf[i][1] * scale));
    }
    if (imag_peak > 1e-10 * std::max(peak, 1.0))
        throw NumericalError("Fft2D: inverse transform has a non-negligible imaginary part");
    return out;
}

}  // namespace patchnet
