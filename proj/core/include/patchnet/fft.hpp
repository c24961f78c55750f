#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "patchnet/field.hpp"

namespace patchnet {

// Complex 2D DFT on an nx x ny grid backed by FFTW plans. Unnormalized in
// both directions, as in FFTW. Not copyable; not safe for concurrent use.
class Fft2D {
public:
    Fft2D(std::size_t nx, std::size_t ny);
    ~Fft2D();
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }

    std::vector<std::complex<double>> forward(const Field2D& u);
    // Returns the real part; throws NumericalError if the imaginary part is
    // not negligible relative to the largest magnitude.
    Field2D inverse_real(const std::vector<std::complex<double>>& spectrum);

    // Signed integer wavenumber of DFT index k on a grid of n points.
    static long wavenumber(std::size_t k, std::size_t n);

private:
    std::size_t nx_, ny_;
    void* buffer_;
    void* forward_plan_;
    void* inverse_plan_;
};

}  // namespace patchnet
