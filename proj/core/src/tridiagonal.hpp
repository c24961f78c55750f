#pragma once

#include <cmath>
#include <vector>

#include "patchnet/errors.hpp"

namespace patchnet::detail {

// Thomas algorithm for sub/diag/super bands; overwrites rhs with the solution.
// sub[0] and sup[n-1] are ignored.
inline void solve_tridiagonal(const std::vector<double>& sub, const std::vector<double>& diag,
                              const std::vector<double>& sup, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    double beta = diag[0];
    if (beta == 0.0) throw NumericalError("tridiagonal: zero pivot");
    c[0] = sup[0] / beta;
    rhs[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        beta = diag[i] - sub[i] * c[i - 1];
        if (beta == 0.0 || !std::isfinite(beta)) throw NumericalError("tridiagonal: singular system");
        c[i] = (i + 1 < n) ? sup[i] / beta : 0.0;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace patchnet::detail
