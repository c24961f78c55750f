#include "patchnet/stencil.hpp"

#include "patchnet/errors.hpp"

namespace patchnet::stencil {

std::vector<std::vector<double>> fornberg_weights(double x0, std::span<const double> nodes, unsigned max_order) {
    const std::size_t n = nodes.size();
    if (n == 0) throw InputError("fornberg_weights: no nodes");
    const std::size_t mo = max_order;
    std::vector<std::vector<double>> c(mo + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0, c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, mo);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            if (c3 == 0.0) throw InputError("fornberg_weights: repeated node");
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k)
                    c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k)
                c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

std::size_t window_start(std::size_t i, std::size_t width, std::size_t count) {
    if (width > count) throw ConfigError("stencil window wider than the grid");
    const std::size_t left = (width - 1) / 2;
    std::size_t start = i >= left ? i - left : 0;
    if (start + width > count) start = count - width;
    return start;
}

}  // namespace patchnet::stencil
