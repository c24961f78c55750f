#pragma once

#include <cstddef>
#include <vector>

namespace patchnet {

// Dense 2D array, x index major: (ix, iy) -> data[ix * ny + iy].
struct Field2D {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> data;

    Field2D() = default;
    Field2D(std::size_t nx_, std::size_t ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), data(nx_ * ny_, fill) {}
    Field2D(std::size_t nx_, std::size_t ny_, std::vector<double> values);

    double& operator()(std::size_t ix, std::size_t iy) { return data[ix * ny + iy]; }
    double operator()(std::size_t ix, std::size_t iy) const { return data[ix * ny + iy]; }
    std::size_t size() const { return data.size(); }

    // Periodic access with signed indices.
    double wrap(long ix, long iy) const;

    bool operator==(const Field2D&) const = default;
};

}  // namespace patchnet
