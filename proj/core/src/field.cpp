#include "patchnet/field.hpp"

#include "patchnet/errors.hpp"

namespace patchnet {

Field2D::Field2D(std::size_t nx_, std::size_t ny_, std::vector<double> values)
    : nx(nx_), ny(ny_), data(std::move(values)) {
    if (data.size() != nx * ny) throw InputError("Field2D: value count does not match shape");
}

double Field2D::wrap(long ix, long iy) const {
    const long n = static_cast<long>(nx), m = static_cast<long>(ny);
    ix %= n;
    iy %= m;
    if (ix < 0) ix += n;
    if (iy < 0) iy += m;
    return data[static_cast<std::size_t>(ix) * ny + static_cast<std::size_t>(iy)];
}

}  // namespace patchnet
