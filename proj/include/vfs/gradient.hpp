#pragma once

#include <cstddef>

#include "vfs/volume.hpp"

namespace vfs {

enum class GradientUnits {
    Physical,  // per millimetre (divide by spacing)
    Voxel      // per voxel step
};

/// Finite-difference gradient: central differences inside, one-sided on the
/// border. Every active axis needs at least two voxels.
inline VectorField gradient(const ScalarVolume& v, GradientUnits units = GradientUnits::Physical) {
    const GridGeometry& g = v.geometry();
    for (int a = 0; a < g.ndim(); ++a) {
        if (g.dim(a) < 2) {
            throw GeometryError("gradient: axis " + std::to_string(a) + " has fewer than 2 voxels");
        }
    }
    VectorField out(g);
    const auto& d = g.dims();
    const std::size_t stride[3] = {1, d[0], d[0] * d[1]};
    for (int a = 0; a < g.ndim(); ++a) {
        const double h = units == GradientUnits::Physical ? g.spacing()[a] : 1.0;
        const double inv_central = 1.0 / (2.0 * h);
        const double inv_side = 1.0 / h;
        std::vector<double>& dst = out.component(a).values();
        const std::vector<double>& src = v.values();
        for (std::size_t k = 0; k < d[2]; ++k) {
            for (std::size_t j = 0; j < d[1]; ++j) {
                for (std::size_t i = 0; i < d[0]; ++i) {
                    const std::size_t idx = g.linear(i, j, k);
                    const std::size_t pos = a == 0 ? i : (a == 1 ? j : k);
                    const std::size_t s = stride[a];
                    if (pos == 0) {
                        dst[idx] = (src[idx + s] - src[idx]) * inv_side;
                    } else if (pos == d[a] - 1) {
                        dst[idx] = (src[idx] - src[idx - s]) * inv_side;
                    } else {
                        dst[idx] = (src[idx + s] - src[idx - s]) * inv_central;
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace vfs
