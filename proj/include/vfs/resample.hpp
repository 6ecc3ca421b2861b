#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vfs/interpolate.hpp"
#include "vfs/transforms.hpp"
#include "vfs/volume.hpp"

namespace vfs {

/// Pull-back warp: output voxel at x holds v sampled at t(x). Outside the
/// source grid: `fill`, or the nearest border value with Boundary::Clamp.
inline ScalarVolume resample(const ScalarVolume& v, const Transform& t, const GridGeometry& out_geom,
                             double fill = 0.0, Boundary boundary = Boundary::Fill) {
    ScalarVolume out(out_geom);
    const std::vector<Vec3> mapped = t.apply_to_grid(out_geom);
    for (std::size_t idx = 0; idx < mapped.size(); ++idx) {
        out[idx] = apply_stencil(make_stencil(v.geometry(), mapped[idx], boundary), v.values(), fill);
    }
    return out;
}

/// Component-wise warp. Vectors are not reoriented by the transform Jacobian.
inline VectorField resample_field(const VectorField& f, const Transform& t, const GridGeometry& out_geom,
                                  double fill = 0.0) {
    VectorField out(out_geom);
    if (out_geom.ndim() != f.geometry().ndim()) throw GeometryError("resample_field: dimensionality mismatch");
    const std::vector<Vec3> mapped = t.apply_to_grid(out_geom);
    for (std::size_t idx = 0; idx < mapped.size(); ++idx) {
        const LinearStencil st = make_stencil(f.geometry(), mapped[idx]);
        for (int c = 0; c < f.ncomponents(); ++c) {
            out.component(c)[idx] = apply_stencil(st, f.component(c).values(), fill);
        }
    }
    return out;
}

/// Separable Gaussian smoothing with per-axis sigma in voxels. Taps falling
/// outside the grid are dropped and the remaining weights renormalised, so
/// constant volumes are reproduced exactly.
inline ScalarVolume gaussian_smooth(const ScalarVolume& v, const std::array<double, 3>& sigma_voxels) {
    ScalarVolume cur = v;
    const GridGeometry& g = v.geometry();
    const auto& d = g.dims();
    const std::size_t stride[3] = {1, d[0], d[0] * d[1]};
    for (int a = 0; a < g.ndim(); ++a) {
        const double sigma = sigma_voxels[a];
        if (!(sigma > 0.0) || d[a] < 2) continue;
        const int radius = static_cast<int>(std::ceil(3.0 * sigma));
        std::vector<double> taps(2 * radius + 1);
        for (int r = -radius; r <= radius; ++r) taps[r + radius] = std::exp(-0.5 * r * r / (sigma * sigma));
        ScalarVolume next(g);
        for (std::size_t idx = 0; idx < cur.size(); ++idx) {
            const Index3 vox = g.unravel(idx);
            const long pos = static_cast<long>(vox[a]);
            const double centre = cur[idx];
            double acc = 0.0;
            double wsum = 0.0;
            for (int r = -radius; r <= radius; ++r) {
                const long q = pos + r;
                if (q < 0 || q >= static_cast<long>(d[a])) continue;
                const double w = taps[r + radius];
                // Accumulate deviations from the centre value: exact for constants.
                acc += w * (cur[idx + (q - pos) * static_cast<long>(stride[a])] - centre);
                wsum += w;
            }
            next[idx] = centre + acc / wsum;
        }
        cur = std::move(next);
    }
    return cur;
}

inline GridGeometry decimated_geometry(const GridGeometry& g, const std::array<std::size_t, 3>& factor) {
    std::vector<std::size_t> dims;
    std::vector<double> spacing, origin;
    for (int a = 0; a < g.ndim(); ++a) {
        if (factor[a] < 1) throw ParameterError("downsample: factor must be >= 1");
        const std::size_t n = (g.dim(a) - 1) / factor[a] + 1;
        if (n < 2) {
            throw ParameterError("downsample: factor " + std::to_string(factor[a]) + " reduces axis " +
                                 std::to_string(a) + " below 2 voxels (pyramid too deep)");
        }
        dims.push_back(n);
        spacing.push_back(g.spacing()[a] * double(factor[a]));
        origin.push_back(g.origin()[a]);
    }
    return GridGeometry(dims, spacing, origin);
}

/// Gaussian pre-smoothing (sigma = 0.5 * factor voxels) followed by keeping
/// every factor-th voxel from index 0. The origin is unchanged.
inline ScalarVolume downsample(const ScalarVolume& v, const std::array<std::size_t, 3>& factor) {
    const GridGeometry& g = v.geometry();
    const GridGeometry out_geom = decimated_geometry(g, factor);
    std::array<double, 3> sigma{0.0, 0.0, 0.0};
    for (int a = 0; a < g.ndim(); ++a) sigma[a] = 0.5 * double(factor[a]);
    const ScalarVolume smooth = gaussian_smooth(v, sigma);
    ScalarVolume out(out_geom);
    const auto& od = out_geom.dims();
    const std::size_t fz = g.ndim() == 3 ? factor[2] : 1;
    for (std::size_t k = 0; k < od[2]; ++k)
        for (std::size_t j = 0; j < od[1]; ++j)
            for (std::size_t i = 0; i < od[0]; ++i)
                out.at(i, j, k) = smooth.at(i * factor[0], j * factor[1], k * fz);
    return out;
}

inline ScalarVolume downsample(const ScalarVolume& v, std::size_t factor) {
    return downsample(v, {factor, factor, factor});
}

/// Nearest-voxel decimation for label maps (no smoothing).
inline LabelVolume downsample_labels(const LabelVolume& v, std::size_t factor) {
    const GridGeometry& g = v.geometry();
    const GridGeometry out_geom = decimated_geometry(g, {factor, factor, factor});
    LabelVolume out(out_geom);
    const auto& od = out_geom.dims();
    const std::size_t fz = g.ndim() == 3 ? factor : 1;
    for (std::size_t k = 0; k < od[2]; ++k)
        for (std::size_t j = 0; j < od[1]; ++j)
            for (std::size_t i = 0; i < od[0]; ++i)
                out[out_geom.linear(i, j, k)] = v[g.linear(i * factor, j * factor, k * fz)];
    return out;
}

}  // namespace vfs
