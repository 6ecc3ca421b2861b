#pragma once

// Synthetic test images and deformations: a brain-like 2-D slice with T1/T2
// style contrasts, a 3-D multi-object phantom, and smooth B-spline warps.
// Shapes have soft (logistic) borders so that they can be evaluated at any
// physical point, which lets moving images be generated without resampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "vfs/transforms.hpp"
#include "vfs/volume.hpp"

namespace vfs::phantom {

using Field = std::function<double(const Vec3&)>;

inline ScalarVolume rasterize(const Field& f, const GridGeometry& g) {
    ScalarVolume out(g);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        const Index3 v = g.unravel(idx);
        out[idx] = f(g.voxel_to_physical(v[0], v[1], v[2]));
    }
    return out;
}

/// Soft indicator of the ellipsoid |(p - c)/r| <= 1 with a border of about
/// `width` mm.
inline double soft_ellipsoid(const Vec3& p, const Vec3& c, const Vec3& r, double width, int ndim) {
    double s = 0.0;
    double rmin = r[0];
    for (int a = 0; a < ndim; ++a) {
        const double d = (p[a] - c[a]) / r[a];
        s += d * d;
        rmin = std::min(rmin, r[a]);
    }
    const double signed_distance = (std::sqrt(s) - 1.0) * rmin;
    return 1.0 / (1.0 + std::exp(signed_distance / width));
}

enum class Weighting { T1, T2 };

/// Axial brain-like slice on an n x n grid (1 mm pixels at n = 128): scalp,
/// skull, CSF, a folded grey-matter ribbon about 3.5 mm thick, white matter,
/// the interhemispheric fissure, ventricles and deep grey nuclei. T2
/// weighting reorders tissue intensities (CSF bright, white matter dark).
inline Field brain_slice_field(std::size_t n = 128, Weighting w = Weighting::T1) {
    const double c = 0.5 * double(n - 1);
    const double s = double(n) / 128.0;
    struct Tissues {
        double background, scalp, skull, csf, grey, white, nuclei;
    };
    const Tissues t1{0.0, 70.0, 15.0, 25.0, 80.0, 120.0, 95.0};
    const Tissues t2{0.0, 60.0, 10.0, 140.0, 90.0, 55.0, 75.0};
    const Tissues t = w == Weighting::T1 ? t1 : t2;
    return [=](const Vec3& p) {
        const double x = p[0] - c;
        const double y = p[1] - c;
        const double width = 0.35;
        auto blob = [&](double cx, double cy, double rx, double ry) {
            return soft_ellipsoid(p, {c + cx * s, c + cy * s, 0}, {rx * s, ry * s, 1}, width, 2);
        };
        const double head = blob(0, 0, 56, 60);
        const double skull = blob(0, 0, 51, 55);
        const double csf = blob(0, 0, 47, 51);
        // Gyri: radial modulation of the white matter outline; the cortex
        // follows it at constant thickness, leaving CSF in the sulci.
        const double theta = std::atan2(y, x);
        const double fold = 1.0 + 0.10 * std::sin(9.0 * theta) + 0.08 * std::sin(17.0 * theta + 0.7) +
                            0.05 * std::sin(29.0 * theta + 1.9);
        const double white = blob(0, 0, 33 * fold, 37 * fold);
        const double brain = blob(0, 0, 33 * fold + 3.5, 37 * fold + 3.5);
        const double fissure = std::abs(y) > 22 * s ? 1.0 / (1.0 + std::exp((std::abs(x) - s) / width)) : 0.0;
        const double ventricles = blob(-7, -4, 4, 13) + blob(7, -4, 4, 13);
        const double nuclei = blob(-17, 6, 5, 8) + blob(17, 6, 5, 8) + blob(-8, 16, 6, 5) + blob(8, 16, 6, 5);
        double v = t.background;
        v += head * (t.scalp - t.background);
        v += skull * (t.skull - t.scalp);
        v += csf * (t.csf - t.skull);
        v += (1.0 - fissure) * (brain * (t.grey - t.csf) + white * (t.white - t.grey));
        v += ventricles * (t.csf - t.white);
        v += nuclei * (t.nuclei - t.white);
        return v;
    };
}

inline ScalarVolume brain_slice(std::size_t n = 128, Weighting w = Weighting::T1) {
    return rasterize(brain_slice_field(n, w), GridGeometry::cube(2, n));
}

/// 3-D phantom: a soft body containing several organ-like ellipsoids of
/// distinct intensities plus `vessels` small bright spheres (radius 1.5 to
/// 3 mm, seeded positions) scattered through the body, so that a deformation
/// is observable everywhere inside it. Centred in a grid of `extent_mm`.
inline Field body_field(const Vec3& extent_mm, double body = 100.0, int vessels = 80, std::uint64_t seed = 77) {
    const Vec3 c = 0.5 * extent_mm;
    const Vec3 e = extent_mm;
    const Vec3 body_radius{0.40 * e[0], 0.36 * e[1], 0.40 * e[2]};
    struct Sphere {
        Vec3 center;
        double radius;
    };
    std::vector<Sphere> spheres;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (int(spheres.size()) < vessels) {
        const Vec3 p{u(rng) * e[0], u(rng) * e[1], u(rng) * e[2]};
        double q = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double d = (p[a] - c[a]) / (0.9 * body_radius[a]);
            q += d * d;
        }
        if (q < 1.0) spheres.push_back({p, 1.5 + 1.5 * u(rng)});
    }
    return [=](const Vec3& p) {
        const double w = 1.0;
        double v = body * soft_ellipsoid(p, c, body_radius, w, 3);
        v += 80.0 * soft_ellipsoid(p, c + Vec3{-0.15 * e[0], -0.08 * e[1], 0.05 * e[2]},
                                   {0.12 * e[0], 0.16 * e[1], 0.14 * e[2]}, w, 3);
        v -= 60.0 * soft_ellipsoid(p, c + Vec3{0.16 * e[0], 0.02 * e[1], -0.06 * e[2]},
                                   {0.11 * e[0], 0.09 * e[1], 0.17 * e[2]}, w, 3);
        v += 50.0 * soft_ellipsoid(p, c + Vec3{0.02 * e[0], 0.18 * e[1], 0.12 * e[2]},
                                   {0.09 * e[0], 0.07 * e[1], 0.08 * e[2]}, w, 3);
        v += 120.0 * soft_ellipsoid(p, c + Vec3{0.05 * e[0], -0.20 * e[1], -0.15 * e[2]},
                                    {0.06 * e[0], 0.06 * e[1], 0.06 * e[2]}, w, 3);
        v -= 40.0 * soft_ellipsoid(p, c + Vec3{-0.12 * e[0], 0.15 * e[1], -0.18 * e[2]},
                                   {0.07 * e[0], 0.05 * e[1], 0.05 * e[2]}, w, 3);
        v += 70.0 * soft_ellipsoid(p, c + Vec3{0.20 * e[0], -0.05 * e[1], 0.20 * e[2]},
                                   {0.05 * e[0], 0.08 * e[1], 0.05 * e[2]}, w, 3);
        for (const Sphere& s : spheres) {
            const Vec3 d = p - s.center;
            const double reach = s.radius + 4.0;
            if (dot(d, d) >= reach * reach) continue;  // logistic tail below 4e-4
            v += 60.0 * soft_ellipsoid(p, s.center, {s.radius, s.radius, s.radius}, 0.5, 3);
        }
        return v;
    };
}

inline Vec3 extent_of(const GridGeometry& g) {
    Vec3 e{0.0, 0.0, 0.0};
    for (int a = 0; a < g.ndim(); ++a) e[a] = double(g.dim(a) - 1) * g.spacing()[a];
    return e;
}

inline ScalarVolume body(const GridGeometry& g) { return rasterize(body_field(extent_of(g)), g); }

/// Smooth random B-spline deformation over `image` whose largest
/// displacement magnitude at the voxel centres is `max_displacement_voxels`
/// (in units of the smallest spacing).
inline BSplineTransform smooth_warp(const GridGeometry& image, double control_spacing_voxels,
                                    double max_displacement_voxels, std::uint64_t seed) {
    BSplineTransform t = BSplineTransform::covering(image, control_spacing_voxels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> p(t.parameter_count());
    for (double& x : p) x = u(rng);
    t.set_parameters(p);
    double peak = 0.0;
    for (std::size_t idx = 0; idx < image.voxel_count(); ++idx) {
        const Index3 v = image.unravel(idx);
        peak = std::max(peak, norm(t.displacement(image.voxel_to_physical(v[0], v[1], v[2]))));
    }
    const double scale = max_displacement_voxels * image.min_spacing() / peak;
    for (double& x : p) x *= scale;
    t.set_parameters(p);
    return t;
}

/// Solves t(x) = y for x by fixed-point iteration (valid for small,
/// smooth displacements).
inline Vec3 invert_point(const BSplineTransform& t, const Vec3& y, int iterations = 60) {
    Vec3 x = y;
    for (int i = 0; i < iterations; ++i) {
        const Vec3 next = y - t.displacement(x);
        const double change = norm(next - x);
        x = next;
        if (change < 1e-12) break;
    }
    return x;
}

/// Moving image for a known pull-back transform: J(y) = f(t^-1(y)), so that
/// J(t(x)) = f(x).
inline ScalarVolume warped_image(const Field& f, const BSplineTransform& t, const GridGeometry& g) {
    return rasterize([&](const Vec3& y) { return f(invert_point(t, y)); }, g);
}

}  // namespace vfs::phantom
