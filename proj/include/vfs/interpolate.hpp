#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "vfs/volume.hpp"

namespace vfs {

/// Multilinear interpolation stencil at one physical point. Weights are shared
/// by every channel sampled on the same grid.
struct LinearStencil {
    bool inside = false;
    int count = 0;
    std::array<std::size_t, 8> index{};
    std::array<double, 8> weight{};
    std::array<Vec3, 8> dweight{};  // d(weight)/d(physical coordinate)
};

// Points within this fraction of a voxel outside the grid snap onto the border.
inline constexpr double kBorderTolerance = 1e-6;

/// Outside the grid a stencil is either empty (the caller's fill value) or
/// clamped to the nearest border voxel, which keeps sampled values continuous
/// in the point position.
enum class Boundary { Fill, Clamp };

inline LinearStencil make_stencil(const GridGeometry& g, const Vec3& p, Boundary boundary = Boundary::Fill) {
    LinearStencil st;
    std::array<std::size_t, 2> idx[3];
    std::array<double, 2> w[3];
    std::array<double, 2> dw[3];
    int n[3];
    for (int a = 0; a < 3; ++a) {
        if (a >= g.ndim()) {
            idx[a] = {0, 0};
            w[a] = {1.0, 0.0};
            dw[a] = {0.0, 0.0};
            n[a] = 1;
            continue;
        }
        const double size = double(g.dim(a));
        double u = (p[a] - g.origin()[a]) / g.spacing()[a];
        bool clamped = false;
        if (!(u >= -kBorderTolerance && u <= size - 1.0 + kBorderTolerance)) {
            if (boundary == Boundary::Fill || std::isnan(u)) return st;
            clamped = true;
        }
        if (g.dim(a) == 1) {
            idx[a] = {0, 0};
            w[a] = {1.0, 0.0};
            dw[a] = {0.0, 0.0};
            n[a] = 1;
            continue;
        }
        u = std::clamp(u, 0.0, size - 1.0);
        std::size_t i0 = static_cast<std::size_t>(std::floor(u));
        if (i0 > g.dim(a) - 2) i0 = g.dim(a) - 2;
        const double t = u - double(i0);
        idx[a] = {i0, i0 + 1};
        w[a] = {1.0 - t, t};
        const double inv = 1.0 / g.spacing()[a];
        dw[a] = clamped ? std::array<double, 2>{0.0, 0.0} : std::array<double, 2>{-inv, inv};
        n[a] = 2;
    }
    st.inside = true;
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                const int s = st.count++;
                st.index[s] = g.linear(idx[0][i], idx[1][j], idx[2][k]);
                st.weight[s] = w[0][i] * w[1][j] * w[2][k];
                st.dweight[s] = {dw[0][i] * w[1][j] * w[2][k], w[0][i] * dw[1][j] * w[2][k],
                                 w[0][i] * w[1][j] * dw[2][k]};
            }
        }
    }
    return st;
}

inline double apply_stencil(const LinearStencil& st, const std::vector<double>& values, double fill) {
    if (!st.inside) return fill;
    double v = 0.0;
    for (int s = 0; s < st.count; ++s) v += st.weight[s] * values[st.index[s]];
    return v;
}

inline Vec3 apply_stencil_gradient(const LinearStencil& st, const std::vector<double>& values) {
    Vec3 g{0.0, 0.0, 0.0};
    if (!st.inside) return g;
    for (int s = 0; s < st.count; ++s) {
        const double v = values[st.index[s]];
        g[0] += st.dweight[s][0] * v;
        g[1] += st.dweight[s][1] * v;
        g[2] += st.dweight[s][2] * v;
    }
    return g;
}

/// Multilinear interpolation at a physical point; `fill` outside the grid.
inline double sample_linear(const ScalarVolume& v, const Vec3& point, double fill = 0.0) {
    return apply_stencil(make_stencil(v.geometry(), point), v.values(), fill);
}

}  // namespace vfs
