#pragma once

// Transform models mapping fixed-image physical points into moving-image
// physical points (pull-back convention): translation, affine, cubic B-spline
// free-form deformation, and ordered composites of those.

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/volume.hpp"

namespace vfs {

/// Cubic B-spline basis values for fractional position u in [0,1). The four
/// weights apply to control points floor(x)-1 .. floor(x)+2.
inline std::array<double, 4> bspline_weights(double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double v = 1.0 - u;
    return {v * v * v / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0, (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u3 / 6.0};
}

class Transform {
public:
    virtual ~Transform() = default;

    virtual std::string_view kind() const = 0;
    virtual int ndim() const = 0;
    virtual Vec3 apply(const Vec3& x) const = 0;
    virtual std::unique_ptr<Transform> clone() const = 0;

    virtual std::size_t parameter_count() const = 0;
    virtual std::vector<double> parameters() const = 0;
    virtual void set_parameters(std::span<const double> p) = 0;

    /// Millimetres of displacement produced by a unit change of each
    /// parameter over `grid`; the optimizer steps in these units.
    virtual std::vector<double> parameter_scales(const GridGeometry& grid) const {
        (void)grid;
        return std::vector<double>(parameter_count(), 1.0);
    }

    /// Sum over the voxels of `grid` of force(x) . dT(x)/dparameter.
    /// `forces` holds one vector per voxel of `grid`.
    virtual std::vector<double> parameter_gradient(const GridGeometry& grid, std::span<const Vec3> forces) const = 0;

    /// Mapped position of every voxel centre of `grid`.
    virtual std::vector<Vec3> apply_to_grid(const GridGeometry& grid) const {
        std::vector<Vec3> out(grid.voxel_count());
        for (std::size_t idx = 0; idx < out.size(); ++idx) {
            const Index3 v = grid.unravel(idx);
            out[idx] = apply(grid.voxel_to_physical(v[0], v[1], v[2]));
        }
        return out;
    }

protected:
    void check_count(std::span<const double> p) const {
        if (p.size() != parameter_count()) {
            throw ParameterError(std::string(kind()) + ": expected " + std::to_string(parameter_count()) +
                                 " parameters, got " + std::to_string(p.size()));
        }
        for (double v : p) {
            if (!std::isfinite(v)) throw ParameterError(std::string(kind()) + ": non-finite parameter");
        }
    }
};

using TransformPtr = std::unique_ptr<Transform>;

class TranslationTransform final : public Transform {
public:
    explicit TranslationTransform(int ndim, Vec3 offset = {0.0, 0.0, 0.0}) : ndim_(ndim), offset_(offset) {
        if (ndim != 2 && ndim != 3) throw ParameterError("translation: ndim must be 2 or 3");
        for (int a = ndim_; a < 3; ++a) offset_[a] = 0.0;
    }

    std::string_view kind() const override { return "translation"; }
    int ndim() const override { return ndim_; }
    const Vec3& offset() const { return offset_; }

    Vec3 apply(const Vec3& x) const override { return x + offset_; }
    TransformPtr clone() const override { return std::make_unique<TranslationTransform>(*this); }

    std::size_t parameter_count() const override { return std::size_t(ndim_); }
    std::vector<double> parameters() const override { return {offset_.begin(), offset_.begin() + ndim_}; }
    void set_parameters(std::span<const double> p) override {
        check_count(p);
        for (int a = 0; a < ndim_; ++a) offset_[a] = p[a];
    }

    std::vector<double> parameter_gradient(const GridGeometry& grid, std::span<const Vec3> forces) const override {
        (void)grid;
        std::vector<double> g(ndim_, 0.0);
        for (const Vec3& f : forces) {
            for (int a = 0; a < ndim_; ++a) g[a] += f[a];
        }
        return g;
    }

private:
    int ndim_;
    Vec3 offset_;
};

class AffineTransform final : public Transform {
public:
    using Matrix = std::array<Vec3, 3>;

    explicit AffineTransform(int ndim, Vec3 center = {0.0, 0.0, 0.0}) : ndim_(ndim), center_(center) {
        if (ndim != 2 && ndim != 3) throw ParameterError("affine: ndim must be 2 or 3");
        matrix_ = {Vec3{1.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}, Vec3{0.0, 0.0, 1.0}};
    }

    AffineTransform(int ndim, const Matrix& matrix, Vec3 offset, Vec3 center) : AffineTransform(ndim, center) {
        offset_ = offset;
        for (int r = 0; r < ndim_; ++r)
            for (int c = 0; c < ndim_; ++c) matrix_[r][c] = matrix[r][c];
        check_invertible();
    }

    std::string_view kind() const override { return "affine"; }
    int ndim() const override { return ndim_; }
    const Matrix& matrix() const { return matrix_; }
    const Vec3& offset() const { return offset_; }
    const Vec3& center() const { return center_; }

    Vec3 apply(const Vec3& x) const override {
        Vec3 y = x;
        for (int r = 0; r < ndim_; ++r) {
            double s = center_[r] + offset_[r];
            for (int c = 0; c < ndim_; ++c) s += matrix_[r][c] * (x[c] - center_[c]);
            y[r] = s;
        }
        return y;
    }

    TransformPtr clone() const override { return std::make_unique<AffineTransform>(*this); }

    // Layout: row-major matrix entries, then the offset.
    std::size_t parameter_count() const override { return std::size_t(ndim_ * ndim_ + ndim_); }

    std::vector<double> parameters() const override {
        std::vector<double> p;
        for (int r = 0; r < ndim_; ++r)
            for (int c = 0; c < ndim_; ++c) p.push_back(matrix_[r][c]);
        for (int a = 0; a < ndim_; ++a) p.push_back(offset_[a]);
        return p;
    }

    void set_parameters(std::span<const double> p) override {
        check_count(p);
        std::size_t i = 0;
        for (int r = 0; r < ndim_; ++r)
            for (int c = 0; c < ndim_; ++c) matrix_[r][c] = p[i++];
        for (int a = 0; a < ndim_; ++a) offset_[a] = p[i++];
        check_invertible();
    }

    std::vector<double> parameter_scales(const GridGeometry& grid) const override {
        // Matrix entries move points by up to their distance from the centre.
        double radius = 0.0;
        for (int a = 0; a < grid.ndim(); ++a) {
            const double half = 0.5 * double(grid.dim(a) - 1) * grid.spacing()[a];
            radius += half * half;
        }
        radius = std::max(std::sqrt(radius), 1.0);
        std::vector<double> s(parameter_count(), 1.0);
        for (int i = 0; i < ndim_ * ndim_; ++i) s[i] = radius;
        return s;
    }

    std::vector<double> parameter_gradient(const GridGeometry& grid, std::span<const Vec3> forces) const override {
        std::vector<double> g(parameter_count(), 0.0);
        for (std::size_t idx = 0; idx < forces.size(); ++idx) {
            const Index3 v = grid.unravel(idx);
            const Vec3 d = grid.voxel_to_physical(v[0], v[1], v[2]) - center_;
            const Vec3& f = forces[idx];
            for (int r = 0; r < ndim_; ++r) {
                for (int c = 0; c < ndim_; ++c) g[r * ndim_ + c] += f[r] * d[c];
                g[ndim_ * ndim_ + r] += f[r];
            }
        }
        return g;
    }

    double determinant() const {
        const auto& m = matrix_;
        if (ndim_ == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }

private:
    void check_invertible() const {
        if (determinant() == 0.0) throw ParameterError("affine: singular matrix");
    }

    int ndim_;
    Matrix matrix_;
    Vec3 offset_{0.0, 0.0, 0.0};
    Vec3 center_;
};

/// Cubic B-spline free-form deformation. Coefficients are millimetre
/// displacements at the control points, stored axis-major
/// (all x displacements, then all y, then all z).
class BSplineTransform final : public Transform {
public:
    explicit BSplineTransform(GridGeometry control_grid)
        : grid_(std::move(control_grid)),
          coefficients_(std::size_t(grid_.ndim()) * grid_.voxel_count(), 0.0) {
        for (int a = 0; a < grid_.ndim(); ++a) {
            if (grid_.dim(a) < 4) throw ParameterError("bspline: control grid needs >= 4 points per axis");
        }
    }

    /// Control grid covering `image` with `spacing_voxels` image voxels
    /// between control points. Two extra points on each side keep the
    /// displacement smooth up to one spacing outside the image, where later
    /// stages of a composite may evaluate it.
    static BSplineTransform covering(const GridGeometry& image, double spacing_voxels) {
        if (!(spacing_voxels > 0.0)) throw ParameterError("bspline: grid spacing must be > 0");
        std::vector<std::size_t> dims;
        std::vector<double> spacing, origin;
        for (int a = 0; a < image.ndim(); ++a) {
            const double s = spacing_voxels * image.spacing()[a];
            const double extent = double(image.dim(a) - 1) * image.spacing()[a];
            dims.push_back(static_cast<std::size_t>(std::floor(extent / s + 1e-9)) + 6);
            spacing.push_back(s);
            origin.push_back(image.origin()[a] - 2.0 * s);
        }
        return BSplineTransform(GridGeometry(dims, spacing, origin));
    }

    std::string_view kind() const override { return "bspline"; }
    int ndim() const override { return grid_.ndim(); }
    const GridGeometry& control_grid() const { return grid_; }
    const std::vector<double>& coefficients() const { return coefficients_; }

    Vec3 displacement(const Vec3& x) const {
        Vec3 disp{0.0, 0.0, 0.0};
        std::array<std::size_t, 3> base{0, 0, 0};
        std::array<std::array<double, 4>, 3> w{};
        if (!support(x, base, w)) return disp;
        const std::size_t count = grid_.voxel_count();
        const int nk = ndim() == 3 ? 4 : 1;
        for (int kk = 0; kk < nk; ++kk) {
            const double wz = ndim() == 3 ? w[2][kk] : 1.0;
            for (int jj = 0; jj < 4; ++jj) {
                const double wyz = wz * w[1][jj];
                for (int ii = 0; ii < 4; ++ii) {
                    const double ww = wyz * w[0][ii];
                    const std::size_t cp = grid_.linear(base[0] + ii, base[1] + jj, ndim() == 3 ? base[2] + kk : 0);
                    for (int a = 0; a < ndim(); ++a) disp[a] += ww * coefficients_[a * count + cp];
                }
            }
        }
        return disp;
    }

    Vec3 apply(const Vec3& x) const override { return x + displacement(x); }

    TransformPtr clone() const override { return std::make_unique<BSplineTransform>(*this); }

    std::size_t parameter_count() const override { return coefficients_.size(); }
    std::vector<double> parameters() const override { return coefficients_; }
    void set_parameters(std::span<const double> p) override {
        check_count(p);
        coefficients_.assign(p.begin(), p.end());
    }

    std::vector<Vec3> apply_to_grid(const GridGeometry& image) const override {
        const auto axes = axis_supports(image);
        const std::size_t count = grid_.voxel_count();
        std::vector<Vec3> out(image.voxel_count());
        for (std::size_t idx = 0; idx < out.size(); ++idx) {
            const Index3 v = image.unravel(idx);
            out[idx] = image.voxel_to_physical(v[0], v[1], v[2]);
        }
        for (int a = 0; a < ndim(); ++a) {
            const std::span<const double> c(coefficients_.data() + a * count, count);
            const std::vector<double> d = separable_evaluate(image, axes, c);
            for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx][a] += d[idx];
        }
        return out;
    }

    std::vector<double> parameter_gradient(const GridGeometry& image, std::span<const Vec3> forces) const override {
        const auto axes = axis_supports(image);
        const std::size_t count = grid_.voxel_count();
        std::vector<double> g(coefficients_.size(), 0.0);
        std::vector<double> f(image.voxel_count());
        for (int a = 0; a < ndim(); ++a) {
            for (std::size_t idx = 0; idx < f.size(); ++idx) f[idx] = forces[idx][a];
            const std::vector<double> ga = separable_adjoint(image, axes, f);
            std::copy(ga.begin(), ga.end(), g.begin() + a * count);
        }
        return g;
    }

private:
    bool support(const Vec3& x, std::array<std::size_t, 3>& base, std::array<std::array<double, 4>, 3>& w) const {
        for (int a = 0; a < ndim(); ++a) {
            const double u = (x[a] - grid_.origin()[a]) / grid_.spacing()[a];
            const double f = std::floor(u);
            const double start = f - 1.0;
            if (!(start >= 0.0) || start + 3.0 > double(grid_.dim(a) - 1)) return false;
            base[a] = static_cast<std::size_t>(start);
            w[a] = bspline_weights(u - f);
        }
        return true;
    }

    struct AxisSupport {
        bool valid = false;
        std::size_t base = 0;
        std::array<double, 4> w{};
    };
    using AxisSupports = std::array<std::vector<AxisSupport>, 3>;

    // Control points and weights for every voxel coordinate of `image` along
    // each axis. Unused axes (2-D) get a single valid tap.
    AxisSupports axis_supports(const GridGeometry& image) const {
        AxisSupports axes;
        for (int a = 0; a < 3; ++a) {
            axes[a].resize(image.dim(a));
            for (std::size_t i = 0; i < image.dim(a); ++i) {
                AxisSupport& s = axes[a][i];
                if (a >= ndim()) {
                    s.valid = true;
                    s.w = {1.0, 0.0, 0.0, 0.0};
                    continue;
                }
                const double x = image.origin()[a] + double(i) * image.spacing()[a];
                const double u = (x - grid_.origin()[a]) / grid_.spacing()[a];
                const double f = std::floor(u);
                const double start = f - 1.0;
                if (!(start >= 0.0) || start + 3.0 > double(grid_.dim(a) - 1)) continue;
                s.valid = true;
                s.base = static_cast<std::size_t>(start);
                s.w = bspline_weights(u - f);
            }
        }
        return axes;
    }

    int taps(int a) const { return a < ndim() ? 4 : 1; }

    // Tensor-product spline of one coefficient component at the voxel
    // centres of `image`, one axis at a time. Voxels outside the valid
    // region get zero.
    std::vector<double> separable_evaluate(const GridGeometry& image, const AxisSupports& axes,
                                           std::span<const double> c) const {
        const auto& n = image.dims();
        const auto& m = grid_.dims();
        // x: (cx, cy, cz) -> (i, cy, cz)
        std::vector<double> t1(n[0] * m[1] * m[2], 0.0);
        for (std::size_t r = 0; r < m[1] * m[2]; ++r) {
            for (std::size_t i = 0; i < n[0]; ++i) {
                const AxisSupport& s = axes[0][i];
                if (!s.valid) continue;
                double v = 0.0;
                for (int q = 0; q < taps(0); ++q) v += s.w[q] * c[r * m[0] + s.base + q];
                t1[r * n[0] + i] = v;
            }
        }
        // y: (i, cy, cz) -> (i, j, cz)
        std::vector<double> t2(n[0] * n[1] * m[2], 0.0);
        for (std::size_t cz = 0; cz < m[2]; ++cz) {
            for (std::size_t j = 0; j < n[1]; ++j) {
                const AxisSupport& s = axes[1][j];
                if (!s.valid) continue;
                double* dst = &t2[(cz * n[1] + j) * n[0]];
                for (int q = 0; q < taps(1); ++q) {
                    const double* src = &t1[(cz * m[1] + s.base + q) * n[0]];
                    for (std::size_t i = 0; i < n[0]; ++i) dst[i] += s.w[q] * src[i];
                }
            }
        }
        // z: (i, j, cz) -> (i, j, k)
        std::vector<double> out(n[0] * n[1] * n[2], 0.0);
        const std::size_t plane = n[0] * n[1];
        for (std::size_t k = 0; k < n[2]; ++k) {
            const AxisSupport& s = axes[2][k];
            if (!s.valid) continue;
            double* dst = &out[k * plane];
            for (int q = 0; q < taps(2); ++q) {
                const double* src = &t2[(s.base + q) * plane];
                for (std::size_t i = 0; i < plane; ++i) dst[i] += s.w[q] * src[i];
            }
        }
        return out;
    }

    // Transpose of separable_evaluate.
    std::vector<double> separable_adjoint(const GridGeometry& image, const AxisSupports& axes,
                                          const std::vector<double>& f) const {
        const auto& n = image.dims();
        const auto& m = grid_.dims();
        const std::size_t plane = n[0] * n[1];
        std::vector<double> t2(plane * m[2], 0.0);
        for (std::size_t k = 0; k < n[2]; ++k) {
            const AxisSupport& s = axes[2][k];
            if (!s.valid) continue;
            const double* src = &f[k * plane];
            for (int q = 0; q < taps(2); ++q) {
                double* dst = &t2[(s.base + q) * plane];
                for (std::size_t i = 0; i < plane; ++i) dst[i] += s.w[q] * src[i];
            }
        }
        std::vector<double> t1(n[0] * m[1] * m[2], 0.0);
        for (std::size_t cz = 0; cz < m[2]; ++cz) {
            for (std::size_t j = 0; j < n[1]; ++j) {
                const AxisSupport& s = axes[1][j];
                if (!s.valid) continue;
                const double* src = &t2[(cz * n[1] + j) * n[0]];
                for (int q = 0; q < taps(1); ++q) {
                    double* dst = &t1[(cz * m[1] + s.base + q) * n[0]];
                    for (std::size_t i = 0; i < n[0]; ++i) dst[i] += s.w[q] * src[i];
                }
            }
        }
        std::vector<double> g(m[0] * m[1] * m[2], 0.0);
        for (std::size_t r = 0; r < m[1] * m[2]; ++r) {
            for (std::size_t i = 0; i < n[0]; ++i) {
                const AxisSupport& s = axes[0][i];
                if (!s.valid) continue;
                const double v = t1[r * n[0] + i];
                for (int q = 0; q < taps(0); ++q) g[r * m[0] + s.base + q] += s.w[q] * v;
            }
        }
        return g;
    }

    GridGeometry grid_;
    std::vector<double> coefficients_;
};

/// Ordered list of transforms applied last-to-first:
/// apply([a, b], x) == a.apply(b.apply(x)).
class CompositeTransform final : public Transform {
public:
    CompositeTransform() = default;

    CompositeTransform(const CompositeTransform& o) {
        for (const auto& t : o.items_) items_.push_back(t->clone());
    }
    CompositeTransform& operator=(const CompositeTransform& o) {
        if (this != &o) {
            CompositeTransform tmp(o);
            items_ = std::move(tmp.items_);
        }
        return *this;
    }
    CompositeTransform(CompositeTransform&&) = default;
    CompositeTransform& operator=(CompositeTransform&&) = default;

    void append(const Transform& t) {
        if (!items_.empty() && t.ndim() != ndim()) throw ParameterError("composite: dimensionality mismatch");
        items_.push_back(t.clone());
    }

    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    const Transform& at(std::size_t i) const { return *items_.at(i); }

    std::string_view kind() const override { return "composite"; }
    int ndim() const override { return items_.empty() ? 3 : items_.front()->ndim(); }

    Vec3 apply(const Vec3& x) const override {
        Vec3 y = x;
        for (auto it = items_.rbegin(); it != items_.rend(); ++it) y = (*it)->apply(y);
        return y;
    }

    TransformPtr clone() const override { return std::make_unique<CompositeTransform>(*this); }

    std::size_t parameter_count() const override {
        std::size_t n = 0;
        for (const auto& t : items_) n += t->parameter_count();
        return n;
    }

    std::vector<double> parameters() const override {
        std::vector<double> p;
        for (const auto& t : items_) {
            const auto q = t->parameters();
            p.insert(p.end(), q.begin(), q.end());
        }
        return p;
    }

    void set_parameters(std::span<const double> p) override {
        check_count(p);
        std::size_t off = 0;
        for (auto& t : items_) {
            const std::size_t n = t->parameter_count();
            t->set_parameters(p.subspan(off, n));
            off += n;
        }
    }

    std::vector<double> parameter_gradient(const GridGeometry&, std::span<const Vec3>) const override {
        throw ParameterError("composite: parameter gradient is only defined for single transforms");
    }

private:
    std::vector<TransformPtr> items_;
};

/// compose(a, b) applies b first, then a.
inline CompositeTransform compose(const Transform& a, const Transform& b) {
    CompositeTransform c;
    c.append(a);
    c.append(b);
    return c;
}

}  // namespace vfs
