#pragma once

// Regular-grid geometry and the scalar, vector and label volumes built on it.
//
// Volumes always carry three axes internally. A 2-D grid has ndim == 2 and a
// trailing axis of size 1 (spacing 1, origin 0) which every algorithm ignores.
// Voxels are stored x-fastest, matching the MetaImage raw layout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vfs/error.hpp"

namespace vfs {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<std::size_t, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

class GridGeometry {
public:
    GridGeometry() = default;

    /// dims/spacing/origin carry one entry per axis (2 or 3 entries). Empty
    /// spacing means 1 mm, empty origin means 0.
    GridGeometry(std::vector<std::size_t> dims, std::vector<double> spacing = {}, std::vector<double> origin = {}) {
        if (dims.size() != 2 && dims.size() != 3) {
            throw GeometryError("grid must have 2 or 3 axes, got " + std::to_string(dims.size()));
        }
        if (spacing.empty()) spacing.assign(dims.size(), 1.0);
        if (origin.empty()) origin.assign(dims.size(), 0.0);
        if (spacing.size() != dims.size() || origin.size() != dims.size()) {
            throw GeometryError("dims, spacing and origin must have the same number of axes");
        }
        ndim_ = static_cast<int>(dims.size());
        for (int a = 0; a < ndim_; ++a) {
            if (dims[a] < 1) throw GeometryError("grid dimension must be >= 1");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
                throw GeometryError("grid spacing must be finite and > 0");
            }
            if (!std::isfinite(origin[a])) throw GeometryError("grid origin must be finite");
            dims_[a] = dims[a];
            spacing_[a] = spacing[a];
            origin_[a] = origin[a];
        }
    }

    static GridGeometry cube(int ndim, std::size_t size, double spacing = 1.0) {
        return GridGeometry(std::vector<std::size_t>(ndim, size), std::vector<double>(ndim, spacing));
    }

    int ndim() const { return ndim_; }
    const Index3& dims() const { return dims_; }
    const Vec3& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    std::size_t dim(int axis) const { return dims_[axis]; }

    std::size_t voxel_count() const { return dims_[0] * dims_[1] * dims_[2]; }

    std::size_t linear(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return i + dims_[0] * (j + dims_[1] * k);
    }

    Index3 unravel(std::size_t idx) const {
        Index3 r;
        r[0] = idx % dims_[0];
        idx /= dims_[0];
        r[1] = idx % dims_[1];
        r[2] = idx / dims_[1];
        return r;
    }

    Vec3 index_to_physical(const Vec3& index) const {
        Vec3 p{0.0, 0.0, 0.0};
        for (int a = 0; a < ndim_; ++a) p[a] = origin_[a] + index[a] * spacing_[a];
        return p;
    }

    Vec3 voxel_to_physical(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return index_to_physical({double(i), double(j), double(k)});
    }

    Vec3 physical_to_index(const Vec3& p) const {
        Vec3 u{0.0, 0.0, 0.0};
        for (int a = 0; a < ndim_; ++a) u[a] = (p[a] - origin_[a]) / spacing_[a];
        return u;
    }

    /// Physical centre of the grid.
    Vec3 center() const {
        Vec3 c{0.0, 0.0, 0.0};
        for (int a = 0; a < ndim_; ++a) c[a] = origin_[a] + 0.5 * double(dims_[a] - 1) * spacing_[a];
        return c;
    }

    double min_spacing() const {
        double s = spacing_[0];
        for (int a = 1; a < ndim_; ++a) s = std::min(s, spacing_[a]);
        return s;
    }

    bool operator==(const GridGeometry& o) const {
        return ndim_ == o.ndim_ && dims_ == o.dims_ && spacing_ == o.spacing_ && origin_ == o.origin_;
    }
    bool operator!=(const GridGeometry& o) const { return !(*this == o); }

    std::string describe() const {
        std::ostringstream s;
        s << "dims=(";
        for (int a = 0; a < ndim_; ++a) s << (a ? "," : "") << dims_[a];
        s << ") spacing=(";
        for (int a = 0; a < ndim_; ++a) s << (a ? "," : "") << spacing_[a];
        s << ")";
        return s.str();
    }

private:
    int ndim_ = 3;
    Index3 dims_{1, 1, 1};
    Vec3 spacing_{1.0, 1.0, 1.0};
    Vec3 origin_{0.0, 0.0, 0.0};
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const char* what) {
    if (a != b) {
        throw GeometryError(std::string(what) + ": geometry mismatch (" + a.describe() + " vs " + b.describe() + ")");
    }
}

class ScalarVolume {
public:
    ScalarVolume() = default;

    explicit ScalarVolume(GridGeometry geometry, double fill = 0.0)
        : geometry_(std::move(geometry)), values_(geometry_.voxel_count(), fill) {
        if (!std::isfinite(fill)) throw ParameterError("volume fill value must be finite");
    }

    ScalarVolume(GridGeometry geometry, std::vector<double> values)
        : geometry_(std::move(geometry)), values_(std::move(values)) {
        if (values_.size() != geometry_.voxel_count()) {
            throw GeometryError("value count " + std::to_string(values_.size()) + " does not match grid " +
                                geometry_.describe());
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw ParameterError("volume values must be finite");
        }
    }

    const GridGeometry& geometry() const { return geometry_; }
    std::size_t size() const { return values_.size(); }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double operator[](std::size_t idx) const { return values_[idx]; }
    double& operator[](std::size_t idx) { return values_[idx]; }

    double at(std::size_t i, std::size_t j, std::size_t k = 0) const { return values_[geometry_.linear(i, j, k)]; }
    double& at(std::size_t i, std::size_t j, std::size_t k = 0) { return values_[geometry_.linear(i, j, k)]; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

private:
    GridGeometry geometry_;
    std::vector<double> values_;
};

/// One n-vector per voxel, stored as n planar component volumes.
class VectorField {
public:
    VectorField() = default;

    explicit VectorField(const GridGeometry& geometry) : geometry_(geometry) {
        components_.assign(geometry.ndim(), ScalarVolume(geometry));
    }

    VectorField(const GridGeometry& geometry, std::vector<ScalarVolume> components)
        : geometry_(geometry), components_(std::move(components)) {
        if (static_cast<int>(components_.size()) != geometry.ndim()) {
            throw GeometryError("vector field needs one component per axis");
        }
        for (const auto& c : components_) require_same_geometry(c.geometry(), geometry, "vector field component");
    }

    const GridGeometry& geometry() const { return geometry_; }
    int ncomponents() const { return static_cast<int>(components_.size()); }
    std::size_t size() const { return geometry_.voxel_count(); }

    const ScalarVolume& component(int i) const { return components_.at(i); }
    ScalarVolume& component(int i) { return components_.at(i); }
    const std::vector<ScalarVolume>& components() const { return components_; }

    Vec3 vector(std::size_t idx) const {
        Vec3 v{0.0, 0.0, 0.0};
        for (int c = 0; c < ncomponents(); ++c) v[c] = components_[c][idx];
        return v;
    }

    void set_vector(std::size_t idx, const Vec3& v) {
        for (int c = 0; c < ncomponents(); ++c) components_[c][idx] = v[c];
    }

    double magnitude(std::size_t idx) const { return norm(vector(idx)); }

    double max_magnitude() const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i) m = std::max(m, magnitude(i));
        return m;
    }

private:
    GridGeometry geometry_;
    std::vector<ScalarVolume> components_;
};

/// Integer labels; 0 is background. Also used as a binary mask (label != 0).
class LabelVolume {
public:
    using Label = std::uint32_t;

    LabelVolume() = default;

    explicit LabelVolume(GridGeometry geometry, Label fill = 0)
        : geometry_(std::move(geometry)), labels_(geometry_.voxel_count(), fill) {}

    LabelVolume(GridGeometry geometry, std::vector<Label> labels)
        : geometry_(std::move(geometry)), labels_(std::move(labels)) {
        if (labels_.size() != geometry_.voxel_count()) {
            throw GeometryError("label count does not match grid " + geometry_.describe());
        }
    }

    const GridGeometry& geometry() const { return geometry_; }
    std::size_t size() const { return labels_.size(); }

    const std::vector<Label>& labels() const { return labels_; }
    std::vector<Label>& labels() { return labels_; }

    Label operator[](std::size_t idx) const { return labels_[idx]; }
    Label& operator[](std::size_t idx) { return labels_[idx]; }

    bool inside(std::size_t idx) const { return labels_[idx] != 0; }

    std::size_t count_nonzero() const {
        return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](Label l) { return l != 0; }));
    }

private:
    GridGeometry geometry_;
    std::vector<Label> labels_;
};

}  // namespace vfs
