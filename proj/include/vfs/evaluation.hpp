#pragma once

// Registration evaluation: landmark TRE, label Dice, and whole-voxel
// translation profiles with basin (local minima / capture range) analysis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/metrics.hpp"
#include "vfs/representations.hpp"
#include "vfs/transforms.hpp"
#include "vfs/volume.hpp"

namespace vfs {

/// Points in (possibly fractional) voxel indices of `geometry`.
struct LandmarkSet {
    std::vector<Vec3> points;
    GridGeometry geometry;

    Vec3 physical(std::size_t i) const { return geometry.index_to_physical(points.at(i)); }
    std::size_t size() const { return points.size(); }
};

struct TreResult {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::vector<double> per_point;
};

/// Distance in mm between t(fixed landmark) and the paired moving landmark.
inline TreResult tre(const LandmarkSet& fixed, const LandmarkSet& moving, const Transform& t) {
    if (fixed.size() != moving.size()) {
        throw GeometryError("tre: landmark count mismatch (" + std::to_string(fixed.size()) + " vs " +
                             std::to_string(moving.size()) + ")");
    }
    TreResult r;
    if (fixed.size() == 0) return r;
    r.per_point.reserve(fixed.size());
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        const Vec3 mapped = t.apply(fixed.physical(i));
        const double d = norm(mapped - moving.physical(i));
        if (!std::isfinite(d)) throw ParameterError("tre: non-finite landmark");
        r.per_point.push_back(d);
    }
    double s = 0.0;
    for (double d : r.per_point) s += d;
    r.mean = s / double(r.per_point.size());
    double v = 0.0;
    for (double d : r.per_point) v += (d - r.mean) * (d - r.mean);
    r.std = std::sqrt(v / double(r.per_point.size()));
    return r;
}

/// 2|A n B| / (|A| + |B|) for one label.
inline double dice(const LabelVolume& a, const LabelVolume& b, LabelVolume::Label label) {
    require_same_geometry(a.geometry(), b.geometry(), "dice");
    if (label == 0) throw ParameterError("dice: label 0 is background");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ia = a[i] == label;
        const bool ib = b[i] == label;
        na += ia;
        nb += ib;
        both += ia && ib;
    }
    if (na + nb == 0) throw UndefinedMetricError("dice: label " + std::to_string(label) + " absent from both volumes");
    return 2.0 * double(both) / double(na + nb);
}

/// Nearest-neighbour pull-back of a label volume onto `out_geom`; label 0
/// outside the source grid.
inline LabelVolume warp_labels(const LabelVolume& l, const Transform& t, const GridGeometry& out_geom) {
    const GridGeometry& g = l.geometry();
    LabelVolume out(out_geom);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        const Index3 v = out_geom.unravel(idx);
        const Vec3 p = g.physical_to_index(t.apply(out_geom.voxel_to_physical(v[0], v[1], v[2])));
        Index3 q{0, 0, 0};
        bool inside = true;
        for (int a = 0; a < g.ndim(); ++a) {
            const double r = std::round(p[a]);
            if (r < 0.0 || r > double(g.dim(a) - 1)) {
                inside = false;
                break;
            }
            q[a] = std::size_t(r);
        }
        if (inside) out[idx] = l[g.linear(q[0], q[1], q[2])];
    }
    return out;
}

/// Mean distance between two transforms over the voxels of `grid` (all of
/// them, or those with a nonzero mask label), in units of the smallest
/// voxel spacing.
inline double mean_displacement_error(const Transform& a, const Transform& b, const GridGeometry& grid,
                                      const LabelVolume* mask = nullptr) {
    if (mask) require_same_geometry(mask->geometry(), grid, "mean_displacement_error");
    const auto pa = a.apply_to_grid(grid);
    const auto pb = b.apply_to_grid(grid);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
        if (mask && (*mask)[i] == 0) continue;
        sum += norm(pa[i] - pb[i]);
        ++n;
    }
    if (n == 0) throw UndefinedMetricError("mean_displacement_error: empty region");
    return sum / double(n) / grid.min_spacing();
}

/// Additive Gaussian noise with sigma = percent/100 of the dynamic range.
inline ScalarVolume add_gaussian_noise(const ScalarVolume& v, double percent, std::uint64_t seed) {
    if (percent < 0.0) throw ParameterError("noise level must be >= 0");
    ScalarVolume out = v;
    if (percent == 0.0) return out;
    const double sigma = percent / 100.0 * (v.max() - v.min());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    for (double& x : out.values()) x += n(rng);
    return out;
}

struct SimilarityProfile {
    int axis = 0;
    std::vector<int> shifts;      // voxels, strictly increasing
    std::vector<double> values;   // minimise orientation
    // metadata
    std::string metric;
    std::string representation;
    double gamma = 0.0;
    double noise_percent = 0.0;
    std::uint64_t seed = 0;
    std::size_t support_voxels = 0;
};

struct ProfileConfig {
    RepresentationConfig representation;
    MetricKind metric = MetricKind::MeanDotProduct;
    int axis = 1;
    int min_shift = -30;
    int max_shift = 30;
    int bins = kDefaultHistogramBins;
};

/// Metric of fixed(x) against moving(x + s e_axis) for every whole-voxel
/// shift s. Both representations are computed once; every shift is scored on
/// the same support (voxels whose partner stays inside the grid for all
/// shifts).
inline SimilarityProfile translation_profile(const ScalarVolume& fixed, const ScalarVolume& moving,
                                             const ProfileConfig& cfg) {
    require_same_geometry(fixed.geometry(), moving.geometry(), "translation_profile");
    const GridGeometry& g = fixed.geometry();
    if (cfg.axis < 0 || cfg.axis >= g.ndim()) throw ParameterError("translation_profile: invalid axis");
    if (cfg.min_shift > cfg.max_shift) throw ParameterError("translation_profile: empty shift range");
    const long n = long(g.dim(cfg.axis));
    const long lo = std::max(0L, -long(cfg.min_shift));
    const long hi = std::min(n - 1, n - 1 - long(cfg.max_shift));
    if (lo > hi) throw UndefinedMetricError("translation_profile: shift range leaves no common support");

    const auto fixed_ch = representation_channels(fixed, cfg.representation);
    const auto moving_ch = representation_channels(moving, cfg.representation);

    std::vector<std::size_t> dims(g.dims().begin(), g.dims().begin() + g.ndim());
    dims[cfg.axis] = std::size_t(hi - lo + 1);
    const GridGeometry support(dims);
    const std::size_t count = support.voxel_count();
    std::vector<std::size_t> voxels(count);
    for (std::size_t i = 0; i < count; ++i) voxels[i] = i;

    auto crop = [&](const ScalarVolume& src, long shift) {
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            Index3 p = support.unravel(i);
            p[cfg.axis] = std::size_t(long(p[cfg.axis]) + lo + shift);
            out[i] = src.at(p[0], p[1], p[2]);
        }
        return out;
    };

    std::vector<std::vector<double>> fcrop;
    for (const auto& c : fixed_ch) fcrop.push_back(crop(c, 0));
    std::vector<const std::vector<double>*> fptr;
    for (const auto& c : fcrop) fptr.push_back(&c);

    ChannelMetricOptions opt{cfg.metric};
    opt.bins = cfg.bins;

    SimilarityProfile p;
    p.axis = cfg.axis;
    p.metric = to_string(cfg.metric);
    p.representation = to_string(cfg.representation.kind);
    p.gamma = cfg.representation.kind == RepresentationKind::Vfc ? cfg.representation.gamma : 0.0;
    p.support_voxels = count;
    for (int s = cfg.min_shift; s <= cfg.max_shift; ++s) {
        std::vector<std::vector<double>> mcrop;
        for (const auto& c : moving_ch) mcrop.push_back(crop(c, s));
        std::vector<const std::vector<double>*> mptr;
        for (const auto& c : mcrop) mptr.push_back(&c);
        p.shifts.push_back(s);
        p.values.push_back(evaluate_channels(fptr, mptr, voxels, opt));
    }
    return p;
}

struct BasinReport {
    int global_min_shift = 0;
    int local_minima_count = 1;
    int capture_range = 0;     // voxels
    int capture_left = 0;      // shift where the monotone basin starts
    int capture_right = 0;     // shift where it ends
};

/// Local minima are runs of equal samples strictly below both neighbours
/// (a run at either end of the profile counts only if it holds the global
/// minimum). The capture range is the widest interval around the global
/// minimum over which the profile never decreases moving away from it.
inline BasinReport basin_analysis(const SimilarityProfile& p) {
    const std::size_t n = p.values.size();
    if (n < 5 || p.shifts.size() != n) throw ParameterError("basin_analysis: need at least 5 samples");
    const auto& v = p.values;
    const std::size_t g = std::size_t(std::min_element(v.begin(), v.end()) - v.begin());

    BasinReport r;
    r.global_min_shift = p.shifts[g];
    std::size_t left = g;
    while (left > 0 && v[left - 1] >= v[left]) --left;
    std::size_t right = g;
    while (right + 1 < n && v[right + 1] >= v[right]) ++right;
    r.capture_left = p.shifts[left];
    r.capture_right = p.shifts[right];
    r.capture_range = p.shifts[right] - p.shifts[left];

    int count = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i]) ++j;
        const bool has_left = i > 0;
        const bool has_right = j + 1 < n;
        const bool below_left = !has_left || v[i - 1] > v[i];
        const bool below_right = !has_right || v[j + 1] > v[i];
        if (below_left && below_right) {
            if (has_left && has_right) {
                ++count;
            } else if (g >= i && g <= j) {
                ++count;
            }
        }
        i = j + 1;
    }
    r.local_minima_count = std::max(count, 1);
    return r;
}

}  // namespace vfs
