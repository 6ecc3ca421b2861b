#pragma once

// Similarity metrics on scalar volumes and vector fields.
//
// Every metric is implemented once over a list of voxel indices so that the
// public volume-level functions, the component-averaged field metric and the
// registration objective share the same arithmetic. The "oriented" value is
// the one to minimise: maximise-type metrics are negated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/volume.hpp"

namespace vfs {

enum class Orientation { Maximize, Minimize };

struct MetricValue {
    double value = 0.0;
    Orientation orientation = Orientation::Minimize;

    double oriented() const { return orientation == Orientation::Minimize ? value : -value; }
};

enum class MetricKind { Ssd, Ncc, Nmi, MeanDotProduct };

inline std::string to_string(MetricKind k) {
    switch (k) {
        case MetricKind::Ssd: return "ssd";
        case MetricKind::Ncc: return "ncc";
        case MetricKind::Nmi: return "nmi";
        case MetricKind::MeanDotProduct: return "mean_dot_product";
    }
    return "?";
}

inline MetricKind parse_metric(const std::string& s) {
    if (s == "ssd") return MetricKind::Ssd;
    if (s == "ncc") return MetricKind::Ncc;
    if (s == "nmi") return MetricKind::Nmi;
    if (s == "mean_dot_product" || s == "mdp") return MetricKind::MeanDotProduct;
    throw ParameterError("unknown metric '" + s + "' (expected ssd, ncc, nmi or mean_dot_product)");
}

inline Orientation orientation_of(MetricKind k) {
    return (k == MetricKind::Ncc || k == MetricKind::Nmi) ? Orientation::Maximize : Orientation::Minimize;
}

inline constexpr int kDefaultHistogramBins = 32;

/// Voxels taking part in a metric: all of them, or the nonzero mask voxels.
inline std::vector<std::size_t> selected_voxels(const GridGeometry& g, const LabelVolume* mask) {
    std::vector<std::size_t> out;
    if (mask != nullptr) {
        require_same_geometry(mask->geometry(), g, "metric mask");
        for (std::size_t i = 0; i < mask->size(); ++i)
            if (mask->inside(i)) out.push_back(i);
    } else {
        out.resize(g.voxel_count());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    }
    if (out.empty()) throw UndefinedMetricError("metric: empty mask");
    return out;
}

struct IntensityRange {
    double lo = 0.0;
    double hi = 0.0;
};

inline IntensityRange range_of(const std::vector<double>& v, std::span<const std::size_t> voxels) {
    IntensityRange r{v[voxels[0]], v[voxels[0]]};
    for (std::size_t i : voxels) {
        r.lo = std::min(r.lo, v[i]);
        r.hi = std::max(r.hi, v[i]);
    }
    return r;
}

/// Joint intensity histogram with linear (partial volume) bin contributions.
/// A sample at fractional bin position (fa, fb) inside a 2x2 cell is split
/// over the triangle of the cell containing it (barycentric weights). The
/// marginals receive ordinary linear weights, and identical inputs produce a
/// purely diagonal histogram.
class JointHistogram {
public:
    JointHistogram(int bins_fixed, int bins_moving, IntensityRange fixed, IntensityRange moving)
        : bins_fixed_(bins_fixed), bins_moving_(bins_moving), fixed_(fixed), moving_(moving),
          counts_(std::size_t(bins_fixed) * std::size_t(bins_moving), 0.0) {
        if (bins_fixed < 2 || bins_moving < 2) throw ParameterError("histogram: need at least 2 bins");
    }

    struct BinPosition {
        int bin = 0;          // lower bin of the pair
        double frac = 0.0;    // weight of bin + 1
        double dfrac = 0.0;   // d(frac)/d(value); 0 when clamped
    };

    static BinPosition position(double v, IntensityRange r, int bins) {
        BinPosition p;
        const double width = r.hi - r.lo;
        if (!(width > 0.0)) return p;
        const double scale = double(bins - 1) / width;
        double t = (v - r.lo) * scale;
        if (t <= 0.0) {
            t = 0.0;
        } else if (t >= double(bins - 1)) {
            t = double(bins - 1);
        } else {
            p.dfrac = scale;
        }
        int b = static_cast<int>(std::floor(t));
        if (b > bins - 2) b = bins - 2;
        p.bin = b;
        p.frac = t - double(b);
        return p;
    }

    BinPosition fixed_position(double a) const { return position(a, fixed_, bins_fixed_); }
    BinPosition moving_position(double b) const { return position(b, moving_, bins_moving_); }

    void add(double a, double b) {
        const BinPosition pa = fixed_position(a);
        const BinPosition pb = moving_position(b);
        const int i = pa.bin;
        const int j = pb.bin;
        const double fa = pa.frac;
        const double fb = pb.frac;
        if (fa >= fb) {
            cell(i, j) += 1.0 - fa;
            cell(i + 1, j) += fa - fb;
            cell(i + 1, j + 1) += fb;
        } else {
            cell(i, j) += 1.0 - fb;
            cell(i, j + 1) += fb - fa;
            cell(i + 1, j + 1) += fa;
        }
        total_ += 1.0;
    }

    double& cell(int i, int j) { return counts_[std::size_t(i) * std::size_t(bins_moving_) + std::size_t(j)]; }
    double cell(int i, int j) const { return counts_[std::size_t(i) * std::size_t(bins_moving_) + std::size_t(j)]; }

    int bins_fixed() const { return bins_fixed_; }
    int bins_moving() const { return bins_moving_; }
    double total() const { return total_; }
    const std::vector<double>& counts() const { return counts_; }

    std::vector<double> fixed_marginal() const {
        std::vector<double> m(bins_fixed_, 0.0);
        for (int i = 0; i < bins_fixed_; ++i)
            for (int j = 0; j < bins_moving_; ++j) m[i] += cell(i, j);
        return m;
    }

    std::vector<double> moving_marginal() const {
        std::vector<double> m(bins_moving_, 0.0);
        for (int i = 0; i < bins_fixed_; ++i)
            for (int j = 0; j < bins_moving_; ++j) m[j] += cell(i, j);
        return m;
    }

private:
    int bins_fixed_;
    int bins_moving_;
    IntensityRange fixed_;
    IntensityRange moving_;
    std::vector<double> counts_;
    double total_ = 0.0;
};

namespace detail {

inline double entropy(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / total;
            h -= p * std::log(p);
        }
    }
    return h;
}

// Each core returns the raw metric value. When `deriv` is non-null it
// receives d(value)/d(b[i]) for every voxel i in `voxels` (other entries are
// left untouched); `deriv_scale` multiplies those derivatives.

inline double ssd_core(const std::vector<double>& a, const std::vector<double>& b, std::span<const std::size_t> voxels,
                       std::vector<double>* deriv, double deriv_scale) {
    double s = 0.0;
    for (std::size_t i : voxels) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    const double n = double(voxels.size());
    if (deriv != nullptr) {
        for (std::size_t i : voxels) (*deriv)[i] += deriv_scale * 2.0 * (b[i] - a[i]) / n;
    }
    return s / n;
}

inline double ncc_core(const std::vector<double>& a, const std::vector<double>& b, std::span<const std::size_t> voxels,
                       std::vector<double>* deriv, double deriv_scale) {
    const double n = double(voxels.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i : voxels) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i : voxels) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) throw UndefinedMetricError("ncc: zero variance");
    const double denom = std::sqrt(saa * sbb);
    const double r = sab / denom;
    if (deriv != nullptr) {
        for (std::size_t i : voxels) {
            (*deriv)[i] += deriv_scale * ((a[i] - ma) / denom - r * (b[i] - mb) / sbb);
        }
    }
    return r;
}

inline double nmi_core(const std::vector<double>& a, const std::vector<double>& b, std::span<const std::size_t> voxels,
                       int bins, std::optional<IntensityRange> range_a, std::optional<IntensityRange> range_b,
                       std::vector<double>* deriv, double deriv_scale) {
    const IntensityRange ra = range_a ? *range_a : range_of(a, voxels);
    const IntensityRange rb = range_b ? *range_b : range_of(b, voxels);
    JointHistogram h(bins, bins, ra, rb);
    for (std::size_t i : voxels) h.add(a[i], b[i]);
    const double total = h.total();
    const auto pa = h.fixed_marginal();
    const auto pb = h.moving_marginal();
    const double ha = entropy(pa, total);
    const double hb = entropy(pb, total);
    const double hab = entropy(h.counts(), total);
    if (!(ha > 0.0) || !(hb > 0.0)) throw UndefinedMetricError("nmi: an input has zero entropy (constant image)");
    const double value = (ha + hb) / hab;
    if (deriv != nullptr) {
        auto log_p = [total](double c) { return c > 0.0 ? std::log(c / total) : 0.0; };
        for (std::size_t i : voxels) {
            const auto qa = h.fixed_position(a[i]);
            const auto qb = h.moving_position(b[i]);
            if (qb.dfrac == 0.0) continue;
            const int ia = qa.bin;
            const int jb = qb.bin;
            // dp/db for each touched cell, per unit of frac_b.
            double dhab = 0.0;
            if (qa.frac > qb.frac) {
                dhab = -(-log_p(h.cell(ia + 1, jb)) + log_p(h.cell(ia + 1, jb + 1)));
            } else {
                dhab = -(-log_p(h.cell(ia, jb)) + log_p(h.cell(ia, jb + 1)));
            }
            const double dhb = -(-log_p(pb[jb]) + log_p(pb[jb + 1]));
            const double scale = qb.dfrac / total;
            const double dv = (dhb * hab - (ha + hb) * dhab) / (hab * hab);
            (*deriv)[i] += deriv_scale * dv * scale;
        }
    }
    return value;
}

inline double dot_core(std::span<const std::vector<double>* const> a, std::span<const std::vector<double>* const> b,
                       std::span<const std::size_t> voxels, std::vector<std::vector<double>>* deriv,
                       double deriv_scale) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const auto& ac = *a[c];
        const auto& bc = *b[c];
        for (std::size_t i : voxels) s += ac[i] * bc[i];
    }
    const double n = double(voxels.size());
    if (deriv != nullptr) {
        for (std::size_t c = 0; c < a.size(); ++c)
            for (std::size_t i : voxels) (*deriv)[c][i] += deriv_scale * (*a[c])[i] / n;
    }
    return s / n;
}

}  // namespace detail

/// Options for metrics evaluated over stacks of channels.
struct ChannelMetricOptions {
    ChannelMetricOptions() = default;
    ChannelMetricOptions(MetricKind k, int b = kDefaultHistogramBins) : kind(k), bins(b) {}

    MetricKind kind = MetricKind::Ssd;
    int bins = kDefaultHistogramBins;
    // Optional fixed histogram ranges per channel (NMI only).
    std::vector<IntensityRange> fixed_ranges;
    std::vector<IntensityRange> moving_ranges;
};

/// Metric between two channel stacks over `voxels`. SSD, NCC and NMI are
/// averaged over channels; mean_dot_product is -(1/|voxels|) sum <a, b>.
/// Returns the oriented (minimise) value; `deriv` (one vector per channel,
/// voxel-count long) receives d(oriented)/d(moving) when non-null.
inline double evaluate_channels(std::span<const std::vector<double>* const> fixed,
                                std::span<const std::vector<double>* const> moving,
                                std::span<const std::size_t> voxels, const ChannelMetricOptions& opt,
                                std::vector<std::vector<double>>* deriv = nullptr) {
    if (fixed.size() != moving.size() || fixed.empty()) throw GeometryError("metric: channel count mismatch");
    if (voxels.empty()) throw UndefinedMetricError("metric: no voxels");
    const double sign = orientation_of(opt.kind) == Orientation::Minimize ? 1.0 : -1.0;
    if (deriv != nullptr) {
        deriv->assign(moving.size(), std::vector<double>(moving[0]->size(), 0.0));
    }
    if (opt.kind == MetricKind::MeanDotProduct) {
        return -detail::dot_core(fixed, moving, voxels, deriv, -1.0);
    }
    const double n = double(fixed.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < fixed.size(); ++c) {
        std::vector<double>* dc = deriv != nullptr ? &(*deriv)[c] : nullptr;
        const double scale = sign / n;
        switch (opt.kind) {
            case MetricKind::Ssd: acc += detail::ssd_core(*fixed[c], *moving[c], voxels, dc, scale); break;
            case MetricKind::Ncc: acc += detail::ncc_core(*fixed[c], *moving[c], voxels, dc, scale); break;
            case MetricKind::Nmi: {
                std::optional<IntensityRange> ra, rb;
                if (c < opt.fixed_ranges.size()) ra = opt.fixed_ranges[c];
                if (c < opt.moving_ranges.size()) rb = opt.moving_ranges[c];
                acc += detail::nmi_core(*fixed[c], *moving[c], voxels, opt.bins, ra, rb, dc, scale);
                break;
            }
            case MetricKind::MeanDotProduct: break;
        }
    }
    return sign * acc / n;
}

namespace detail {

inline MetricValue scalar_metric(const ScalarVolume& a, const ScalarVolume& b, const LabelVolume* mask,
                                 ChannelMetricOptions opt, const char* name) {
    require_same_geometry(a.geometry(), b.geometry(), name);
    const auto voxels = selected_voxels(a.geometry(), mask);
    const std::vector<double>* fa[] = {&a.values()};
    const std::vector<double>* fb[] = {&b.values()};
    const double oriented = evaluate_channels(fa, fb, voxels, opt);
    const Orientation o = orientation_of(opt.kind);
    return {o == Orientation::Minimize ? oriented : -oriented, o};
}

inline std::vector<const std::vector<double>*> channel_pointers(const VectorField& f) {
    std::vector<const std::vector<double>*> p;
    for (const auto& c : f.components()) p.push_back(&c.values());
    return p;
}

}  // namespace detail

/// Mean squared difference (minimise).
inline MetricValue ssd(const ScalarVolume& a, const ScalarVolume& b, const LabelVolume* mask = nullptr) {
    return detail::scalar_metric(a, b, mask, {MetricKind::Ssd}, "ssd");
}

/// Global Pearson correlation (maximise).
inline MetricValue ncc(const ScalarVolume& a, const ScalarVolume& b, const LabelVolume* mask = nullptr) {
    return detail::scalar_metric(a, b, mask, {MetricKind::Ncc}, "ncc");
}

/// Normalised mutual information (H(A)+H(B))/H(A,B) (maximise), in [1, 2].
inline MetricValue nmi(const ScalarVolume& a, const ScalarVolume& b, int bins = kDefaultHistogramBins,
                       const LabelVolume* mask = nullptr) {
    ChannelMetricOptions opt{MetricKind::Nmi};
    opt.bins = bins;
    return detail::scalar_metric(a, b, mask, opt, "nmi");
}

/// -(1/|Omega|) sum <f, g> (minimise).
inline MetricValue mean_dot_product(const VectorField& f, const VectorField& g, const LabelVolume* mask = nullptr) {
    require_same_geometry(f.geometry(), g.geometry(), "mean_dot_product");
    const auto voxels = selected_voxels(f.geometry(), mask);
    const auto pf = detail::channel_pointers(f);
    const auto pg = detail::channel_pointers(g);
    return {evaluate_channels(pf, pg, voxels, {MetricKind::MeanDotProduct}), Orientation::Minimize};
}

/// -1/2 mean <f, g> over the grid (minimise); f and g are NGF fields.
inline MetricValue ngf_metric(const VectorField& f, const VectorField& g) {
    const MetricValue m = mean_dot_product(f, g);
    return {0.5 * m.value, Orientation::Minimize};
}

/// Average of a scalar metric over the n vector components.
inline MetricValue vector_field_similarity(const VectorField& df, const VectorField& dg, MetricKind inner,
                                           const LabelVolume* mask = nullptr, int bins = kDefaultHistogramBins) {
    if (inner == MetricKind::MeanDotProduct) {
        throw ParameterError("vector_field_similarity: inner metric must be ssd, ncc or nmi");
    }
    require_same_geometry(df.geometry(), dg.geometry(), "vector_field_similarity");
    const auto voxels = selected_voxels(df.geometry(), mask);
    const auto pf = detail::channel_pointers(df);
    const auto pg = detail::channel_pointers(dg);
    ChannelMetricOptions opt{inner};
    opt.bins = bins;
    const double oriented = evaluate_channels(pf, pg, voxels, opt);
    const Orientation o = orientation_of(inner);
    return {o == Orientation::Minimize ? oriented : -oriented, o};
}

}  // namespace vfs
