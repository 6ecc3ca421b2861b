#pragma once

// Directional structural representations: squared-gradient edge maps, vector
// field convolution (VFC) kernels and fields, field normalisation, and
// normalised gradient fields (NGF).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/fft.hpp"
#include "vfs/gradient.hpp"
#include "vfs/volume.hpp"

namespace vfs {

/// Non-negative scalar map highlighting boundaries.
class EdgeMap {
public:
    EdgeMap() = default;
    explicit EdgeMap(ScalarVolume values) : values_(std::move(values)) {
        for (double v : values_.values()) {
            if (v < 0.0) throw ParameterError("edge map values must be >= 0");
        }
    }
    const GridGeometry& geometry() const { return values_.geometry(); }
    const ScalarVolume& values() const { return values_; }

private:
    ScalarVolume values_;
};

/// f = |grad I|^2.
inline EdgeMap edge_map_squared_gradient(const ScalarVolume& v, GradientUnits units = GradientUnits::Physical) {
    const VectorField g = gradient(v, units);
    ScalarVolume out(v.geometry());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (int c = 0; c < g.ncomponents(); ++c) s += g.component(c)[i] * g.component(c)[i];
        out[i] = s;
    }
    return EdgeMap(std::move(out));
}

/// Centre-pointing kernel sampled on a (2R+1)^n voxel grid. A tap at offset d
/// (0 < |d| <= R) holds -d/|d| * 1/(|d|^gamma + epsilon_center); the centre
/// tap and taps beyond R are zero.
class VectorFieldKernel {
public:
    int ndim() const { return ndim_; }
    int radius() const { return radius_; }
    double gamma() const { return gamma_; }
    double epsilon_center() const { return epsilon_center_; }
    std::size_t width() const { return std::size_t(2 * radius_ + 1); }

    double magnitude_at_distance(double r) const {
        if (r == 0.0 || r > double(radius_)) return 0.0;
        return 1.0 / (std::pow(r, gamma_) + epsilon_center_);
    }

    /// Tap vector at integer offset (dx, dy, dz); zero outside the support.
    Vec3 tap(int dx, int dy, int dz = 0) const {
        if (std::abs(dx) > radius_ || std::abs(dy) > radius_ || std::abs(dz) > radius_) return {0.0, 0.0, 0.0};
        if (ndim_ == 2 && dz != 0) return {0.0, 0.0, 0.0};
        const std::size_t idx = tap_index(dx, dy, dz);
        Vec3 v{0.0, 0.0, 0.0};
        for (int c = 0; c < ndim_; ++c) v[c] = components_[c][idx];
        return v;
    }

    const std::vector<double>& component(int c) const { return components_.at(c); }

    std::size_t tap_index(int dx, int dy, int dz) const {
        const std::size_t w = width();
        const std::size_t k = ndim_ == 3 ? std::size_t(dz + radius_) : 0;
        return std::size_t(dx + radius_) + w * (std::size_t(dy + radius_) + w * k);
    }

private:
    friend VectorFieldKernel build_vfc_kernel(int, double, double, int);

    int ndim_ = 3;
    int radius_ = 0;
    double gamma_ = 0.0;
    double epsilon_center_ = 0.0;
    std::vector<std::vector<double>> components_;
};

inline constexpr int kDefaultKernelRadius = 50;
inline constexpr double kDefaultKernelEpsilon = 1e-8;

inline VectorFieldKernel build_vfc_kernel(int support_radius = kDefaultKernelRadius, double gamma = 3.0,
                                          double epsilon_center = kDefaultKernelEpsilon, int n_axes = 3) {
    if (support_radius < 1) throw ParameterError("vfc kernel: support radius must be >= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("vfc kernel: gamma must be > 0");
    if (!(epsilon_center > 0.0)) throw ParameterError("vfc kernel: epsilon must be > 0");
    if (n_axes != 2 && n_axes != 3) throw ParameterError("vfc kernel: n_axes must be 2 or 3");

    VectorFieldKernel k;
    k.ndim_ = n_axes;
    k.radius_ = support_radius;
    k.gamma_ = gamma;
    k.epsilon_center_ = epsilon_center;
    const std::size_t w = k.width();
    const std::size_t taps = n_axes == 3 ? w * w * w : w * w;
    k.components_.assign(n_axes, std::vector<double>(taps, 0.0));
    const int rz = n_axes == 3 ? support_radius : 0;
    const double r_max = double(support_radius);
    for (int dz = -rz; dz <= rz; ++dz) {
        for (int dy = -support_radius; dy <= support_radius; ++dy) {
            for (int dx = -support_radius; dx <= support_radius; ++dx) {
                const double r = std::sqrt(double(dx * dx + dy * dy + dz * dz));
                if (r == 0.0 || r > r_max) continue;
                const double m = 1.0 / (std::pow(r, gamma) + epsilon_center);
                const std::size_t idx = k.tap_index(dx, dy, dz);
                const int off[3] = {dx, dy, dz};
                for (int c = 0; c < n_axes; ++c) k.components_[c][idx] = -double(off[c]) / r * m;
            }
        }
    }
    return k;
}

enum class ConvolutionMethod { Automatic, Fourier, Direct };

namespace detail {

// Only taps with |offset| <= dim-1 along each axis can link two voxels of the grid.
inline std::array<int, 3> effective_reach(const GridGeometry& g, int radius) {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < g.ndim(); ++a) c[a] = std::min<int>(radius, int(g.dim(a)) - 1);
    return c;
}

inline VectorField vfc_direct(const EdgeMap& em, const VectorFieldKernel& k) {
    const GridGeometry& g = em.geometry();
    VectorField out(g);
    const auto& d = g.dims();
    const auto& f = em.values();
    const int R = k.radius();
    for (std::size_t src = 0; src < f.size(); ++src) {
        const double e = f[src];
        if (e == 0.0) continue;
        const Index3 p = g.unravel(src);
        const long lo[3] = {std::max<long>(0, long(p[0]) - R), std::max<long>(0, long(p[1]) - R),
                            g.ndim() == 3 ? std::max<long>(0, long(p[2]) - R) : 0};
        const long hi[3] = {std::min<long>(long(d[0]) - 1, long(p[0]) + R),
                            std::min<long>(long(d[1]) - 1, long(p[1]) + R),
                            g.ndim() == 3 ? std::min<long>(long(d[2]) - 1, long(p[2]) + R) : 0};
        for (long z = lo[2]; z <= hi[2]; ++z) {
            for (long y = lo[1]; y <= hi[1]; ++y) {
                for (long x = lo[0]; x <= hi[0]; ++x) {
                    const std::size_t tap = k.tap_index(int(x - long(p[0])), int(y - long(p[1])), int(z - long(p[2])));
                    const std::size_t dst = g.linear(std::size_t(x), std::size_t(y), std::size_t(z));
                    for (int c = 0; c < k.ndim(); ++c) out.component(c)[dst] += e * k.component(c)[tap];
                }
            }
        }
    }
    return out;
}

inline VectorField vfc_fourier(const EdgeMap& em, const VectorFieldKernel& k) {
    const GridGeometry& g = em.geometry();
    const auto& d = g.dims();
    const std::array<int, 3> reach = effective_reach(g, k.radius());
    std::array<std::size_t, 3> extent{1, 1, 1};
    // Linear (non-circular) convolution restricted to the grid needs dims + reach.
    for (int a = 0; a < g.ndim(); ++a) extent[a] = fft::good_size(d[a] + std::size_t(reach[a]));

    fft::RealGridTransform work(g.ndim(), extent);
    auto real = work.real();
    std::fill(real.begin(), real.end(), 0.0);
    const auto& f = em.values().values();
    for (std::size_t z = 0; z < d[2]; ++z)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t x = 0; x < d[0]; ++x) real[work.index(x, y, z)] = f[g.linear(x, y, z)];
    work.forward();
    const std::vector<std::complex<double>> edge_spectrum(work.spectrum().begin(), work.spectrum().end());

    VectorField out(g);
    const double scale = 1.0 / double(work.real_count());
    auto wrap = [](int off, std::size_t n) { return off >= 0 ? std::size_t(off) : std::size_t(long(n) + off); };
    for (int c = 0; c < k.ndim(); ++c) {
        std::fill(real.begin(), real.end(), 0.0);
        const auto& kc = k.component(c);
        for (int dz = -reach[2]; dz <= reach[2]; ++dz)
            for (int dy = -reach[1]; dy <= reach[1]; ++dy)
                for (int dx = -reach[0]; dx <= reach[0]; ++dx)
                    real[work.index(wrap(dx, extent[0]), wrap(dy, extent[1]), wrap(dz, extent[2]))] =
                        kc[k.tap_index(dx, dy, dz)];
        work.forward();
        auto spec = work.spectrum();
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= edge_spectrum[i];
        work.backward();
        auto& dst = out.component(c).values();
        for (std::size_t z = 0; z < d[2]; ++z)
            for (std::size_t y = 0; y < d[1]; ++y)
                for (std::size_t x = 0; x < d[0]; ++x) dst[g.linear(x, y, z)] = real[work.index(x, y, z)] * scale;
    }
    return out;
}

}  // namespace detail

/// F = f * K, component by component, with zero padding outside the grid.
/// Output at x sums f(y) K(x - y): an isolated edge voxel at p produces the
/// kernel re-centred on p, so every vector points at p.
inline VectorField vfc_field(const EdgeMap& em, const VectorFieldKernel& k,
                             ConvolutionMethod method = ConvolutionMethod::Automatic) {
    if (em.geometry().ndim() != k.ndim()) {
        throw ParameterError("vfc_field: kernel has " + std::to_string(k.ndim()) + " axes, edge map has " +
                             std::to_string(em.geometry().ndim()));
    }
    if (method == ConvolutionMethod::Automatic) {
        const auto& f = em.values().values();
        const std::size_t nonzero =
            static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](double v) { return v != 0.0; }));
        const auto reach = detail::effective_reach(em.geometry(), k.radius());
        double box = 1.0;
        for (int a = 0; a < k.ndim(); ++a) box *= double(2 * reach[a] + 1);
        method = double(nonzero) * box <= 2e7 ? ConvolutionMethod::Direct : ConvolutionMethod::Fourier;
    }
    return method == ConvolutionMethod::Direct ? detail::vfc_direct(em, k) : detail::vfc_fourier(em, k);
}

/// Divide every vector by sqrt(|v|^2 + floor^2); magnitudes end up <= 1.
inline VectorField normalize_field(const VectorField& f, double floor) {
    if (!(floor > 0.0)) throw ParameterError("normalize_field: floor must be > 0");
    VectorField out(f.geometry());
    const double f2 = floor * floor;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec3 v = f.vector(i);
        const double s = 1.0 / std::sqrt(dot(v, v) + f2);
        out.set_vector(i, s * v);
    }
    return out;
}

inline constexpr double kDefaultFloorFraction = 1e-3;

/// normalize_field with floor = fraction * max magnitude. An all-zero field
/// stays zero.
inline VectorField normalize_field_relative(const VectorField& f, double fraction = kDefaultFloorFraction) {
    const double m = f.max_magnitude();
    if (m == 0.0) return VectorField(f.geometry());
    return normalize_field(f, fraction * m);
}

/// NGF regularisation level. Same units as the gradient magnitude.
struct NoiseEstimate {
    double epsilon_ngf = 0.0;
};

inline constexpr double kDefaultNoiseEta = 0.1;

/// epsilon = eta * mean gradient magnitude.
inline NoiseEstimate estimate_noise(const ScalarVolume& v, double eta = kDefaultNoiseEta,
                                    GradientUnits units = GradientUnits::Physical) {
    if (!(eta > 0.0)) throw ParameterError("estimate_noise: eta must be > 0");
    const VectorField g = gradient(v, units);
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) sum += g.magnitude(i);
    return {eta * sum / double(g.size())};
}

/// n = grad I / sqrt(|grad I|^2 + eps^2). Zero where the gradient vanishes.
inline VectorField ngf(const ScalarVolume& v, NoiseEstimate noise, GradientUnits units = GradientUnits::Physical) {
    if (!(noise.epsilon_ngf >= 0.0)) throw ParameterError("ngf: noise level must be >= 0");
    VectorField g = gradient(v, units);
    const double e2 = noise.epsilon_ngf * noise.epsilon_ngf;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.vector(i);
        const double d = dot(x, x) + e2;
        g.set_vector(i, d > 0.0 ? (1.0 / std::sqrt(d)) * x : Vec3{0.0, 0.0, 0.0});
    }
    return g;
}

enum class RepresentationKind { Intensity, Vfc, Ngf };

inline std::string to_string(RepresentationKind k) {
    switch (k) {
        case RepresentationKind::Intensity: return "intensity";
        case RepresentationKind::Vfc: return "vfc";
        case RepresentationKind::Ngf: return "ngf";
    }
    return "?";
}

inline RepresentationKind parse_representation(const std::string& s) {
    if (s == "intensity") return RepresentationKind::Intensity;
    if (s == "vfc") return RepresentationKind::Vfc;
    if (s == "ngf") return RepresentationKind::Ngf;
    throw ParameterError("unknown representation '" + s + "' (expected intensity, vfc or ngf)");
}

struct RepresentationConfig {
    RepresentationKind kind = RepresentationKind::Vfc;
    double gamma = 3.0;
    int kernel_radius = kDefaultKernelRadius;
    double epsilon_center = kDefaultKernelEpsilon;
    bool normalize = true;
    double floor_fraction = kDefaultFloorFraction;
    double eta = kDefaultNoiseEta;
    GradientUnits units = GradientUnits::Physical;
};

/// VFC: normalize(f * K) with f = |grad I|^2. NGF: ngf(I, estimate_noise(I)).
inline VectorField make_representation(const ScalarVolume& v, const RepresentationConfig& cfg) {
    switch (cfg.kind) {
        case RepresentationKind::Vfc: {
            const VectorFieldKernel k =
                build_vfc_kernel(cfg.kernel_radius, cfg.gamma, cfg.epsilon_center, v.geometry().ndim());
            VectorField f = vfc_field(edge_map_squared_gradient(v, cfg.units), k);
            return cfg.normalize ? normalize_field_relative(f, cfg.floor_fraction) : f;
        }
        case RepresentationKind::Ngf:
            return ngf(v, estimate_noise(v, cfg.eta, cfg.units), cfg.units);
        case RepresentationKind::Intensity:
            break;
    }
    throw ParameterError("make_representation: intensity is not a vector representation");
}

/// Representation as a list of scalar channels: the image itself for
/// intensity, the vector components otherwise.
inline std::vector<ScalarVolume> representation_channels(const ScalarVolume& v, const RepresentationConfig& cfg) {
    if (cfg.kind == RepresentationKind::Intensity) return {v};
    return make_representation(v, cfg).components();
}

/// Magnitude-weighted mean angle (radians) between each vector and its
/// forward neighbour along every axis. Lower means smoother orientation.
inline double roughness(const VectorField& f) {
    const GridGeometry& g = f.geometry();
    const auto& d = g.dims();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
        const Index3 p = g.unravel(idx);
        const Vec3 u = f.vector(idx);
        const double mu = norm(u);
        if (mu == 0.0) continue;
        for (int a = 0; a < g.ndim(); ++a) {
            if (p[a] + 1 >= d[a]) continue;
            Index3 q = p;
            ++q[a];
            const Vec3 v = f.vector(g.linear(q[0], q[1], q[2]));
            const double mv = norm(v);
            if (mv == 0.0) continue;
            const Vec3 cr{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
            const double angle = std::atan2(norm(cr), dot(u, v));
            num += mu * mv * angle;
            den += mu * mv;
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace vfs
