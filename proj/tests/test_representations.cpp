#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vfs/phantom.hpp"
#include "vfs/representations.hpp"

using namespace vfs;

namespace {

EdgeMap sparse_edges(const GridGeometry& g, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, g.voxel_count() - 1);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    ScalarVolume f(g);
    for (int i = 0; i < count; ++i) f[pick(rng)] = mag(rng);
    return EdgeMap(f);
}

double max_abs_diff(const VectorField& a, const VectorField& b) {
    double m = 0.0;
    for (int c = 0; c < a.ncomponents(); ++c)
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.component(c)[i] - b.component(c)[i]));
    return m;
}

}  // namespace

TEST(Kernel, MagnitudeFollowsInversePower) {
    for (double gamma : {2.5, 3.0, 4.0}) {
        const auto k = build_vfc_kernel(5, gamma, 1e-8, 3);
        for (int r = 1; r <= 3; ++r) {
            EXPECT_NEAR(k.magnitude_at_distance(r), 1.0 / (std::pow(double(r), gamma) + 1e-8), 1e-15);
            EXPECT_NEAR(norm(k.tap(r, 0, 0)), 1.0 / (std::pow(double(r), gamma) + 1e-8), 1e-15);
        }
    }
    EXPECT_NEAR(build_vfc_kernel(4, 3.0).magnitude_at_distance(2.0), 0.125, 1e-9);
}

TEST(Kernel, PointsToCentreAndVanishesOutside) {
    const auto k = build_vfc_kernel(3, 3.0, 1e-8, 3);
    const Vec3 t = k.tap(1, -2, 2);
    const double r = 3.0;
    EXPECT_NEAR(t[0], -1.0 / r / (27.0 + 1e-8), 1e-15);
    EXPECT_NEAR(t[1], 2.0 / r / (27.0 + 1e-8), 1e-15);
    EXPECT_EQ(k.tap(0, 0, 0), (Vec3{0.0, 0.0, 0.0}));
    EXPECT_EQ(k.tap(3, 1, 0), (Vec3{0.0, 0.0, 0.0}));  // |d| > R inside the box
    EXPECT_EQ(k.tap(4, 0, 0), (Vec3{0.0, 0.0, 0.0}));
    // Odd symmetry.
    for (int dx = -3; dx <= 3; ++dx)
        for (int dy = -3; dy <= 3; ++dy) {
            const Vec3 a = k.tap(dx, dy, 1), b = k.tap(-dx, -dy, -1);
            for (int c = 0; c < 3; ++c) EXPECT_EQ(a[c], -b[c]);
        }
}

TEST(Kernel, RejectsBadParameters) {
    EXPECT_THROW(build_vfc_kernel(0), ParameterError);
    EXPECT_THROW(build_vfc_kernel(5, 0.0), ParameterError);
    EXPECT_THROW(build_vfc_kernel(5, 3.0, 0.0), ParameterError);
    EXPECT_THROW(build_vfc_kernel(5, 3.0, 1e-8, 4), ParameterError);
    EXPECT_THROW(vfc_field(EdgeMap(ScalarVolume(GridGeometry({4, 4}))), build_vfc_kernel(3)), ParameterError);
    EXPECT_THROW(EdgeMap(ScalarVolume(GridGeometry({2, 2}), std::vector<double>{0, -1, 0, 0})), ParameterError);
}

TEST(Vfc, DirectAndFourierMatchGatherOracle3D) {
    GridGeometry g({9, 7, 6});
    const EdgeMap em = sparse_edges(g, 12, 5);
    for (int radius : {2, 4, 50}) {
        const auto k = build_vfc_kernel(radius, 3.0, 1e-8, 3);
        const auto ref = oracle::vfc(em.values(), radius, 3.0, 1e-8);
        const VectorField d = vfc_field(em, k, ConvolutionMethod::Direct);
        const VectorField f = vfc_field(em, k, ConvolutionMethod::Fourier);
        for (std::size_t i = 0; i < g.voxel_count(); ++i)
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(d.component(c)[i], ref[i][c], 1e-12);
                EXPECT_NEAR(f.component(c)[i], ref[i][c], 1e-10);
            }
    }
}

TEST(Vfc, DirectAndFourierAgree2DDense) {
    GridGeometry g({33, 20});
    std::mt19937_64 rng(8);
    const ScalarVolume f(g, oracle::random_values(g.voxel_count(), rng, 0.0, 1.0));
    const auto k = build_vfc_kernel(12, 2.5, 1e-8, 2);
    EXPECT_LT(max_abs_diff(vfc_field(EdgeMap(f), k, ConvolutionMethod::Direct),
                           vfc_field(EdgeMap(f), k, ConvolutionMethod::Fourier)),
              1e-10);
}

TEST(Vfc, LinearInEdgeMap) {
    GridGeometry g({10, 10});
    const EdgeMap a = sparse_edges(g, 6, 1), b = sparse_edges(g, 6, 2);
    ScalarVolume s(g);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 * a.values()[i] + 0.5 * b.values()[i];
    const auto k = build_vfc_kernel(6, 3.0, 1e-8, 2);
    const VectorField fa = vfc_field(a, k), fb = vfc_field(b, k), fs = vfc_field(EdgeMap(s), k);
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < s.size(); ++i)
            EXPECT_NEAR(fs.component(c)[i], 2.0 * fa.component(c)[i] + 0.5 * fb.component(c)[i], 1e-12);
}

TEST(EdgeMap, SquaredGradientMagnitude) {
    GridGeometry g({5, 5}, {2.0, 1.0});
    ScalarVolume v(g);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 4.0 * double(g.unravel(i)[0]) + double(g.unravel(i)[1]);
    // Physical gradient (2, 1): squared norm 5.
    const EdgeMap em = edge_map_squared_gradient(v);
    for (double x : em.values().values()) EXPECT_NEAR(x, 5.0, 1e-12);
}

TEST(Normalize, MagnitudesBoundedAndDirectionKept) {
    GridGeometry g({6, 6});
    VectorField f(g);
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < f.size(); ++i) f.set_vector(i, {oracle::random_values(1, rng)[0] * 10, 0.25, 0.0});
    const VectorField n = normalize_field(f, 0.1);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Vec3 v = f.vector(i), u = n.vector(i);
        EXPECT_LE(norm(u), 1.0);
        EXPECT_NEAR(norm(u), norm(v) / std::sqrt(dot(v, v) + 0.01), 1e-12);
        EXPECT_NEAR(u[0] * v[1] - u[1] * v[0], 0.0, 1e-12);
    }
    EXPECT_THROW(normalize_field(f, 0.0), ParameterError);
    EXPECT_EQ(normalize_field_relative(VectorField(g)).max_magnitude(), 0.0);
}

TEST(Ngf, UnitLikeAndZeroOnFlat) {
    GridGeometry g({8, 8});
    ScalarVolume flat(g, 3.0);
    const auto noise = estimate_noise(flat);
    EXPECT_EQ(noise.epsilon_ngf, 0.0);
    EXPECT_EQ(ngf(flat, noise).max_magnitude(), 0.0);
    ScalarVolume ramp(g);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 2.0 * double(g.unravel(i)[1]);
    const VectorField n = ngf(ramp, {0.0});
    for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(n.component(1)[i], 1.0, 1e-12);
    EXPECT_NEAR(estimate_noise(ramp, 0.1).epsilon_ngf, 0.2, 1e-12);
}

TEST(Representation, ContrastInversionSmallGrid) {
    const GridGeometry g = GridGeometry::cube(3, 20);
    const ScalarVolume v = phantom::body(g);
    ScalarVolume inv(g);
    const double mx = v.max();
    for (std::size_t i = 0; i < v.size(); ++i) inv[i] = mx - v[i];
    RepresentationConfig c;
    c.kernel_radius = 8;
    EXPECT_LT(max_abs_diff(make_representation(v, c), make_representation(inv, c)), 1e-9);
    c.kind = RepresentationKind::Ngf;
    const VectorField a = make_representation(v, c), b = make_representation(inv, c);
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(a.component(k)[i], -b.component(k)[i], 1e-12);
}

TEST(Representation, IntensityChannelsAndParsing) {
    const ScalarVolume v(GridGeometry({4, 4}), 1.0);
    RepresentationConfig c;
    c.kind = RepresentationKind::Intensity;
    EXPECT_EQ(representation_channels(v, c).size(), 1u);
    EXPECT_THROW(make_representation(v, c), ParameterError);
    EXPECT_EQ(parse_representation("ngf"), RepresentationKind::Ngf);
    EXPECT_THROW(parse_representation("mind"), ParameterError);
}

TEST(Roughness, ConstantFieldIsZeroAndRotationFieldIsNot) {
    GridGeometry g({10, 10});
    VectorField c(g);
    for (std::size_t i = 0; i < c.size(); ++i) c.set_vector(i, {1.0, 2.0, 0.0});
    EXPECT_NEAR(roughness(c), 0.0, 1e-12);
    VectorField alt(g);
    for (std::size_t i = 0; i < alt.size(); ++i) {
        const auto p = g.unravel(i);
        alt.set_vector(i, (p[0] + p[1]) % 2 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0});
    }
    EXPECT_NEAR(roughness(alt), M_PI / 2, 1e-12);
    EXPECT_EQ(roughness(VectorField(g)), 0.0);
}
