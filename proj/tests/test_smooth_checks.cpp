#include <gtest/gtest.h>

#include <random>

#include "npc/smooth_checks.hpp"

using namespace npc;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

ChartMap chart(int m, int d, std::function<Vec(const Vec&)> f)
{
    ChartMap c;
    c.m = m;
    c.d = d;
    c.eval = std::move(f);
    return c;
}

ChartMap strip_derivatives(ChartMap c)
{
    c.jacobian = nullptr;
    c.hessian = nullptr;
    return c;
}

// Smooth non-harmonic map into the half-plane, finite-difference derivatives only.
ChartSpec wobbly_chart()
{
    ChartSpec s = named_chart("identity-hyperbolic");
    s.map.name = "wobbly";
    s.map.eval = [](const Vec& x) { return v2(x(0) + 0.3 * std::sin(x(1)), 1.5 + 0.2 * std::cos(x(0)) + 0.1 * x(1) * x(1)); };
    s.map.jacobian = nullptr;
    s.map.hessian = nullptr;
    return s;
}

} // namespace

TEST(EnergyDensity, ConstantLinearAndIdentity)
{
    auto constant = chart(2, 2, [](const Vec&) { return v2(0.0, 1.0); });
    MetricChart hyp{{2, {}}, hyperbolic_geometry()};
    EXPECT_NEAR(energy_density(constant, hyp, v2(0.1, 0.2)), 0.0, 1e-14);

    auto line = chart(1, 1, [](const Vec& x) { return Vec(Vec::Constant(1, 3.0 * x(0))); });
    MetricChart flat1{{1, {}}, flat_geometry(1)};
    EXPECT_NEAR(energy_density(line, flat1, Vec::Constant(1, 0.4)), 4.5, 1e-9);

    auto id = named_chart("identity-hyperbolic");
    for (double y : {0.5, 1.0, 1.7})
        EXPECT_NEAR(energy_density(id.map, id.metrics, v2(0.2, y)), 1.0 / (y * y), 1e-12);
}

TEST(EnergyDensity, SingularDomainMetricRejected)
{
    auto id = named_chart("identity-hyperbolic");
    id.metrics.domain.metric = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
    EXPECT_THROW(energy_density(id.map, id.metrics, v2(0, 1)), DomainError);
}

TEST(Tension, IdentityIntoHalfPlaneVanishes)
{
    auto id = named_chart("identity-hyperbolic");
    auto fdonly = strip_derivatives(id.map);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 100; ++k) {
        Vec x = id.sample(rng);
        EXPECT_LE(tension_field(id.map, id.metrics, x).norm(), 1e-12);
        EXPECT_LE(tension_field(fdonly, id.metrics, x).norm(), 1e-8);
    }
}

TEST(Tension, AffineFlatAndGeodesicVanish)
{
    for (const char* name : {"affine-flat", "geodesic-loop"}) {
        auto c = named_chart(name);
        std::mt19937_64 rng(2);
        for (int k = 0; k < 10; ++k)
            EXPECT_LE(tension_field(c.map, c.metrics, c.sample(rng)).norm(), 1e-8) << name;
    }
}

TEST(Tension, VerticalStretch)
{
    auto c = named_chart("scaled-hyperbolic");
    for (double y : {0.6, 1.0, 1.9}) {
        Vec t = tension_field(c.map, c.metrics, v2(0.3, y));
        EXPECT_NEAR(t(0), 0.0, 1e-12);
        EXPECT_NEAR(t(1), -3.0 / (2.0 * y), 1e-12);
        Vec tf = tension_field(strip_derivatives(c.map), c.metrics, v2(0.3, y));
        EXPECT_NEAR((tf - t).norm(), 0.0, 1e-6);
    }
}

TEST(Tension, NonFlatDomainUsesItsChristoffels)
{
    // Identity of the half-plane onto itself is harmonic; the domain terms must cancel the target ones.
    auto id = named_chart("identity-hyperbolic");
    id.metrics.domain.metric = hyperbolic_geometry().metric;
    EXPECT_LE(tension_field(id.map, id.metrics, v2(0.2, 1.3)).norm(), 1e-8);
}

TEST(Chart, AnalyticDerivativesMatchDifferences)
{
    for (const auto& name : chart_names()) {
        auto c = named_chart(name);
        std::mt19937_64 rng(3);
        for (int k = 0; k < 5; ++k)
            EXPECT_LE(jacobian_crosscheck(c.map, c.sample(rng)), 1e-6) << name;
    }
    EXPECT_THROW(named_chart("nope"), UsageError);
}

TEST(Geometry, ChristoffelsMatchLeviCivita)
{
    std::mt19937_64 rng(4);
    for (const char* name : {"hyperbolic", "sphere", "flat"}) {
        auto t = named_target(name);
        for (int k = 0; k < 10; ++k)
            EXPECT_LE(christoffel_defect(t.geometry, t.sample(rng)), 1e-6) << name;
    }
}

TEST(Geometry, CurvatureSymmetries)
{
    std::mt19937_64 rng(5);
    for (const auto& name : target_names()) {
        auto t = named_target(name);
        double tol = name == "spd2" ? 1e-6 : 1e-8;
        for (int k = 0; k < 5; ++k) {
            Vec y = t.sample(rng);
            EXPECT_LE(curvature_symmetry_defect(t.geometry.curvature(y)), tol) << name;
            EXPECT_LE(metric_symmetry_defect(t.geometry.metric(y)), 1e-14) << name;
        }
    }
}

TEST(Geometry, CurvatureConventionAndSectionalValues)
{
    auto hyp = hyperbolic_geometry();
    EXPECT_DOUBLE_EQ(hyp.curvature(v2(0.0, 1.0))(0, 1, 1, 0), -1.0);
    // Curvature from the metric alone agrees with the closed form.
    auto fdhyp = geometry_from_metric("h", 2, hyp.metric);
    Vec y = v2(0.4, 1.3);
    EXPECT_NEAR(fdhyp.curvature(y)(0, 1, 1, 0), -1.0 / std::pow(1.3, 4), 1e-6);
    auto sectional = [](const TargetGeometry& t, const Vec& p) {
        Mat h = t.metric(p);
        return t.curvature(p)(0, 1, 1, 0) / (h(0, 0) * h(1, 1) - h(0, 1) * h(0, 1));
    };
    EXPECT_NEAR(sectional(sphere_geometry(), v2(0.3, -0.2)), 1.0, 1e-12);
    // Unimodular 2x2 positive matrices with tr(h^-1 dh)^2 have curvature -1/2.
    EXPECT_NEAR(sectional(spd2_geometry(), v2(0.3, 0.8)), -0.5, 1e-6);
    EXPECT_NEAR(spd2_point(v2(0.3, 0.8)).determinant(), 1.0, 1e-14);
}

TEST(Weitzenbock, AffineBothSidesZero)
{
    auto c = named_chart("affine-flat");
    auto r = weitzenbock_residual(c.map, c.metrics, v2(0.1, 0.2));
    EXPECT_NEAR(r.lhs, 0.0, 1e-8);
    EXPECT_NEAR(r.rhs, 0.0, 1e-12);
}

TEST(Weitzenbock, IdentityIntoHalfPlane)
{
    auto c = named_chart("identity-hyperbolic");
    for (double y : {0.7, 1.0, 1.5}) {
        Vec x = v2(0.2, y);
        auto r = weitzenbock_residual(c.map, c.metrics, x);
        EXPECT_NEAR(r.rhs, 6.0 / std::pow(y, 4), 1e-12);
        EXPECT_NEAR(r.lhs, 6.0 / std::pow(y, 4), 1e-2);
        auto study = weitzenbock_convergence(c.map, c.metrics, x, 1e-2, 3);
        for (double o : study.orders)
            EXPECT_GE(o, 1.8);
    }
}

TEST(Weitzenbock, GeodesicLoopConstantEnergy)
{
    auto c = named_chart("geodesic-loop");
    auto r = weitzenbock_residual(c.map, c.metrics, Vec::Constant(1, 0.3));
    EXPECT_NEAR(energy_density(c.map, c.metrics, Vec::Constant(1, 0.3)), 0.5, 1e-12);
    EXPECT_LE(r.residual, 1e-8);
}

TEST(Weitzenbock, NonHarmonicRejected)
{
    auto c = named_chart("scaled-hyperbolic");
    EXPECT_THROW(weitzenbock_residual(c.map, c.metrics, v2(0, 1)), DomainError);
}

TEST(Pluriharmonic, HolomorphicAndOneDimensionalHarmonic)
{
    for (const char* name : {"holomorphic-flat", "identity-hyperbolic"}) {
        auto c = named_chart(name);
        std::mt19937_64 rng(6);
        for (int k = 0; k < 10; ++k) {
            auto t = pluriharmonic_tensor(c.map, c.metrics, c.sample(rng));
            for (const auto& block : t)
                EXPECT_LE(block.norm(), 1e-6) << name;
        }
    }
}

TEST(Pluriharmonic, ProductWithConjugate)
{
    auto c = named_chart("flat-z1z2bar");
    Vec x(4);
    x << 0.3, -0.4, 0.7, 0.1;
    auto t = pluriharmonic_tensor(c.map, c.metrics, x);
    CMat combined = t[0] + cplx(0, 1) * t[1];
    EXPECT_NEAR(std::abs(combined(0, 1) - 1.0), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(combined(0, 0)), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(combined(1, 0)), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(combined(1, 1)), 0.0, 1e-6);
}

TEST(Pluriharmonic, TraceIsTension)
{
    std::vector<ChartSpec> charts{named_chart("sine-harmonic"), named_chart("scaled-hyperbolic"), wobbly_chart(),
                                  named_chart("flat-z1z2bar")};
    std::mt19937_64 rng(7);
    for (const auto& c : charts)
        for (int k = 0; k < 10; ++k) {
            Vec x = c.sample(rng);
            Vec tr = pluriharmonic_trace(pluriharmonic_tensor(c.map, c.metrics, x));
            EXPECT_LE((tr - tension_field(c.map, c.metrics, x)).norm(), 1e-6) << c.map.name;
        }
}

TEST(SampsonQ0, TrivialCases)
{
    auto hyp = hyperbolic_geometry();
    CMat zero = CMat::Zero(2, 2);
    EXPECT_EQ(sampson_Q0(hyp.curvature(v2(0, 1)), zero, zero), 0.0);
    std::mt19937_64 rng(8);
    CMat a = complex_gaussian(2, 2, rng);
    EXPECT_EQ(sampson_Q0(flat_geometry(2).curvature(v2(0, 0)), a, a.conjugate()), 0.0);
}

TEST(SampsonQ0, NonNegativeIntoHalfPlane)
{
    auto hyp = named_target("hyperbolic");
    std::mt19937_64 rng(9);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        Vec y = hyp.sample(rng);
        // Derivatives of a real map: df/dzbar is the conjugate of df/dz.
        CMat dz = complex_gaussian(2, 2, rng);
        worst = std::min(worst, sampson_Q0(hyp.geometry.curvature(y), dz, dz.conjugate()));
    }
    EXPECT_GE(worst, -1e-10);
}

TEST(SampsonQ0, SineChartClosedForm)
{
    auto c = named_chart("sine-harmonic");
    Vec x(4);
    x << 0.2, 0.1, 1.1, -0.3;
    auto jet = complex_jet(chart_jacobian(c.map, x));
    double s = std::sin(1.1), co = std::cos(1.1);
    EXPECT_NEAR(sampson_Q0(c.metrics, c.map(x), jet.dz, jet.dzbar), co * co / (4 * std::pow(s, 4)), 1e-12);
}

TEST(Sampson, FlatNonPluriharmonic)
{
    auto c = named_chart("flat-re-z1z2bar");
    std::mt19937_64 rng(10);
    for (int k = 0; k < 10; ++k) {
        auto r = sampson_identity_residual(c.map, c.metrics, c.sample(rng));
        EXPECT_NEAR(r.lhs, 2.0, 1e-4);
        EXPECT_NEAR(r.phi_norm2, 0.5, 1e-6);
        EXPECT_EQ(r.q0, 0.0);
        EXPECT_LE(r.residual, 1e-4);
    }
}

TEST(Sampson, PluriharmonicChartsVanish)
{
    for (const char* name : {"geodesic-product", "flat-re-z1z2"}) {
        auto c = named_chart(name);
        std::mt19937_64 rng(11);
        for (int k = 0; k < 10; ++k) {
            auto r = sampson_identity_residual(c.map, c.metrics, c.sample(rng));
            EXPECT_LE(std::abs(r.lhs), 1e-4) << name;
            EXPECT_LE(r.residual, 1e-4) << name;
        }
    }
}

TEST(Sampson, CurvedNonPluriharmonicClosedForm)
{
    // f = (x1, sin x2): lhs = (1 + 2cos^2)/(2 sin^4), |phi|^2 = (1 + cos^2)/(8 sin^4), Q0 = cos^2/(4 sin^4).
    auto c = named_chart("sine-harmonic");
    std::mt19937_64 rng(12);
    for (int k = 0; k < 10; ++k) {
        Vec x = c.sample(rng);
        double s = std::sin(x(2)), co = std::cos(x(2)), s4 = std::pow(s, 4);
        auto r = sampson_identity_residual(c.map, c.metrics, x);
        EXPECT_NEAR(r.lhs, (1 + 2 * co * co) / (2 * s4), 1e-4);
        EXPECT_NEAR(r.phi_norm2, (1 + co * co) / (8 * s4), 1e-6);
        EXPECT_LE(r.residual, 1e-4);
        EXPECT_NEAR(r.printed_rhs - r.rhs, 2 * r.q0, 1e-12);
        EXPECT_LE(std::abs(r.lhs_imag), 1e-6);
    }
}

TEST(Sampson, Preconditions)
{
    auto c = named_chart("affine-flat");
    EXPECT_THROW(sampson_identity_residual(c.map, c.metrics, v2(0, 0)), UsageError);
    auto w = named_chart("flat-z1z2bar");
    w.map.eval = [](const Vec& x) { return v2(x(0) * x(0), 0.0); };
    EXPECT_THROW(sampson_identity_residual(w.map, w.metrics, Vec::Zero(4)), DomainError);
}

TEST(HermitianNegativity, HalfPlaneSphereFlat)
{
    std::mt19937_64 rng(13);
    auto hyp = named_target("hyperbolic");
    auto r = hermitian_negativity_test(hyp.geometry.curvature(hyp.sample(rng)), 10000, 1);
    EXPECT_EQ(r.samples, 10000);
    EXPECT_EQ(r.violations, 0);
    auto spd = named_target("spd2");
    EXPECT_EQ(hermitian_negativity_test(spd.geometry.curvature(spd.sample(rng)), 2000, 2).violations, 0);
    auto sph = named_target("sphere");
    EXPECT_GT(hermitian_negativity_test(sph.geometry.curvature(sph.sample(rng)), 10000, 3).violations, 0);
    auto flat = hermitian_negativity_test(flat_geometry(2).curvature(v2(0, 0)), 100, 4);
    EXPECT_EQ(flat.violations, 0);
    EXPECT_EQ(flat.worst, 0.0);
}

TEST(StrongNegativity, PoincareDiskCurvature)
{
    auto disk = named_kahler_target("poincare-disk");
    for (cplx w : {cplx(0, 0), cplx(0.3, -0.4), cplx(-0.7, 0.1)}) {
        auto kc = kahler_curvature_1d(disk.metric, w);
        double exact = -2.0 / std::pow(1.0 - std::norm(w), 4);
        EXPECT_NEAR(kc(0, 0, 0, 0).real(), exact, 1e-6 * std::abs(exact));
        EXPECT_EQ(kc.hermitian_defect(), 0.0);
    }
}

TEST(StrongNegativity, SignStatistics)
{
    std::mt19937_64 rng(14);
    auto disk = named_kahler_target("poincare-disk");
    auto r = strong_negativity_test(kahler_curvature_1d(disk.metric, disk.sample(rng)), 10000, 1);
    EXPECT_EQ(r.violations, 0);
    EXPECT_EQ(r.strictly_negative, 10000);
    auto flat = named_kahler_target("flat");
    auto f = strong_negativity_test(kahler_curvature_1d(flat.metric, cplx(0.2, 0.1)), 1000, 2);
    EXPECT_EQ(f.violations, 0);
    EXPECT_EQ(f.strictly_negative, 0);
    auto fs = named_kahler_target("fubini-study");
    EXPECT_GT(strong_negativity_test(kahler_curvature_1d(fs.metric, cplx(0.5, 0.5)), 1000, 3).violations, 0);
}

TEST(StrongNegativity, NonHermitianTensorRejected)
{
    KahlerCurvature kc(1);
    kc(0, 0, 0, 0) = cplx(-1, 0.5);
    EXPECT_THROW(strong_negativity_test(kc, 10), InvariantError);
}
