#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "npc/foliation.hpp"

using namespace npc;

namespace {

constexpr double kPi = std::numbers::pi;

FoliationSpec spec_k(int k, int res)
{
    FoliationSpec s;
    s.k = k;
    s.resolution = res;
    return s;
}

} // namespace

TEST(NaturalParameter, Examples)
{
    FoliationSpec s;
    EXPECT_NEAR(std::abs(natural_parameter(s, 1.0) - 2.0 / 3.0), 0.0, 1e-15);
    EXPECT_EQ(natural_parameter(s, 0.0), 0.0);
    // Principal value is -2/3; the sector-1 branch flips it.
    auto w = natural_parameter(s, std::polar(1.0, 2 * kPi / 3));
    EXPECT_NEAR(std::abs(w - 2.0 / 3.0), 0.0, 1e-14);
    for (int k : {1, 2, 3})
        for (double r : {0.3, 1.0, 2.5})
            for (double a : {0.1, 1.7, -2.9}) {
                FoliationSpec sk = spec_k(k, 9);
                auto z = std::polar(r, a);
                EXPECT_NEAR(std::abs(natural_parameter(sk, z)), 2.0 / (k + 2) * std::pow(r, 0.5 * (k + 2)), 1e-12);
                EXPECT_GE(natural_parameter(sk, z).real(), -1e-15);
            }
    EXPECT_THROW(natural_parameter(spec_k(0, 9), 1.0), UsageError);
}

TEST(NaturalParameter, SquareMatchesDifferential)
{
    // (dw/dz)^2 = z^k inside a sector.
    for (int k : {1, 2}) {
        FoliationSpec s = spec_k(k, 9);
        std::complex<double> z = std::polar(0.8, 0.2), h = 1e-6;
        auto dw = (natural_parameter(s, z + h) - natural_parameter(s, z - h)) / (2.0 * h);
        EXPECT_NEAR(std::abs(dw * dw - std::pow(z, k)), 0.0, 1e-8);
    }
}

TEST(ProjectToPod, ExamplesAndRotation)
{
    FoliationSpec s;
    auto o = project_to_pod(s, 0.0);
    EXPECT_EQ(o.radius, 0.0);
    auto p = project_to_pod(s, 1.0);
    EXPECT_EQ(p.ray, 0);
    EXPECT_NEAR(p.radius, 2.0 / 3.0, 1e-15);
    for (int k : {1, 2}) {
        FoliationSpec sk = spec_k(k, 9);
        int n = k + 2;
        for (int shift : {1, 2}) {
            auto rot = std::polar(1.0, 2 * kPi * shift / n);
            for (double a : {0.05, 0.9, 2.2, -1.3}) {
                auto z = std::polar(1.3, a);
                auto u = project_to_pod(sk, z), v = project_to_pod(sk, rot * z);
                EXPECT_EQ(v.ray, (u.ray + shift) % n);
                EXPECT_NEAR(v.radius, u.radius, 1e-9);
            }
        }
    }
}

TEST(ProjectToPod, CriticalLeavesMapToOrigin)
{
    FoliationSpec s;
    for (double a : critical_ray_angles(1))
        EXPECT_LE(project_to_pod(s, std::polar(0.7, a)).radius, 1e-14);
    EXPECT_NEAR(critical_ray_angles(1)[1], kPi, 1e-15);
}

TEST(ProjectToPod, DistanceCompatibilityInSector)
{
    FoliationSpec s;
    auto pod = NpcSpace::pod(3);
    for (double a1 : {-0.9, 0.0, 0.5})
        for (double a2 : {-0.3, 0.8}) {
            auto z1 = std::polar(1.1, a1), z2 = std::polar(0.6, a2);
            double d = distance(pod, project_to_pod(s, z1), project_to_pod(s, z2));
            double expect = std::abs(natural_parameter(s, z1).real() - natural_parameter(s, z2).real());
            EXPECT_NEAR(d, expect, 1e-10);
        }
}

TEST(Harmonicity, InsideOneSectorIsSecondOrder)
{
    double prev = 0.0;
    for (int res : {9, 17, 33}) {
        FoliationSpec s;
        s.center_x = 1.0;
        s.half_width = 0.3;
        s.resolution = res;
        s.jitter = 0.0;
        auto r = tree_harmonicity_residual(s, 0.0);
        EXPECT_GT(r.vertices, 0);
        if (prev > 0.0) {
            EXPECT_GE(std::log2(prev / r.residual), 1.8);
        }
        prev = r.residual;
    }
}

TEST(Harmonicity, FullWindowFirstOrderAwayFromLeaves)
{
    for (int k : {1, 2}) {
        double prev = 0.0;
        for (int res : {33, 65, 129}) {
            auto r = tree_harmonicity_residual(spec_k(k, res));
            if (prev > 0.0) {
                EXPECT_NEAR(prev / r.residual, 2.0, 0.4) << "k=" << k << " res=" << res;
            }
            prev = r.residual;
        }
    }
}

TEST(SingularLocus, ConvergesToCriticalRays)
{
    for (int k : {1, 2}) {
        double prev = 0.0;
        for (int res : {33, 65, 129}) {
            auto s = spec_k(k, res);
            auto g = sample_foliation(s);
            auto locus = singular_locus(g);
            for (int v : locus)
                EXPECT_LE(distance_to_critical_rays(k, g.points[v]), 2 * g.step);
            double h = locus_hausdorff_distance(s, g, locus);
            if (prev > 0.0) {
                EXPECT_NEAR(prev / h, 2.0, 0.4) << "k=" << k << " res=" << res;
            }
            prev = h;
        }
    }
}

TEST(SingularLocus, FarFieldExcluded)
{
    FoliationSpec s;
    s.center_x = 3.0;
    s.half_width = 0.5;
    auto g = sample_foliation(s);
    EXPECT_TRUE(singular_locus(g).empty());
    EXPECT_THROW(sample_foliation(spec_k(1, 2)), UsageError);
}
