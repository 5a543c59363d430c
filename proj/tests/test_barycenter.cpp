#include <gtest/gtest.h>

#include <random>

#include "npc/barycenter.hpp"

using namespace npc;

namespace {

CMat diag2(double a, double b)
{
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

WeightedCloud random_cloud(const NpcSpace& s, std::mt19937_64& rng, int size)
{
    std::uniform_real_distribution<double> w(0.1, 1.0);
    std::vector<PointRep> pts;
    std::vector<double> wts;
    for (int i = 0; i < size; ++i) {
        pts.push_back(sample_point(s, rng, 1.5));
        wts.push_back(w(rng));
    }
    return WeightedCloud::normalized(pts, wts);
}

const std::vector<NpcSpace>& kinds()
{
    static const std::vector<NpcSpace> k{NpcSpace::euclidean(2), NpcSpace::hyperbolic(), NpcSpace::spd(2),
                                         NpcSpace::spd(3, true), NpcSpace::pod(3)};
    return k;
}

} // namespace

TEST(Cloud, Validation)
{
    EXPECT_THROW(WeightedCloud::normalized({}, {}), UsageError);
    EXPECT_THROW(WeightedCloud::normalized({Vec(Vec::Zero(1))}, {-1.0}), UsageError);
    WeightedCloud bad{{Vec(Vec::Zero(1)), Vec(Vec::Zero(1))}, {0.5, 0.6}};
    EXPECT_THROW(karcher_mean(NpcSpace::euclidean(1), bad), UsageError);
}

TEST(Karcher, EuclideanIsArithmeticMean)
{
    auto s = NpcSpace::euclidean(3);
    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
        auto c = random_cloud(s, rng, 7);
        Vec oracle = Vec::Zero(3);
        for (std::size_t i = 0; i < c.points.size(); ++i)
            oracle += c.weights[i] * std::get<Vec>(c.points[i]);
        EXPECT_LT((std::get<Vec>(karcher_mean(s, c).mean) - oracle).norm(), 1e-12);
    }
}

TEST(Karcher, SpdInversePairMeanIsIdentity)
{
    auto s = NpcSpace::spd(2);
    auto c = WeightedCloud::uniform({make_spd_point(diag2(2, 0.5)), make_spd_point(diag2(0.5, 2))});
    EXPECT_LT((std::get<CMat>(karcher_mean(s, c).mean) - CMat::Identity(2, 2)).norm(), 1e-12);
    // Forced through the fixed-point iteration as well.
    KarcherOptions opt;
    opt.init = make_spd_point(diag2(4, 0.25));
    EXPECT_LT((std::get<CMat>(karcher_mean(s, c, opt).mean) - CMat::Identity(2, 2)).norm(), 1e-9);
}

TEST(Karcher, PodSymmetricTripleIsOrigin)
{
    auto s = NpcSpace::pod(3);
    auto c = WeightedCloud::uniform({make_pod_point(0, 1), make_pod_point(1, 1), make_pod_point(2, 1)});
    auto m = std::get<PodPoint>(karcher_mean(s, c).mean);
    EXPECT_EQ(m.radius, 0.0);
    EXPECT_EQ(m.ray, 0);
}

TEST(Karcher, PodMatchesBruteForce)
{
    auto s = NpcSpace::pod(4);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 50; ++k) {
        auto c = random_cloud(s, rng, 5);
        auto m = karcher_mean(s, c).mean;
        double best = karcher_objective(s, c, m);
        for (int r = 0; r < 4; ++r)
            for (int i = 0; i <= 3000; ++i)
                EXPECT_LE(best, karcher_objective(s, c, make_pod_point(r, i * 1e-3)) + 1e-12);
    }
}

TEST(Karcher, TwoPointMidpoint)
{
    std::mt19937_64 rng(3);
    for (const auto& s : kinds()) {
        auto p = sample_point(s, rng), q = sample_point(s, rng);
        auto m = karcher_mean(s, WeightedCloud::uniform({p, q})).mean;
        EXPECT_NEAR(distance(s, m, interpolate(s, p, q, 0.5)), 0.0, 1e-10) << s.spec();
    }
}

TEST(Karcher, StationaryAndBelowInputs)
{
    std::mt19937_64 rng(4);
    for (const auto& s : kinds())
        for (int k = 0; k < 20; ++k) {
            auto c = random_cloud(s, rng, 6);
            auto res = karcher_mean(s, c);
            double value = karcher_objective(s, c, res.mean);
            for (const auto& p : c.points)
                EXPECT_LE(value, karcher_objective(s, c, p) + 1e-12) << s.spec();
            if (s.is_manifold() && s.kind != SpaceKind::euclidean) {
                TangentRep g = zero_tangent(s, res.mean);
                for (std::size_t i = 0; i < c.points.size(); ++i)
                    g = tangent_combine(1.0, g, c.weights[i], log_map(s, res.mean, c.points[i]));
                EXPECT_LE(tangent_norm(s, g), 1e-9) << s.spec();
            }
        }
}

TEST(Karcher, RestartsAgree)
{
    std::mt19937_64 rng(5);
    for (const auto& s : {NpcSpace::hyperbolic(), NpcSpace::spd(3)}) {
        auto c = random_cloud(s, rng, 5);
        KarcherOptions a, b;
        a.init = c.points[0];
        b.init = c.points[3];
        double gap = distance(s, karcher_mean(s, c, a).mean, karcher_mean(s, c, b).mean);
        EXPECT_LE(gap, 10 * a.tol);
    }
}

TEST(Karcher, ConvexityCertificate)
{
    std::mt19937_64 rng(6);
    for (const auto& s : kinds()) {
        auto c = random_cloud(s, rng, 5);
        auto q = karcher_mean(s, c).mean;
        double iq = karcher_objective(s, c, q);
        for (int k = 0; k < 50; ++k) {
            auto p = sample_point(s, rng);
            EXPECT_GE(karcher_objective(s, c, interpolate(s, q, p, 0.5)), iq - 1e-8) << s.spec();
        }
    }
}

TEST(Karcher, IsometryEquivariant)
{
    std::mt19937_64 rng(7);
    for (const auto& s : kinds()) {
        auto c = random_cloud(s, rng, 5);
        auto g = sample_isometry(s, rng);
        WeightedCloud moved = c;
        for (auto& p : moved.points)
            p = isometry_apply(s, g, p);
        auto lhs = karcher_mean(s, moved).mean;
        auto rhs = isometry_apply(s, g, karcher_mean(s, c).mean);
        EXPECT_NEAR(distance(s, lhs, rhs), 0.0, 1e-8) << s.spec();
    }
}

TEST(Karcher, NonConvergenceCarriesBestIterate)
{
    auto s = NpcSpace::spd(2);
    std::mt19937_64 rng(8);
    auto c = random_cloud(s, rng, 4);
    KarcherOptions opt;
    opt.max_iter = 0;
    opt.init = c.points[0];
    try {
        karcher_mean(s, c, opt);
        FAIL() << "expected KarcherError";
    } catch (const KarcherError& e) {
        EXPECT_GT(e.displacement(), 0.0);
        EXPECT_NO_THROW(validate_point(s, e.best()));
    }
}

TEST(Mollify, ConstantMapIsFixed)
{
    auto s = NpcSpace::hyperbolic();
    auto d = build_grid_domain(GridShape::rectangle, 4);
    auto f = DiscreteMap::constant(s, d.vertex_count(), HalfPlanePoint{0.3, 2.0});
    auto g = mollify(f, d, 1);
    for (const auto& v : g.values)
        EXPECT_NEAR(distance(s, v, f.values[0]), 0.0, 1e-12);
}

TEST(Mollify, EuclideanMatchesBallAverage)
{
    auto s = NpcSpace::euclidean(1);
    auto d = build_grid_domain(GridShape::interval, 6);
    DiscreteMap f{s, {}};
    for (int v = 0; v < 6; ++v)
        f.values.push_back(Vec(Vec::Constant(1, v * v)));
    auto g = mollify(f, d, 1);
    for (int v = 0; v < 6; ++v) {
        double num = 0.0, den = 0.0;
        for (int u = std::max(0, v - 1); u <= std::min(5, v + 1); ++u) {
            num += d.vertices[u].measure * u * u;
            den += d.vertices[u].measure;
        }
        EXPECT_NEAR(std::get<Vec>(g.values[v])(0), num / den, 1e-12);
    }
}

TEST(Mollify, LargeRadiusGivesGlobalMean)
{
    auto s = NpcSpace::spd(2);
    auto d = build_grid_domain(GridShape::interval, 5);
    std::mt19937_64 rng(9);
    DiscreteMap f{s, {}};
    for (int v = 0; v < 5; ++v)
        f.values.push_back(sample_point(s, rng, 1.0));
    auto g = mollify(f, d, 10);
    for (int v = 1; v < 5; ++v)
        EXPECT_NEAR(distance(s, g.values[v], g.values[0]), 0.0, 1e-9);
}

TEST(Mollify, DoesNotIncreaseSpread)
{
    auto s = NpcSpace::hyperbolic();
    auto d = build_grid_domain(GridShape::rectangle, 5);
    std::mt19937_64 rng(10);
    DiscreteMap f{s, {}};
    for (int v = 0; v < d.vertex_count(); ++v)
        f.values.push_back(sample_point(s, rng, 1.0));
    auto spread = [&](const DiscreteMap& m) {
        double out = 0.0;
        for (const auto& a : m.values)
            for (const auto& b : m.values)
                out = std::max(out, distance(s, a, b));
        return out;
    };
    EXPECT_LE(spread(mollify(f, d, 1)), spread(f) + 1e-9);
}

TEST(Mollify, CommutesWithTwists)
{
    // On a twisted cycle the mollified map must satisfy the same equivariance as its lift:
    // the value at the far copy of vertex 0 (through the twist) equals rho(A) applied to it.
    auto s = NpcSpace::spd(2);
    Representation rep(s, {{"A", LinearAction{diag2(2, 0.5)}}});
    const int n = 6;
    auto d = twisted_cycle(n, rep, "A");
    std::mt19937_64 rng(11);
    DiscreteMap f{s, {}};
    for (int v = 0; v < n; ++v)
        f.values.push_back(sample_point(s, rng, 1.0));
    auto g = mollify(f, d, 2, &rep);
    // Direct oracle at vertex 0: the hop-2 ball in the lift is {n-2, n-1 (one period back), 0, 1, 2}.
    IsometryRep back = inverse(s, rep.generator("A"));
    std::vector<PointRep> pts{isometry_apply(s, back, f.values[n - 2]), isometry_apply(s, back, f.values[n - 1]),
                              f.values[0], f.values[1], f.values[2]};
    std::vector<double> w(5, 1.0);
    auto oracle = karcher_mean(s, WeightedCloud::normalized(pts, w)).mean;
    EXPECT_NEAR(distance(s, g.values[0], oracle), 0.0, 1e-8);
    // Relabeling the whole map by the isometry commutes with mollification.
    auto h = sample_isometry(s, rng);
    DiscreteMap moved = f;
    for (auto& v : moved.values)
        v = isometry_apply(s, h, v);
    Representation conj(s, {{"A", compose(s, compose(s, h, rep.generator("A")), inverse(s, h))}});
    auto gm = mollify(moved, d, 2, &conj);
    for (int v = 0; v < n; ++v)
        EXPECT_NEAR(distance(s, gm.values[v], isometry_apply(s, h, g.values[v])), 0.0, 1e-8);
}

TEST(Mollify, RejectsZeroRadius)
{
    auto s = NpcSpace::euclidean(1);
    auto d = build_grid_domain(GridShape::interval, 3);
    EXPECT_THROW(mollify(DiscreteMap::constant(s, 3, Vec(Vec::Zero(1))), d, 0), UsageError);
}
