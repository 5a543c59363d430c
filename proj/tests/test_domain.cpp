#include <gtest/gtest.h>

#include <sstream>

#include "npc/domain.hpp"
#include "npc/harmonic_solver.hpp"

using namespace npc;

namespace {

CMat diag2(double a, double b)
{
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

Representation spd_axis_rep()
{
    return Representation(NpcSpace::spd(2), {{"A", LinearAction{diag2(2, 0.5)}}});
}

} // namespace

TEST(Word, ParsePrintInverse)
{
    auto w = Word::parse("A*B^-1*A");
    ASSERT_EQ(w.letters.size(), 3u);
    EXPECT_EQ(w.letters[1].generator, "B");
    EXPECT_EQ(w.letters[1].exponent, -1);
    EXPECT_EQ(w.str(), "A*B^-1*A");
    EXPECT_EQ(w.inverse().str(), "A^-1*B*A^-1");
    EXPECT_THROW(Word::parse("A**B"), UsageError);
    EXPECT_THROW(Word::parse("A^2"), UsageError);
}

TEST(Grid, Interval)
{
    auto d = build_grid_domain(GridShape::interval, 3);
    ASSERT_EQ(d.vertex_count(), 3);
    ASSERT_EQ(d.edges.size(), 2u);
    EXPECT_EQ(d.edges[0].u, 0);
    EXPECT_EQ(d.edges[0].v, 1);
    EXPECT_EQ(d.edges[1].u, 1);
    EXPECT_EQ(d.edges[1].v, 2);
    EXPECT_EQ(d.boundary, (std::vector<bool>{true, false, true}));
}

TEST(Grid, CycleAndTorus)
{
    auto c = build_grid_domain(GridShape::circle, 7);
    EXPECT_EQ(c.vertex_count(), 7);
    EXPECT_EQ(c.edges.size(), 7u);
    EXPECT_FALSE(c.has_boundary());
    auto t = build_grid_domain(GridShape::torus, 5);
    EXPECT_EQ(t.vertex_count(), 25);
    EXPECT_EQ(t.edges.size(), 50u);
    auto adj = incidence_lists(t);
    for (const auto& a : adj)
        EXPECT_EQ(a.size(), 4u);
    EXPECT_FALSE(t.has_boundary());
}

TEST(Grid, RectangleAndDisk)
{
    auto r = build_grid_domain(GridShape::rectangle, 4);
    EXPECT_EQ(r.vertex_count(), 16);
    EXPECT_EQ(std::count(r.boundary.begin(), r.boundary.end(), true), 12);
    auto adj = incidence_lists(r);
    for (int v = 0; v < r.vertex_count(); ++v) {
        if (!r.is_boundary(v)) {
            EXPECT_EQ(adj[v].size(), 4u);
        }
    }
    auto disk = build_grid_domain(GridShape::disk, 9);
    auto dadj = incidence_lists(disk);
    for (int v = 0; v < disk.vertex_count(); ++v) {
        if (!disk.is_boundary(v)) {
            EXPECT_EQ(dadj[v].size(), 4u);
        }
    }
    EXPECT_TRUE(validate_domain(disk).ok);
}

TEST(Grid, ResolutionTooSmall)
{
    EXPECT_THROW(build_grid_domain(GridShape::interval, 1), UsageError);
}

TEST(Grid, DefaultMeasuresHalfIncidentWeight)
{
    auto d = build_grid_domain(GridShape::interval, 4);
    EXPECT_DOUBLE_EQ(d.vertices[0].measure, 0.5);
    EXPECT_DOUBLE_EQ(d.vertices[1].measure, 1.0);
}

TEST(Twisted, CycleGetsOneTwistedEdge)
{
    auto rep = spd_axis_rep();
    auto d = twisted_cycle(6, rep, "A");
    int twisted = 0;
    for (const auto& e : d.edges)
        if (e.twist) {
            ++twisted;
            EXPECT_EQ(e.u, 5);
            EXPECT_EQ(e.v, 0);
            EXPECT_EQ(e.twist->str(), "A");
        }
    EXPECT_EQ(twisted, 1);
    EXPECT_TRUE(validate_domain(d, &rep).ok);
}

TEST(Twisted, UnknownGeneratorRejected)
{
    auto rep = spd_axis_rep();
    auto base = build_grid_domain(GridShape::circle, 5);
    EXPECT_THROW(build_twisted_domain(base, rep, std::vector<std::string>{"B"}), UsageError);
}

TEST(Twisted, NonCommutingTorusRelationRejected)
{
    Eigen::Matrix2d a, b;
    a << 2, 0, 0, 0.5;
    b << 1, 1, 0, 1;
    std::map<std::string, IsometryRep> gens{{"A", Mobius{a}}, {"B", Mobius{b}}};
    EXPECT_THROW(Representation(NpcSpace::hyperbolic(), gens, {Word::parse("A*B*A^-1*B^-1")}), InvariantError);
    Eigen::Matrix2d c;
    c << 4, 0, 0, 0.25;
    std::map<std::string, IsometryRep> commuting{{"A", Mobius{a}}, {"B", Mobius{c}}};
    EXPECT_NO_THROW(Representation(NpcSpace::hyperbolic(), commuting, {Word::parse("A*B*A^-1*B^-1")}));
}

TEST(Twisted, IdentityRepMatchesPlainTorus)
{
    auto s = NpcSpace::spd(2);
    auto rep = Representation::trivial(s, {"A", "B"});
    auto base = build_grid_domain(GridShape::torus, 4);
    auto tw = build_twisted_domain(base, rep, std::vector<std::string>{"A", "B"});
    std::mt19937_64 rng(1);
    DiscreteMap f{s, {}};
    for (int v = 0; v < base.vertex_count(); ++v)
        f.values.push_back(sample_point(s, rng));
    EXPECT_NEAR(energy(tw, f, &rep), energy(base, f), 1e-10);
}

TEST(Twisted, EnergyMatchesUnrolledCover)
{
    // A twisted N-cycle carries the energy of one period of the periodic lift on the line.
    auto s = NpcSpace::hyperbolic();
    Eigen::Matrix2d g;
    g << 2, 1, 1, 1;
    Representation rep(s, {{"A", Mobius{g}}});
    const int n = 5;
    auto d = twisted_cycle(n, rep, "A");
    std::mt19937_64 rng(2);
    DiscreteMap f{s, {}};
    for (int v = 0; v < n; ++v)
        f.values.push_back(sample_point(s, rng));
    for (int periods = 1; periods <= 3; ++periods) {
        // Lift: vertex v in period k carries A^k f(v); the wrap edge joins (n-1, k) to (0, k+1).
        std::vector<PointRep> lift;
        IsometryRep acc = identity_isometry(s);
        for (int k = 0; k <= periods; ++k) {
            for (int v = 0; v < n; ++v)
                lift.push_back(isometry_apply(s, acc, f.values[v]));
            acc = compose(s, acc, rep.generator("A"));
        }
        double e = 0.0;
        for (int i = 0; i < periods * n; ++i) {
            double dist = distance(s, lift[i], lift[i + 1]);
            e += 0.5 * dist * dist;
        }
        EXPECT_NEAR(e, periods * energy(d, f, &rep), 1e-10);
    }
}

TEST(Validate, FlagsProblems)
{
    EXPECT_TRUE(validate_domain(build_grid_domain(GridShape::interval, 3)).ok);
    auto neg = build_grid_domain(GridShape::interval, 3);
    neg.edges[0].weight = -1.0;
    EXPECT_FALSE(validate_domain(neg).ok);
    auto split = build_grid_domain(GridShape::interval, 4);
    split.edges.erase(split.edges.begin() + 1);
    auto diag = validate_domain(split);
    EXPECT_FALSE(diag.ok);
    EXPECT_FALSE(diag.connected);
}

TEST(GraphFormat, RoundTripIsByteStable)
{
    auto rep = spd_axis_rep();
    auto d = twisted_cycle(4, rep, "A");
    d.vertices[2].measure = 0.1;
    std::ostringstream a;
    write_graph(a, d);
    std::istringstream in(a.str());
    auto back = read_graph(in);
    std::ostringstream b;
    write_graph(b, back);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, 12), "npcgraph v1\n");
    EXPECT_NE(a.str().find("twist=A"), std::string::npos);
}

TEST(GraphFormat, RejectsGarbage)
{
    std::istringstream bad("npcgraph v2\n");
    EXPECT_THROW(read_graph(bad), UsageError);
    std::istringstream bad_edge("npcgraph v1\nV 0 1\nE 0 7 1\n");
    EXPECT_THROW(read_graph(bad_edge), UsageError);
}
