#pragma once

// Leaf-space projections C -> (k+2)-pod for the quadratic differential z^k dz^2.
// Sector j is centred on arg z = 2 pi j/(k+2) and bounded by the critical leaves at
// arg z = (2j+1) pi/(k+2); sector 0 contains the positive real axis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "npc/domain.hpp"
#include "npc/errors.hpp"
#include "npc/harmonic_solver.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

struct FoliationSpec {
    int k = 1;
    double center_x = 0.0;
    double center_y = 0.0;
    double half_width = 1.0;
    int resolution = 33;
    double jitter = 1.0 / 7.0; // fraction of the grid step
    unsigned seed = 7;

    int arms() const { return k + 2; }
    double step() const { return 2.0 * half_width / (resolution - 1); }

    void validate() const
    {
        if (k < 1)
            throw UsageError("foliation order k must be >= 1");
        if (resolution < 3)
            throw UsageError("foliation grid resolution must be >= 3");
        if (!(half_width > 0.0))
            throw UsageError("foliation window must have positive size");
        if (jitter < 0.0 || jitter >= 0.5)
            throw UsageError("jitter must lie in [0, 0.5)");
    }
};

inline int sector_of(int k, std::complex<double> z)
{
    if (z == 0.0)
        return 0;
    const int n = k + 2;
    double a = std::arg(z) * n / (2.0 * std::numbers::pi);
    int j = static_cast<int>(std::lround(a));
    return ((j % n) + n) % n;
}

/// w = (2/(k+2)) z^{(k+2)/2}, branch chosen so that Re w >= 0 on the sector of z.
inline std::complex<double> natural_parameter(const FoliationSpec& spec, std::complex<double> z)
{
    if (spec.k < 1)
        throw UsageError("foliation order k must be >= 1");
    if (z == 0.0)
        return 0.0;
    const int n = spec.arms();
    const double pi = std::numbers::pi;
    double phi = std::arg(z) - 2.0 * pi * sector_of(spec.k, z) / n;
    phi = std::remainder(phi, 2.0 * pi);
    double p = 0.5 * n;
    return std::polar(2.0 / n * std::pow(std::abs(z), p), p * phi);
}

inline PodPoint project_to_pod(const FoliationSpec& spec, std::complex<double> z)
{
    auto p = make_pod_point(sector_of(spec.k, z), std::abs(natural_parameter(spec, z).real()));
    return std::get<PodPoint>(p);
}

/// Angles of the critical leaves, in [0, 2 pi).
inline std::vector<double> critical_ray_angles(int k)
{
    std::vector<double> out;
    for (int j = 0; j < k + 2; ++j)
        out.push_back((2 * j + 1) * std::numbers::pi / (k + 2));
    return out;
}

inline double distance_to_critical_rays(int k, std::complex<double> z)
{
    double best = std::numeric_limits<double>::infinity();
    for (double a : critical_ray_angles(k)) {
        std::complex<double> e = std::polar(1.0, a);
        double t = std::max(0.0, (z * std::conj(e)).real());
        best = std::min(best, std::abs(z - t * e));
    }
    return best;
}

struct FoliationGrid {
    DomainGraph graph;
    std::vector<std::complex<double>> points;
    DiscreteMap map;
    double step = 0.0;
};

/// Rectangle grid over the window, jittered in a checkerboard pattern along a seed-chosen direction,
/// with u sampled at every vertex.
inline FoliationGrid sample_foliation(const FoliationSpec& spec)
{
    spec.validate();
    FoliationGrid g;
    const int n = spec.resolution;
    g.step = spec.step();
    g.graph = build_grid_domain(GridShape::rectangle, n);
    std::mt19937_64 rng(spec.seed);
    double angle = std::uniform_real_distribution<double>(0.1, 1.4)(rng);
    std::complex<double> shift = std::polar(spec.jitter * g.step, angle);
    g.map = DiscreteMap{NpcSpace::pod(spec.arms()), {}};
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            std::complex<double> z(spec.center_x - spec.half_width + i * g.step,
                                   spec.center_y - spec.half_width + j * g.step);
            z += ((i + j) % 2 == 0) ? shift : -shift;
            g.points.push_back(z);
            g.graph.vertices[j * n + i].position = std::array<double, 2>{z.real(), z.imag()};
            g.map.values.push_back(project_to_pod(spec, z));
        }
    return g;
}

struct HarmonicityResidual {
    double residual = 0.0; // max pod displacement under local_replace
    double step = 0.0;
    int vertices = 0;      // interior vertices that were measured
};

/// Interior vertices closer than `exclusion` grid steps to a critical leaf are skipped.
inline HarmonicityResidual tree_harmonicity_residual(const FoliationSpec& spec, double exclusion = 3.0)
{
    auto g = sample_foliation(spec);
    auto stars = detail::build_stars(g.graph, g.map.target, nullptr);
    HarmonicityResidual r;
    r.step = g.step;
    for (int v = 0; v < g.graph.vertex_count(); ++v) {
        if (g.graph.is_boundary(v))
            continue;
        if (distance_to_critical_rays(spec.k, g.points[v]) < exclusion * g.step)
            continue;
        auto moved = detail::star_replace(g.map.target, stars[v], g.map.values, g.map.values[v], 1e-14);
        r.residual = std::max(r.residual, distance(g.map.target, moved, g.map.values[v]));
        ++r.vertices;
    }
    return r;
}

/// Vertices mapped to the pod origin or joined by an edge to a vertex on another ray.
inline std::vector<int> singular_locus(const FoliationGrid& g)
{
    const int nv = g.graph.vertex_count();
    std::vector<char> mark(nv, 0);
    for (int v = 0; v < nv; ++v)
        if (std::get<PodPoint>(g.map.values[v]).radius == 0.0)
            mark[v] = 1;
    for (const auto& e : g.graph.edges) {
        const auto& a = std::get<PodPoint>(g.map.values[e.u]);
        const auto& b = std::get<PodPoint>(g.map.values[e.v]);
        if (a.ray != b.ray && a.radius > 0.0 && b.radius > 0.0)
            mark[e.u] = mark[e.v] = 1;
    }
    std::vector<int> out;
    for (int v = 0; v < nv; ++v)
        if (mark[v])
            out.push_back(v);
    return out;
}

/// Hausdorff distance between the locus and the critical rays clipped to the window shrunk by one step.
inline double locus_hausdorff_distance(const FoliationSpec& spec, const FoliationGrid& g, const std::vector<int>& locus)
{
    if (locus.empty())
        return std::numeric_limits<double>::infinity();
    double forward = 0.0;
    for (int v : locus)
        forward = std::max(forward, distance_to_critical_rays(spec.k, g.points[v]));
    const double lo_x = spec.center_x - spec.half_width + g.step, hi_x = spec.center_x + spec.half_width - g.step;
    const double lo_y = spec.center_y - spec.half_width + g.step, hi_y = spec.center_y + spec.half_width - g.step;
    auto inside = [&](std::complex<double> z) {
        return z.real() >= lo_x && z.real() <= hi_x && z.imag() >= lo_y && z.imag() <= hi_y;
    };
    double reach = std::abs(std::complex<double>(spec.center_x, spec.center_y)) + std::sqrt(2.0) * spec.half_width;
    double backward = 0.0;
    for (double a : critical_ray_angles(spec.k)) {
        std::complex<double> e = std::polar(1.0, a);
        for (double t = 0.0; t <= reach; t += g.step / 8) {
            std::complex<double> z = t * e;
            if (!inside(z))
                continue;
            double best = std::numeric_limits<double>::infinity();
            for (int v : locus)
                best = std::min(best, std::abs(g.points[v] - z));
            backward = std::max(backward, best);
        }
    }
    return std::max(forward, backward);
}

} // namespace npc
