#pragma once

// Discrete energy, single-star Dirichlet replacement, and Gauss-Seidel relaxation to harmonic maps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "npc/barycenter.hpp"
#include "npc/domain.hpp"
#include "npc/errors.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

enum class SweepOrder { sequential, red_black };

inline SweepOrder parse_sweep_order(std::string_view s)
{
    if (s == "sequential" || s == "gauss-seidel")
        return SweepOrder::sequential;
    if (s == "red-black")
        return SweepOrder::red_black;
    throw UsageError("unknown sweep order: " + std::string(s));
}

struct SolveConfig {
    double tol = 1e-8;       // max vertex displacement per sweep, in target distance
    int max_sweeps = 100000;
    SweepOrder order = SweepOrder::sequential;
    unsigned long seed = 0;
    int threads = 1;          // red-black only
    double divergence_bound = 1e3; // equivariant: max distance any value may travel from the initial map
    double karcher_tol = 1e-12;

    void validate() const
    {
        if (!(tol > 0.0))
            throw UsageError("solver tolerance must be positive");
        if (max_sweeps < 1)
            throw UsageError("max_sweeps must be >= 1");
        if (threads < 1)
            throw UsageError("threads must be >= 1");
        if (!(divergence_bound > 0.0))
            throw UsageError("divergence bound must be positive");
    }
};

struct SweepRecord {
    int sweep = 0;
    double energy = 0.0;
    double max_disp = 0.0;
};

struct SolveTrace {
    std::vector<SweepRecord> records; // record 0 is the initial map (max_disp 0)
    std::string status = "running";
    bool monotone = true;
    double worst_increase = 0.0; // largest E_{k+1} - E_k observed, relative to E_k
};

struct SolveResult {
    DiscreteMap map;
    SolveTrace trace;
};

class SolveError : public ConvergenceError {
public:
    SolveError(const std::string& what, DiscreteMap last, SolveTrace trace)
        : ConvergenceError(what), last_(std::move(last)), trace_(std::move(trace))
    {
    }
    const DiscreteMap& last() const { return last_; }
    const SolveTrace& trace() const { return trace_; }

private:
    DiscreteMap last_;
    SolveTrace trace_;
};

class DivergenceError : public SolveError {
public:
    using SolveError::SolveError;
};

namespace detail {

struct StarEntry {
    int neighbor = 0;
    double weight = 0.0;
    std::optional<IsometryRep> twist; // applied to the neighbor's value
};

/// Per-vertex twisted neighbourhoods with the twist words resolved once.
inline std::vector<std::vector<StarEntry>> build_stars(const DomainGraph& d, const NpcSpace& s,
                                                       const Representation* rep)
{
    if (d.has_twists() && !rep)
        throw UsageError("domain has twisted edges but no representation was given");
    if (rep && !(rep->space() == s))
        throw UsageError("representation acts on a different target space");
    auto adj = incidence_lists(d);
    std::vector<std::vector<StarEntry>> stars(adj.size());
    for (std::size_t v = 0; v < adj.size(); ++v)
        for (const auto& inc : adj[v]) {
            StarEntry e{inc.neighbor, inc.weight, std::nullopt};
            if (inc.twist)
                e.twist = rep->word_isometry(*inc.twist);
            stars[v].push_back(std::move(e));
        }
    return stars;
}

inline void check_map(const DomainGraph& d, const DiscreteMap& f)
{
    if (static_cast<int>(f.values.size()) != d.vertex_count())
        throw UsageError("map does not cover the domain");
}

inline PointRep star_replace(const NpcSpace& s, const std::vector<StarEntry>& star, const std::vector<PointRep>& values,
                             const PointRep& current, double karcher_tol)
{
    if (star.empty())
        return current;
    std::vector<PointRep> pts;
    std::vector<double> wts;
    pts.reserve(star.size());
    wts.reserve(star.size());
    for (const auto& e : star) {
        pts.push_back(e.twist ? isometry_apply(s, *e.twist, values[e.neighbor]) : values[e.neighbor]);
        wts.push_back(e.weight);
    }
    KarcherOptions opt;
    opt.tol = karcher_tol;
    if (pts.size() > 2 && s.kind != SpaceKind::euclidean && s.kind != SpaceKind::pod)
        opt.init = current;
    return karcher_mean(s, WeightedCloud::normalized(std::move(pts), std::move(wts)), opt).mean;
}

/// Greedy colouring of the vertices to update, so that no two same-coloured vertices are adjacent.
inline std::vector<std::vector<int>> colour_classes(const std::vector<std::vector<StarEntry>>& stars,
                                                    const std::vector<int>& active)
{
    std::vector<int> colour(stars.size(), -1);
    std::vector<std::vector<int>> classes;
    for (int v : active) {
        std::vector<bool> used(classes.size() + 1, false);
        for (const auto& e : stars[v])
            if (e.neighbor != v && colour[e.neighbor] >= 0)
                used[colour[e.neighbor]] = true;
        int c = 0;
        while (used[c])
            ++c;
        colour[v] = c;
        if (c == static_cast<int>(classes.size()))
            classes.emplace_back();
        classes[c].push_back(v);
    }
    return classes;
}

} // namespace detail

/// Twisted-edge lengths d(f(u), rho(twist) f(v)) in edge order.
inline std::vector<double> edge_lengths(const DomainGraph& d, const DiscreteMap& f, const Representation* rep = nullptr)
{
    detail::check_map(d, f);
    std::vector<double> out;
    for (const auto& e : d.edges) {
        PointRep fv = f.values[e.v];
        if (e.twist && !e.twist->empty()) {
            if (!rep)
                throw UsageError("domain has twisted edges but no representation was given");
            fv = isometry_apply(f.target, rep->word_isometry(*e.twist), fv);
        }
        out.push_back(distance(f.target, f.values[e.u], fv));
    }
    return out;
}

/// E = 1/2 sum_edges w_uv d^2(f(u), rho(twist) f(v)).
inline double energy(const DomainGraph& d, const DiscreteMap& f, const Representation* rep = nullptr)
{
    detail::check_map(d, f);
    double acc = 0.0;
    auto lengths = edge_lengths(d, f, rep);
    for (std::size_t i = 0; i < lengths.size(); ++i)
        acc += 0.5 * d.edges[i].weight * lengths[i] * lengths[i];
    return acc;
}

/// Minimizer of the star energy at `vertex`: the weighted Karcher mean of its twisted neighbour values.
inline PointRep local_replace(const DomainGraph& d, const DiscreteMap& f, int vertex, const Representation* rep = nullptr,
                              double karcher_tol = 1e-12)
{
    detail::check_map(d, f);
    if (vertex < 0 || vertex >= d.vertex_count())
        throw UsageError("vertex out of range");
    if (d.is_boundary(vertex))
        throw UsageError("local_replace needs an interior vertex");
    auto stars = detail::build_stars(d, f.target, rep);
    return detail::star_replace(f.target, stars[vertex], f.values, f.values[vertex], karcher_tol);
}

/// Norm of sum_u w_uv log_{f(v)} rho f(u) at interior vertices, 0 on the boundary. Pod targets use
/// (sum w) times the distance to the star mean.
inline std::vector<double> discrete_tension(const DomainGraph& d, const DiscreteMap& f, const Representation* rep = nullptr)
{
    detail::check_map(d, f);
    const auto& s = f.target;
    auto stars = detail::build_stars(d, s, rep);
    std::vector<double> out(stars.size(), 0.0);
    for (std::size_t v = 0; v < stars.size(); ++v) {
        if (d.is_boundary(static_cast<int>(v)) || stars[v].empty())
            continue;
        if (!s.is_manifold()) {
            double total = 0.0;
            for (const auto& e : stars[v])
                total += e.weight;
            out[v] = total * distance(s, f.values[v], detail::star_replace(s, stars[v], f.values, f.values[v], 1e-14));
            continue;
        }
        TangentRep acc = zero_tangent(s, f.values[v]);
        for (const auto& e : stars[v]) {
            PointRep q = e.twist ? isometry_apply(s, *e.twist, f.values[e.neighbor]) : f.values[e.neighbor];
            acc = tangent_combine(1.0, acc, e.weight, log_map(s, f.values[v], q));
        }
        out[v] = tangent_norm(s, acc);
    }
    return out;
}

namespace detail {

inline SolveResult relax(const DomainGraph& d, DiscreteMap f, const Representation* rep, const SolveConfig& cfg,
                         bool equivariant)
{
    cfg.validate();
    const NpcSpace s = f.target;
    auto stars = build_stars(d, s, rep);
    for (int v = 0; v < d.vertex_count(); ++v)
        if (!d.is_boundary(v) && stars[v].empty())
            throw UsageError("vertex " + std::to_string(v) + " has no edges");

    std::vector<int> active;
    for (int v = 0; v < d.vertex_count(); ++v)
        if (!d.is_boundary(v))
            active.push_back(v);
    std::vector<std::vector<int>> classes;
    if (cfg.order == SweepOrder::red_black)
        classes = colour_classes(stars, active);
    else
        classes.push_back(active);

    const DiscreteMap initial = f;
    SolveTrace trace;
    double e_prev = energy(d, f, rep);
    trace.records.push_back({0, e_prev, 0.0});

    std::vector<double> disp(d.vertices.size(), 0.0);
    auto update = [&](int v) {
        PointRep next = star_replace(s, stars[v], f.values, f.values[v], cfg.karcher_tol);
        disp[v] = distance(s, f.values[v], next);
        f.values[v] = std::move(next);
    };

    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (const auto& cls : classes) {
            if (cfg.order == SweepOrder::sequential || cfg.threads == 1 || cls.size() < 2) {
                for (int v : cls)
                    update(v);
                continue;
            }
            // Same-coloured vertices share no edge, so their updates are independent.
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errs(cfg.threads);
            for (int t = 0; t < cfg.threads; ++t)
                pool.emplace_back([&, t] {
                    try {
                        for (std::size_t i = t; i < cls.size(); i += cfg.threads)
                            update(cls[i]);
                    } catch (...) {
                        errs[t] = std::current_exception();
                    }
                });
            for (auto& th : pool)
                th.join();
            for (auto& e : errs)
                if (e)
                    std::rethrow_exception(e);
        }
        double max_disp = 0.0;
        for (int v : active)
            max_disp = std::max(max_disp, disp[v]);
        double e_now = energy(d, f, rep);
        trace.records.push_back({sweep, e_now, max_disp});
        double increase = e_prev > 0.0 ? (e_now - e_prev) / e_prev : e_now - e_prev;
        trace.worst_increase = std::max(trace.worst_increase, increase);
        if (e_now > e_prev + 1e-10 * e_prev)
            trace.monotone = false;
        e_prev = e_now;

        if (equivariant) {
            double travelled = 0.0;
            for (int v = 0; v < d.vertex_count(); ++v)
                travelled = std::max(travelled, distance(s, initial.values[v], f.values[v]));
            if (travelled > cfg.divergence_bound) {
                trace.status = "diverged";
                throw DivergenceError("equivariant relaxation diverged (values moved " + std::to_string(travelled) +
                                          " from the initial map): a harmonic map needs a representation that "
                                          "cannot fix a point at infinity",
                                      f, trace);
            }
        }
        if (max_disp <= cfg.tol) {
            trace.status = "converged";
            return {std::move(f), std::move(trace)};
        }
    }
    trace.status = "max_sweeps";
    throw SolveError("relaxation did not converge within " + std::to_string(cfg.max_sweeps) + " sweeps", f, trace);
}

} // namespace detail

/// Relaxes `init` to the harmonic map with the given boundary values (boundary vertices are held fixed).
inline SolveResult solve_dirichlet(const DomainGraph& d, const std::map<int, PointRep>& boundary_values,
                                   const DiscreteMap& init, const SolveConfig& cfg = {},
                                   const Representation* rep = nullptr)
{
    detail::check_map(d, init);
    if (!d.has_boundary())
        throw UsageError("dirichlet problem needs a domain with boundary");
    DiscreteMap f = init;
    for (int v = 0; v < d.vertex_count(); ++v) {
        if (!d.is_boundary(v))
            continue;
        auto it = boundary_values.find(v);
        if (it == boundary_values.end())
            throw UsageError("no boundary value for vertex " + std::to_string(v));
        validate_point(f.target, it->second);
        if (distance(f.target, it->second, f.values[v]) > 1e-12)
            throw UsageError("initial map disagrees with the boundary data at vertex " + std::to_string(v));
        f.values[v] = it->second;
    }
    for (const auto& [v, p] : boundary_values)
        if (v < 0 || v >= d.vertex_count() || !d.is_boundary(v))
            throw UsageError("boundary value given for non-boundary vertex " + std::to_string(v));
    return detail::relax(d, std::move(f), rep, cfg, false);
}

/// Relaxes an equivariant map on a boundaryless twisted domain.
inline SolveResult solve_equivariant(const DomainGraph& d, const Representation& rep, const DiscreteMap& init,
                                     const SolveConfig& cfg = {})
{
    detail::check_map(d, init);
    if (d.has_boundary())
        throw UsageError("equivariant problem needs a domain without boundary");
    for (const auto& e : d.edges)
        if (e.twist)
            for (const auto& l : e.twist->letters)
                if (!rep.has_generator(l.generator))
                    throw UsageError("generator '" + l.generator + "' is unknown to the representation");
    return detail::relax(d, init, &rep, cfg, true);
}

/// Initial map for a Dirichlet problem: boundary data, with each interior vertex copying the value of a
/// boundary vertex drawn from the seeded generator.
inline DiscreteMap dirichlet_initial_map(const DomainGraph& d, const NpcSpace& s,
                                         const std::map<int, PointRep>& boundary_values, unsigned long seed)
{
    if (boundary_values.empty())
        throw UsageError("no boundary values");
    std::vector<const PointRep*> pool;
    for (const auto& [v, p] : boundary_values)
        pool.push_back(&p);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    DiscreteMap f{s, std::vector<PointRep>(d.vertices.size())};
    for (int v = 0; v < d.vertex_count(); ++v) {
        auto it = boundary_values.find(v);
        f.values[v] = it != boundary_values.end() ? it->second : *pool[pick(rng)];
    }
    return f;
}

/// Initial map for an equivariant problem: the constant map at the basepoint, mollified over unit hop-balls.
inline DiscreteMap equivariant_initial_map(const DomainGraph& d, const Representation& rep)
{
    const NpcSpace& s = rep.space();
    return mollify(DiscreteMap::constant(s, d.vertex_count(), basepoint(s)), d, 1, &rep);
}

/// Samples of E(f_t) along the vertexwise geodesic interpolation f_t between two maps.
inline std::vector<std::pair<double, double>> energy_along_interpolation(const DomainGraph& d, const DiscreteMap& f0,
                                                                         const DiscreteMap& f1, int samples,
                                                                         const Representation* rep = nullptr)
{
    detail::check_map(d, f0);
    detail::check_map(d, f1);
    if (!(f0.target == f1.target))
        throw UsageError("maps have different targets");
    if (samples < 3)
        throw UsageError("need at least 3 interpolation samples");
    std::vector<std::pair<double, double>> out;
    for (int k = 0; k < samples; ++k) {
        double t = static_cast<double>(k) / (samples - 1);
        DiscreteMap ft = f0;
        for (int v = 0; v < d.vertex_count(); ++v)
            ft.values[v] = interpolate(f0.target, f0.values[v], f1.values[v], t);
        out.emplace_back(t, energy(d, ft, rep));
    }
    return out;
}

/// Largest edge energy w d^2 relative to the mean edge energy 2E/|edges|; 0 for a constant map.
inline double lipschitz_ratio(const DomainGraph& d, const DiscreteMap& f, const Representation* rep = nullptr)
{
    detail::check_map(d, f);
    if (d.edges.empty())
        return 0.0;
    double total = energy(d, f, rep);
    if (total <= 0.0)
        return 0.0;
    auto lengths = edge_lengths(d, f, rep);
    double worst = 0.0;
    for (std::size_t i = 0; i < lengths.size(); ++i)
        worst = std::max(worst, d.edges[i].weight * lengths[i] * lengths[i]);
    return worst / (2.0 * total / static_cast<double>(d.edges.size()));
}

} // namespace npc
