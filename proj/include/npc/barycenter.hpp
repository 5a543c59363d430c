#pragma once

// Weighted centers of mass (Karcher means) in NPC targets, and hop-ball mollification of maps.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "npc/domain.hpp"
#include "npc/errors.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

struct WeightedCloud {
    std::vector<PointRep> points;
    std::vector<double> weights; // positive, sum to 1

    /// Builds a cloud from positive raw weights, normalizing them to sum 1.
    static WeightedCloud normalized(std::vector<PointRep> points, std::vector<double> raw)
    {
        if (points.empty())
            throw UsageError("weighted cloud must be nonempty");
        if (points.size() != raw.size())
            throw UsageError("weighted cloud needs one weight per point");
        double total = 0.0;
        for (double w : raw) {
            if (!(w > 0.0) || !std::isfinite(w))
                throw UsageError("cloud weights must be positive");
            total += w;
        }
        for (double& w : raw)
            w /= total;
        return {std::move(points), std::move(raw)};
    }

    static WeightedCloud uniform(std::vector<PointRep> points)
    {
        std::vector<double> w(points.size(), 1.0);
        return normalized(std::move(points), std::move(w));
    }

    void validate() const
    {
        if (points.empty() || points.size() != weights.size())
            throw UsageError("invalid weighted cloud");
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0))
                throw UsageError("cloud weights must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw UsageError("cloud weights must sum to 1");
    }
};

struct KarcherOptions {
    double tol = 1e-10;
    int max_iter = 10000;
    std::optional<PointRep> init;
};

struct KarcherResult {
    PointRep mean;
    double displacement = 0.0; // |sum w_i log_Q p_i| at the returned Q (0 for closed forms)
    int iterations = 0;
};

class KarcherError : public ConvergenceError {
public:
    KarcherError(const std::string& what, PointRep best, double displacement)
        : ConvergenceError(what), best_(std::move(best)), displacement_(displacement)
    {
    }
    const PointRep& best() const { return best_; }
    double displacement() const { return displacement_; }

private:
    PointRep best_;
    double displacement_;
};

/// I(Q) = sum_i w_i d^2(p_i, Q).
inline double karcher_objective(const NpcSpace& s, const WeightedCloud& cloud, const PointRep& q)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        double d = distance(s, cloud.points[i], q);
        acc += cloud.weights[i] * d * d;
    }
    return acc;
}

namespace detail {

inline KarcherResult pod_mean(const NpcSpace& s, const WeightedCloud& cloud)
{
    // On ray r, Q = (r, x) with x >= 0 gives I = sum w (x - s_i)^2 with s_i the signed coordinate
    // (+radius on ray r, -radius elsewhere), minimized at x = max(0, sum w s_i).
    std::optional<PodPoint> best;
    double best_value = std::numeric_limits<double>::infinity();
    for (int r = 0; r < s.arms; ++r) {
        double mean = 0.0;
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            const auto& p = as_pod(s, cloud.points[i]);
            mean += cloud.weights[i] * (p.ray == r ? p.radius : -p.radius);
        }
        PodPoint cand = canonical_pod(r, std::max(0.0, mean));
        double value = karcher_objective(s, cloud, cand);
        if (value < best_value) { // strict: lowest ray wins ties
            best_value = value;
            best = cand;
        }
    }
    return {*best, 0.0, 1};
}

inline KarcherResult spd_mean(const NpcSpace& s, const WeightedCloud& cloud, const KarcherOptions& opt, CMat q)
{
    const double scale = std::sqrt(0.5 * s.n);
    double best_disp = std::numeric_limits<double>::infinity();
    CMat best = q;
    for (int it = 0; it <= opt.max_iter; ++it) {
        auto spec = linalg::positive_spectrum(q);
        CMat root = spec.apply([](double x) { return std::sqrt(x); });
        CMat inv_root = spec.apply([](double x) { return 1.0 / std::sqrt(x); });
        CMat step = CMat::Zero(s.n, s.n);
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            step += cloud.weights[i] * linalg::spd_log(inv_root * as_spd(s, cloud.points[i]) * inv_root);
        double disp = scale * step.norm();
        if (disp < best_disp) {
            best_disp = disp;
            best = q;
        }
        if (disp <= opt.tol)
            return {make_spd_point(q), disp, it};
        q = normalize_spd(root * linalg::sa_exp(step) * root);
    }
    throw KarcherError("karcher mean did not converge", make_spd_point(best), best_disp);
}

inline KarcherResult generic_mean(const NpcSpace& s, const WeightedCloud& cloud, const KarcherOptions& opt,
                                  PointRep q)
{
    double best_disp = std::numeric_limits<double>::infinity();
    PointRep best = q;
    for (int it = 0; it <= opt.max_iter; ++it) {
        TangentRep step = zero_tangent(s, q);
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            step = tangent_combine(1.0, step, cloud.weights[i], log_map(s, q, cloud.points[i]));
        double disp = tangent_norm(s, step);
        if (disp < best_disp) {
            best_disp = disp;
            best = q;
        }
        if (disp <= opt.tol)
            return {q, disp, it};
        q = exp_map(s, q, step);
    }
    throw KarcherError("karcher mean did not converge", best, best_disp);
}

} // namespace detail

/// Weighted center of mass: the unique minimizer of sum_i w_i d^2(p_i, Q).
///
/// Euclidean targets use the weighted arithmetic mean, k-pods the exact per-ray closed form,
/// two-point clouds the geodesic point at fraction w_2, and the remaining manifold cases the
/// unit-step fixed point Q <- exp_Q(sum w_i log_Q p_i), stopped when |sum w_i log_Q p_i| <= tol.
inline KarcherResult karcher_mean(const NpcSpace& s, const WeightedCloud& cloud, const KarcherOptions& opt = {})
{
    cloud.validate();
    if (!(opt.tol > 0.0))
        throw UsageError("karcher tolerance must be positive");
    for (const auto& p : cloud.points)
        validate_point(s, p);

    switch (s.kind) {
    case SpaceKind::euclidean: {
        Vec acc = Vec::Zero(s.dim);
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            acc += cloud.weights[i] * std::get<Vec>(cloud.points[i]);
        return {acc, 0.0, 0};
    }
    case SpaceKind::pod: return detail::pod_mean(s, cloud);
    default: break;
    }
    if (cloud.points.size() == 1)
        return {cloud.points[0], 0.0, 0};
    if (cloud.points.size() == 2 && !opt.init) {
        double t = cloud.weights[1] / (cloud.weights[0] + cloud.weights[1]);
        PointRep q = interpolate(s, cloud.points[0], cloud.points[1], t);
        return {q, 0.0, 0};
    }
    PointRep start = opt.init ? *opt.init
                              : cloud.points[std::distance(cloud.weights.begin(),
                                                           std::max_element(cloud.weights.begin(), cloud.weights.end()))];
    if (s.kind == SpaceKind::spd)
        return detail::spd_mean(s, cloud, opt, detail::as_spd(s, start));
    return detail::generic_mean(s, cloud, opt, start);
}

// ---------------------------------------------------------------------------

namespace detail {

/// Resolved twist isometry for each edge (identity for untwisted edges).
inline std::vector<std::optional<IsometryRep>> edge_isometries(const DomainGraph& d, const Representation* rep)
{
    std::vector<std::optional<IsometryRep>> out(d.edges.size());
    for (std::size_t i = 0; i < d.edges.size(); ++i) {
        const auto& tw = d.edges[i].twist;
        if (!tw || tw->empty())
            continue;
        if (!rep)
            throw UsageError("domain has twisted edges but no representation was given");
        out[i] = rep->word_isometry(*tw);
    }
    return out;
}

} // namespace detail

/// Replaces each vertex value by the measure-weighted Karcher mean over its hop-ball of the given radius.
///
/// On twisted domains the ball is taken in the covering graph, with each copy of a vertex carrying
/// the accumulated twist; copies are identified by their generator exponent sums, which is exact for
/// the abelian fundamental groups of circle and torus domains.
inline DiscreteMap mollify(const DiscreteMap& map, const DomainGraph& domain, int radius,
                           const Representation* rep = nullptr, const KarcherOptions& opt = {})
{
    if (radius < 1)
        throw UsageError("mollify radius must be >= 1");
    if (static_cast<int>(map.values.size()) != domain.vertex_count())
        throw UsageError("map does not cover the domain");
    const NpcSpace& s = map.target;
    auto adj = incidence_lists(domain);
    if (domain.has_twists() && !rep)
        throw UsageError("domain has twisted edges but no representation was given");

    std::vector<std::string> gens;
    if (rep)
        for (const auto& [name, iso] : rep->generators())
            gens.push_back(name);
    auto gen_index = [&](const std::string& name) {
        return static_cast<int>(std::find(gens.begin(), gens.end(), name) - gens.begin());
    };

    DiscreteMap out = map;
    for (int x = 0; x < domain.vertex_count(); ++x) {
        using Key = std::pair<int, std::vector<int>>;
        struct State {
            int vertex;
            std::vector<int> exps;
            IsometryRep iso;
            int depth;
        };
        std::map<Key, bool> seen;
        std::vector<State> frontier{{x, std::vector<int>(gens.size(), 0), identity_isometry(s), 0}};
        seen[{x, frontier[0].exps}] = true;
        std::vector<PointRep> pts;
        std::vector<double> wts;
        for (std::size_t head = 0; head < frontier.size(); ++head) {
            State cur = frontier[head];
            pts.push_back(isometry_apply(s, cur.iso, map.values[cur.vertex]));
            wts.push_back(domain.vertices[cur.vertex].measure);
            if (cur.depth == radius)
                continue;
            for (const auto& inc : adj[cur.vertex]) {
                std::vector<int> exps = cur.exps;
                IsometryRep iso = cur.iso;
                if (inc.twist) {
                    for (const auto& l : inc.twist->letters)
                        exps[gen_index(l.generator)] += l.exponent;
                    iso = compose(s, cur.iso, rep->word_isometry(*inc.twist));
                }
                Key key{inc.neighbor, exps};
                if (seen.count(key))
                    continue;
                seen[key] = true;
                frontier.push_back({inc.neighbor, std::move(exps), std::move(iso), cur.depth + 1});
            }
        }
        try {
            out.values[x] = karcher_mean(s, WeightedCloud::normalized(std::move(pts), std::move(wts)), opt).mean;
        } catch (const KarcherError& e) {
            throw KarcherError("mollify: karcher mean failed at vertex " + std::to_string(x), e.best(),
                               e.displacement());
        }
    }
    return out;
}

} // namespace npc
