#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "npc/errors.hpp"
#include "npc/harmonic_solver.hpp"
#include "npc/linalg.hpp"
#include "npc/target_spaces.hpp"

namespace npc {

inline void validate_group_element(const CMat& g, double tol = 1e-10)
{
    if (g.rows() != g.cols() || g.rows() < 1)
        throw UsageError("group element must be a square matrix");
    cplx det = g.determinant();
    if (std::abs(det) < 1e-14)
        throw DomainError("group element is singular");
    if (std::abs(det - cplx(1.0)) > tol)
        throw DomainError("group element must have determinant 1");
}

/// gK -> g^{-*} g^{-1}
inline CMat psi(const CMat& g)
{
    if (g.rows() != g.cols())
        throw UsageError("group element must be a square matrix");
    if (std::abs(g.determinant()) < 1e-14)
        throw DomainError("group element is singular");
    CMat gi = linalg::checked_inverse(g);
    return linalg::hermitian_part(gi.adjoint() * gi);
}

inline double spd_metric(const CMat& h, const CMat& x, const CMat& y)
{
    CMat hi = linalg::checked_inverse(h);
    return 0.5 * static_cast<double>(h.rows()) * (hi * x * hi * y).trace().real();
}

/// B(X, Y) = 2n tr(XY)
inline double killing_form(const CMat& x, const CMat& y) { return 2.0 * static_cast<double>(x.rows()) * (x * y).trace().real(); }

/// |g_H(dPsi X, dPsi Y) - B(X, Y)| with dPsi along s -> g exp(sX) by central differences.
inline double psi_isometry_residual(const CMat& g, const CMat& x, const CMat& y, double step = 1e-4)
{
    if (linalg::hermitian_defect(x) > 1e-12 || linalg::hermitian_defect(y) > 1e-12)
        throw UsageError("tangent directions must be self-adjoint");
    auto push = [&](const CMat& v) {
        CMat plus = psi(g * linalg::sa_exp(step * v));
        CMat minus = psi(g * linalg::sa_exp(-step * v));
        return CMat((plus - minus) / (2.0 * step));
    };
    return std::abs(spd_metric(psi(g), push(x), push(y)) - killing_form(x, y));
}

/// H(s, t) = conj(s)^T h t
inline cplx hermitian_pairing(const CMat& h, const CVec& s, const CVec& t)
{
    if (h.rows() != s.size() || h.cols() != t.size())
        throw UsageError("pairing dimensions disagree");
    return (s.adjoint() * h * t)(0, 0);
}

struct ConnectionCheck {
    double difference = 0.0;    // |(flat - Levi-Civita)_X Y + (1/2) h [h^-1 X, h^-1 Y]|
    double compatibility = 0.0; // |X g(Y, Z) - g(nabla_X Y, Z) - g(Y, nabla_X Z)|
};

/// Flat connection h d(h^-1 Y) against nabla_X Y = dY(X) - (1/2)(X h^-1 Y + Y h^-1 X), constant fields Y, Z.
inline ConnectionCheck connection_difference_check(const CMat& h, const CMat& x, const CMat& y, const CMat& z,
                                                   double step = 1e-4)
{
    CMat hi = linalg::checked_inverse(h);
    auto along = [&](double s) { return CMat(h + s * x); };
    CMat flat = h * (linalg::checked_inverse(along(step)) * y - linalg::checked_inverse(along(-step)) * y) / (2.0 * step);
    auto lc = [&](const CMat& v) { return CMat(-0.5 * (x * hi * v + v * hi * x)); };
    CMat diff = flat - lc(y);
    CMat expected = -0.5 * h * (hi * x * hi * y - hi * y * hi * x);
    ConnectionCheck out;
    out.difference = (diff - expected).norm();
    double dg = (spd_metric(along(step), y, z) - spd_metric(along(-step), y, z)) / (2.0 * step);
    out.compatibility = std::abs(dg - spd_metric(h, lc(y), z) - spd_metric(h, y, lc(z)));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Discrete theta

struct ThetaEdge {
    int head = 0;
    double weight = 0.0;
    CMat head_value; // rho(twist) h(head), as seen from the tail
    CMat theta;      // -1/2 h_tail^{-1} (head_value - h_tail) / step
};

struct ThetaField {
    double step = 1.0;
    std::vector<CMat> h;
    std::vector<std::vector<ThetaEdge>> out; // per tail vertex
    int long_edges = 0;                      // edges with d(h_u, h_v) > 1

    double max_trace() const
    {
        double m = 0.0;
        for (const auto& es : out)
            for (const auto& e : es)
                m = std::max(m, std::abs(e.theta.trace()));
        return m;
    }

    /// max |h^-1 theta^* h - theta|
    double max_selfadjoint_defect() const
    {
        double m = 0.0;
        for (std::size_t v = 0; v < out.size(); ++v) {
            CMat hi = linalg::checked_inverse(h[v]);
            for (const auto& e : out[v])
                m = std::max(m, (hi * e.theta.adjoint() * h[v] - e.theta).norm());
        }
        return m;
    }

    /// max |h theta + (1/2)(h_v - h_u)/step|
    double identification_residual() const
    {
        double m = 0.0;
        for (std::size_t v = 0; v < out.size(); ++v)
            for (const auto& e : out[v])
                m = std::max(m, (h[v] * e.theta + 0.5 * (e.head_value - h[v]) / step).norm());
        return m;
    }
};

inline double default_step(const DomainGraph& d)
{
    auto adj = incidence_lists(d);
    bool cycle = std::all_of(adj.begin(), adj.end(), [](const auto& a) { return a.size() == 2; });
    double n = static_cast<double>(d.vertex_count());
    return cycle ? 1.0 / n : 1.0 / std::sqrt(n);
}

inline ThetaField theta_field(const DomainGraph& d, const DiscreteMap& h, const Representation* rep = nullptr,
                              double step = 0.0)
{
    if (h.target.kind != SpaceKind::spd)
        throw UsageError("theta needs an spd-valued map");
    detail::check_map(d, h);
    ThetaField t;
    t.step = step > 0.0 ? step : default_step(d);
    auto stars = detail::build_stars(d, h.target, rep);
    t.out.resize(stars.size());
    for (const auto& p : h.values)
        t.h.push_back(std::get<CMat>(p));
    for (std::size_t v = 0; v < stars.size(); ++v) {
        CMat hi = linalg::checked_inverse(t.h[v]);
        for (const auto& s : stars[v]) {
            PointRep q = s.twist ? isometry_apply(h.target, *s.twist, h.values[s.neighbor]) : h.values[s.neighbor];
            ThetaEdge e;
            e.head = s.neighbor;
            e.weight = s.weight;
            e.head_value = std::get<CMat>(q);
            e.theta = -0.5 * hi * (e.head_value - t.h[v]) / t.step;
            if (distance(h.target, h.values[v], q) > 1.0)
                ++t.long_edges;
            t.out[v].push_back(std::move(e));
        }
    }
    return t;
}

/// d_D^* theta at each vertex: -(1/step) sum w theta - sum w theta^2.
inline std::vector<CMat> covariant_divergence(const ThetaField& t)
{
    std::vector<CMat> div;
    for (std::size_t v = 0; v < t.out.size(); ++v) {
        const int n = static_cast<int>(t.h[v].rows());
        CMat acc = CMat::Zero(n, n);
        for (const auto& e : t.out[v])
            acc -= e.weight * (e.theta / t.step + e.theta * e.theta);
        div.push_back(acc);
    }
    return div;
}

/// h'' - h' h^-1 h' at each vertex: central differences on degree-2 vertices, the graph form elsewhere.
inline std::vector<CMat> tension_matrices(const ThetaField& t)
{
    std::vector<CMat> out;
    const double s2 = t.step * t.step;
    for (std::size_t v = 0; v < t.out.size(); ++v) {
        const CMat& h = t.h[v];
        CMat hi = linalg::checked_inverse(h);
        const auto& es = t.out[v];
        if (es.size() == 2 && es[0].weight == es[1].weight) {
            CMat sum = es[0].head_value + es[1].head_value - 2.0 * h;
            CMat grad = es[0].head_value - es[1].head_value;
            out.push_back(es[0].weight * (sum - 0.25 * grad * hi * grad) / s2);
            continue;
        }
        CMat acc = CMat::Zero(h.rows(), h.cols());
        for (const auto& e : es) {
            CMat dv = e.head_value - h;
            acc += e.weight * (dv - 0.5 * dv * hi * dv);
        }
        out.push_back(acc / s2);
    }
    return out;
}

struct CorrespondenceResidual {
    double tension_residual = 0.0; // max g_H norm of h'' - h' h^-1 h'
    double divergence_norm = 0.0;  // max Frobenius norm of d_D^* theta
    double identification = 0.0;   // max |h theta + (1/2) dh|
    double trace = 0.0;
    double selfadjoint = 0.0;
};

inline CorrespondenceResidual correspondence_residual(const DomainGraph& d, const DiscreteMap& h,
                                                      const Representation* rep = nullptr, double step = 0.0)
{
    auto t = theta_field(d, h, rep, step);
    CorrespondenceResidual r;
    auto tens = tension_matrices(t);
    auto div = covariant_divergence(t);
    for (std::size_t v = 0; v < tens.size(); ++v) {
        if (d.is_boundary(static_cast<int>(v)))
            continue;
        r.tension_residual = std::max(r.tension_residual, std::sqrt(std::max(0.0, spd_metric(t.h[v], tens[v], tens[v]))));
        r.divergence_norm = std::max(r.divergence_norm, div[v].norm());
    }
    r.identification = t.identification_residual();
    r.trace = t.max_trace();
    r.selfadjoint = t.max_selfadjoint_defect();
    return r;
}

// ---------------------------------------------------------------------------------------------
// Refinement study on twisted cycles

/// sqrt(n/2) |2 log|lambda||, the translation length of h -> g^{-*} h g^{-1} for diagonalizable g.
inline double spd_translation_length(const CMat& g)
{
    Eigen::ComplexEigenSolver<CMat> es(g);
    double s = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        double l = 2.0 * std::log(std::abs(es.eigenvalues()(i)));
        s += l * l;
    }
    return std::sqrt(0.5 * static_cast<double>(g.rows()) * s);
}

struct CorletteLevel {
    int n = 0;
    double energy = 0.0;
    double expected_energy = 0.0; // l^2 / (2N)
    int sweeps = 0;
    CorrespondenceResidual residual;
};

struct CorletteStudy {
    std::vector<CorletteLevel> levels;
    std::vector<double> tension_orders;
    std::vector<double> divergence_orders;

    double min_tension_order() const { return tension_orders.empty() ? 0.0 : *std::min_element(tension_orders.begin(), tension_orders.end()); }
    double min_divergence_order() const
    {
        return divergence_orders.empty() ? 0.0 : *std::min_element(divergence_orders.begin(), divergence_orders.end());
    }
};

inline CorletteStudy corlette_refinement(const Representation& rep, const std::string& generator,
                                         const std::vector<int>& sizes = {16, 32, 64}, SolveConfig cfg = {})
{
    if (rep.space().kind != SpaceKind::spd)
        throw UsageError("the refinement study needs an spd representation");
    const auto* a = std::get_if<LinearAction>(&rep.generator(generator));
    if (!a)
        throw UsageError("generator does not act linearly");
    double ell = spd_translation_length(a->g);
    CorletteStudy st;
    for (int n : sizes) {
        auto d = twisted_cycle(n, rep, generator);
        auto res = solve_equivariant(d, rep, equivariant_initial_map(d, rep), cfg);
        CorletteLevel lv;
        lv.n = n;
        lv.energy = res.trace.records.back().energy;
        lv.expected_energy = ell * ell / (2.0 * n);
        lv.sweeps = res.trace.records.back().sweep;
        lv.residual = correspondence_residual(d, res.map, &rep);
        st.levels.push_back(lv);
    }
    for (std::size_t i = 0; i + 1 < st.levels.size(); ++i) {
        const auto &c = st.levels[i], &f = st.levels[i + 1];
        double ratio = static_cast<double>(f.n) / c.n;
        st.tension_orders.push_back(std::log(c.residual.tension_residual / f.residual.tension_residual) / std::log(ratio));
        st.divergence_orders.push_back(std::log(c.residual.divergence_norm / f.residual.divergence_norm) / std::log(ratio));
    }
    return st;
}

} // namespace npc
