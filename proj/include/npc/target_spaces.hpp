#pragma once

// Non-positively curved target spaces: Euclidean space, the hyperbolic upper half-plane,
// determinant-one positive-definite matrices, and k-pod trees.
//
// Metric normalization for spd(n): the Riemannian metric is
//     g_h(X, Y) = (n/2) trace(h^-1 X h^-1 Y),
// so distances carry a factor sqrt(n/2) relative to the more common affine-invariant
// convention ||log(h0^-1/2 h1 h0^-1/2)||_F. This is the normalization under which the
// coset map gK -> g^-* g^-1 is an isometry for the Killing-form metric 2n trace(XY).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "npc/errors.hpp"
#include "npc/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace npc {

enum class SpaceKind { euclidean, hyperbolic_plane, spd, pod };

struct NpcSpace {
    SpaceKind kind = SpaceKind::euclidean;
    int dim = 1;          // euclidean
    int n = 2;            // spd matrix size
    bool complex = false; // spd over C (Hermitian) instead of R (symmetric)
    int arms = 3;         // pod

    static NpcSpace euclidean(int dim)
    {
        if (dim < 1)
            throw UsageError("euclidean dimension must be >= 1");
        NpcSpace s;
        s.kind = SpaceKind::euclidean;
        s.dim = dim;
        return s;
    }
    static NpcSpace hyperbolic()
    {
        NpcSpace s;
        s.kind = SpaceKind::hyperbolic_plane;
        return s;
    }
    static NpcSpace spd(int n, bool complex = false)
    {
        if (n < 2)
            throw UsageError("spd matrix size must be >= 2");
        NpcSpace s;
        s.kind = SpaceKind::spd;
        s.n = n;
        s.complex = complex;
        return s;
    }
    static NpcSpace pod(int k)
    {
        if (k < 3)
            throw UsageError("pod arm count must be >= 3");
        NpcSpace s;
        s.kind = SpaceKind::pod;
        s.arms = k;
        return s;
    }

    bool is_manifold() const { return kind != SpaceKind::pod; }

    /// Spec string: "euc:D", "hyp", "spd:N", "spd:N:c", "pod:K".
    std::string spec() const
    {
        switch (kind) {
        case SpaceKind::euclidean: return "euc:" + std::to_string(dim);
        case SpaceKind::hyperbolic_plane: return "hyp";
        case SpaceKind::spd: return "spd:" + std::to_string(n) + (complex ? ":c" : "");
        case SpaceKind::pod: return "pod:" + std::to_string(arms);
        }
        return {};
    }

    static NpcSpace parse(std::string_view text)
    {
        auto number_after = [&](std::string_view rest) {
            int value = 0;
            auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
            if (ec != std::errc() || ptr == rest.data())
                throw UsageError("bad target spec: " + std::string(text));
            return std::pair{value, std::string_view(ptr, rest.data() + rest.size() - ptr)};
        };
        if (text == "hyp")
            return hyperbolic();
        if (text.starts_with("euc:")) {
            auto [d, tail] = number_after(text.substr(4));
            if (!tail.empty())
                throw UsageError("bad target spec: " + std::string(text));
            return euclidean(d);
        }
        if (text.starts_with("spd:")) {
            auto [m, tail] = number_after(text.substr(4));
            if (tail.empty())
                return spd(m, false);
            if (tail == ":c")
                return spd(m, true);
            if (tail == ":r")
                return spd(m, false);
            throw UsageError("bad target spec: " + std::string(text));
        }
        if (text.starts_with("pod:")) {
            auto [k, tail] = number_after(text.substr(4));
            if (!tail.empty())
                throw UsageError("bad target spec: " + std::string(text));
            return pod(k);
        }
        throw UsageError("unknown target spec: " + std::string(text));
    }

    friend bool operator==(const NpcSpace& a, const NpcSpace& b)
    {
        if (a.kind != b.kind)
            return false;
        switch (a.kind) {
        case SpaceKind::euclidean: return a.dim == b.dim;
        case SpaceKind::hyperbolic_plane: return true;
        case SpaceKind::spd: return a.n == b.n && a.complex == b.complex;
        case SpaceKind::pod: return a.arms == b.arms;
        }
        return false;
    }
};

struct HalfPlanePoint {
    double x = 0.0;
    double y = 1.0;
};

struct PodPoint {
    int ray = 0;
    double radius = 0.0;
};

/// Point payload; index order matches SpaceKind.
using PointRep = std::variant<Vec, HalfPlanePoint, CMat, PodPoint>;

struct TangentRep {
    PointRep base;
    std::variant<Vec, Eigen::Vector2d, CMat> vector;
};

struct RigidMotion {
    Mat rotation;
    Vec translation;
};

struct Mobius {
    Eigen::Matrix2d m = Eigen::Matrix2d::Identity();
};

/// g in SL(n) acting on spd by h -> g^-* h g^-1.
struct LinearAction {
    CMat g;
};

struct RayPermutation {
    std::vector<int> perm;
};

using IsometryRep = std::variant<RigidMotion, Mobius, LinearAction, RayPermutation>;

namespace detail {

inline constexpr double kSpdDetTol = 1e-10;

[[noreturn]] inline void tag_mismatch() { throw UsageError("point does not belong to the target space"); }

inline const Vec& as_vec(const NpcSpace& s, const PointRep& p)
{
    const Vec* v = std::get_if<Vec>(&p);
    if (s.kind != SpaceKind::euclidean || !v || v->size() != s.dim)
        tag_mismatch();
    return *v;
}

inline const HalfPlanePoint& as_hyp(const NpcSpace& s, const PointRep& p)
{
    const HalfPlanePoint* v = std::get_if<HalfPlanePoint>(&p);
    if (s.kind != SpaceKind::hyperbolic_plane || !v)
        tag_mismatch();
    if (!(v->y > 0.0))
        throw DomainError("half-plane point must have y > 0");
    return *v;
}

inline const CMat& as_spd(const NpcSpace& s, const PointRep& p)
{
    const CMat* v = std::get_if<CMat>(&p);
    if (s.kind != SpaceKind::spd || !v || v->rows() != s.n || v->cols() != s.n)
        tag_mismatch();
    return *v;
}

inline const PodPoint& as_pod(const NpcSpace& s, const PointRep& p)
{
    const PodPoint* v = std::get_if<PodPoint>(&p);
    if (s.kind != SpaceKind::pod || !v || v->ray < 0 || v->ray >= s.arms)
        tag_mismatch();
    if (!(v->radius >= 0.0))
        throw DomainError("pod radius must be >= 0");
    return *v;
}

inline std::complex<double> to_complex(const HalfPlanePoint& p) { return {p.x, p.y}; }

/// Projects a matrix onto the determinant-one self-adjoint matrices (used to keep round-off from drifting).
inline CMat normalize_spd(const CMat& h)
{
    CMat s = linalg::hermitian_part(h);
    double det = s.determinant().real();
    if (!(det > 0.0))
        throw DomainError("matrix is not positive definite");
    return s / std::pow(det, 1.0 / static_cast<double>(s.rows()));
}

inline PodPoint canonical_pod(int ray, double radius)
{
    if (radius <= 0.0)
        return PodPoint{0, 0.0};
    return PodPoint{ray, radius};
}

// Hyperbolic log/exp at i via the Cayley transform to the disk (w = (z - i)/(z + i)).
inline std::complex<double> hyp_log_at_i(std::complex<double> z)
{
    const std::complex<double> I(0.0, 1.0);
    std::complex<double> w = (z - I) / (z + I);
    double r = std::abs(w);
    if (r == 0.0)
        return {0.0, 0.0};
    return I * (w / r) * (2.0 * std::atanh(r));
}

inline std::complex<double> hyp_exp_at_i(std::complex<double> v)
{
    const std::complex<double> I(0.0, 1.0);
    double len = std::abs(v);
    if (len == 0.0)
        return I;
    std::complex<double> w = -I * (v / len) * std::tanh(0.5 * len);
    return I * (1.0 + w) / (1.0 - w);
}

} // namespace detail

/// Validates that a payload belongs to the space, including the spd invariants.
inline void validate_point(const NpcSpace& s, const PointRep& p)
{
    switch (s.kind) {
    case SpaceKind::euclidean: detail::as_vec(s, p); return;
    case SpaceKind::hyperbolic_plane: detail::as_hyp(s, p); return;
    case SpaceKind::pod: detail::as_pod(s, p); return;
    case SpaceKind::spd: {
        const CMat& h = detail::as_spd(s, p);
        double scale = std::max(1.0, h.norm());
        if (linalg::hermitian_defect(h) > detail::kSpdDetTol * scale)
            throw DomainError("spd point is not self-adjoint");
        if (!s.complex && h.imag().norm() > detail::kSpdDetTol * scale)
            throw DomainError("real spd point has imaginary entries");
        linalg::positive_spectrum(h);
        if (std::abs(h.determinant() - cplx(1.0)) > detail::kSpdDetTol * std::pow(scale, s.n))
            throw DomainError("spd point must have determinant 1");
        return;
    }
    }
}

inline PointRep make_spd_point(const CMat& h) { return PointRep{std::in_place_type<CMat>, h}; }
inline PointRep make_pod_point(int ray, double radius) { return detail::canonical_pod(ray, radius); }

/// Canonical base point: origin, i, identity matrix, pod origin.
inline PointRep basepoint(const NpcSpace& s)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return Vec(Vec::Zero(s.dim));
    case SpaceKind::hyperbolic_plane: return HalfPlanePoint{0.0, 1.0};
    case SpaceKind::spd: return CMat(CMat::Identity(s.n, s.n));
    case SpaceKind::pod: return PodPoint{0, 0.0};
    }
    return {};
}

inline double distance(const NpcSpace& s, const PointRep& p, const PointRep& q)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return (detail::as_vec(s, p) - detail::as_vec(s, q)).norm();
    case SpaceKind::hyperbolic_plane: {
        const auto& a = detail::as_hyp(s, p);
        const auto& b = detail::as_hyp(s, q);
        // 2 asinh(|z1 - z2| / (2 sqrt(y1 y2))) == arcosh(1 + |z1 - z2|^2 / (2 y1 y2)), better conditioned.
        double chord = std::hypot(a.x - b.x, a.y - b.y);
        return 2.0 * std::asinh(chord / (2.0 * std::sqrt(a.y * b.y)));
    }
    case SpaceKind::spd: {
        const CMat& h0 = detail::as_spd(s, p);
        const CMat& h1 = detail::as_spd(s, q);
        CMat r = linalg::spd_inv_sqrt(h0);
        auto spec = linalg::positive_spectrum(r * h1 * r);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < spec.values.size(); ++i) {
            double l = std::log(spec.values(i));
            sum += l * l;
        }
        return std::sqrt(0.5 * s.n * sum);
    }
    case SpaceKind::pod: {
        const auto& a = detail::as_pod(s, p);
        const auto& b = detail::as_pod(s, q);
        if (a.ray == b.ray || a.radius == 0.0 || b.radius == 0.0)
            return a.ray == b.ray ? std::abs(a.radius - b.radius) : a.radius + b.radius;
        return a.radius + b.radius;
    }
    }
    return 0.0;
}

/// Riemannian inner product of two tangent vectors at the same base point.
inline double tangent_inner(const NpcSpace& s, const TangentRep& a, const TangentRep& b)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return std::get<Vec>(a.vector).dot(std::get<Vec>(b.vector));
    case SpaceKind::hyperbolic_plane: {
        double y = detail::as_hyp(s, a.base).y;
        return std::get<Eigen::Vector2d>(a.vector).dot(std::get<Eigen::Vector2d>(b.vector)) / (y * y);
    }
    case SpaceKind::spd: {
        CMat hinv = linalg::spd_inverse(detail::as_spd(s, a.base));
        return 0.5 * s.n * linalg::real_trace(hinv * std::get<CMat>(a.vector) * hinv * std::get<CMat>(b.vector));
    }
    case SpaceKind::pod: throw UnsupportedError("pod has no tangent calculus");
    }
    return 0.0;
}

inline double tangent_norm(const NpcSpace& s, const TangentRep& v) { return std::sqrt(std::max(0.0, tangent_inner(s, v, v))); }

inline TangentRep log_map(const NpcSpace& s, const PointRep& base, const PointRep& p)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return {base, Vec(detail::as_vec(s, p) - detail::as_vec(s, base))};
    case SpaceKind::hyperbolic_plane: {
        const auto& b = detail::as_hyp(s, base);
        const auto& q = detail::as_hyp(s, p);
        std::complex<double> z((q.x - b.x) / b.y, q.y / b.y);
        std::complex<double> v = b.y * detail::hyp_log_at_i(z);
        return {base, Eigen::Vector2d(v.real(), v.imag())};
    }
    case SpaceKind::spd: {
        const CMat& h = detail::as_spd(s, base);
        auto spec = linalg::positive_spectrum(h);
        CMat root = spec.apply([](double x) { return std::sqrt(x); });
        CMat inv_root = spec.apply([](double x) { return 1.0 / std::sqrt(x); });
        CMat inner = linalg::spd_log(inv_root * detail::as_spd(s, p) * inv_root);
        return {base, linalg::hermitian_part(root * inner * root)};
    }
    case SpaceKind::pod: throw UnsupportedError("log_map is not defined on a k-pod");
    }
    return {};
}

inline PointRep exp_map(const NpcSpace& s, const PointRep& base, const TangentRep& v)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return Vec(detail::as_vec(s, base) + std::get<Vec>(v.vector));
    case SpaceKind::hyperbolic_plane: {
        const auto& b = detail::as_hyp(s, base);
        const auto& w = std::get<Eigen::Vector2d>(v.vector);
        std::complex<double> z = detail::hyp_exp_at_i(std::complex<double>(w(0), w(1)) / b.y);
        return HalfPlanePoint{b.x + b.y * z.real(), b.y * z.imag()};
    }
    case SpaceKind::spd: {
        const CMat& h = detail::as_spd(s, base);
        auto spec = linalg::positive_spectrum(h);
        CMat root = spec.apply([](double x) { return std::sqrt(x); });
        CMat inv_root = spec.apply([](double x) { return 1.0 / std::sqrt(x); });
        CMat out = root * linalg::sa_exp(inv_root * std::get<CMat>(v.vector) * inv_root) * root;
        return make_spd_point(detail::normalize_spd(out));
    }
    case SpaceKind::pod: throw UnsupportedError("exp_map is not defined on a k-pod");
    }
    return {};
}

inline TangentRep zero_tangent(const NpcSpace& s, const PointRep& base)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return {base, Vec(Vec::Zero(s.dim))};
    case SpaceKind::hyperbolic_plane: return {base, Eigen::Vector2d(Eigen::Vector2d::Zero())};
    case SpaceKind::spd: return {base, CMat(CMat::Zero(s.n, s.n))};
    case SpaceKind::pod: throw UnsupportedError("pod has no tangent calculus");
    }
    return {};
}

/// a*u + b*v for tangent vectors at a common base.
inline TangentRep tangent_combine(double a, const TangentRep& u, double b, const TangentRep& v)
{
    return std::visit(
        [&](const auto& x) -> TangentRep {
            using T = std::decay_t<decltype(x)>;
            return {u.base, T(a * x + b * std::get<T>(v.vector))};
        },
        u.vector);
}

/// Point at fraction t along the geodesic from p to q.
inline PointRep interpolate(const NpcSpace& s, const PointRep& p, const PointRep& q, double t)
{
    if (!(t >= 0.0 && t <= 1.0))
        throw UsageError("interpolation parameter must lie in [0, 1]");
    switch (s.kind) {
    case SpaceKind::euclidean: {
        const Vec& a = detail::as_vec(s, p);
        const Vec& b = detail::as_vec(s, q);
        return Vec((1.0 - t) * a + t * b);
    }
    case SpaceKind::hyperbolic_plane: {
        if (t == 0.0)
            return detail::as_hyp(s, p);
        if (t == 1.0)
            return detail::as_hyp(s, q);
        TangentRep v = log_map(s, p, q);
        std::get<Eigen::Vector2d>(v.vector) *= t;
        return exp_map(s, p, v);
    }
    case SpaceKind::spd: {
        const CMat& h0 = detail::as_spd(s, p);
        const CMat& h1 = detail::as_spd(s, q);
        if (t == 0.0)
            return make_spd_point(h0);
        if (t == 1.0)
            return make_spd_point(h1);
        auto spec = linalg::positive_spectrum(h0);
        CMat root = spec.apply([](double x) { return std::sqrt(x); });
        CMat inv_root = spec.apply([](double x) { return 1.0 / std::sqrt(x); });
        CMat mid = linalg::spd_pow(inv_root * h1 * inv_root, t);
        return make_spd_point(detail::normalize_spd(root * mid * root));
    }
    case SpaceKind::pod: {
        const auto& a = detail::as_pod(s, p);
        const auto& b = detail::as_pod(s, q);
        if (a.ray == b.ray || a.radius == 0.0 || b.radius == 0.0) {
            // Both on one closed ray (the origin belongs to every ray).
            int ray = a.radius > 0.0 ? a.ray : b.ray;
            return detail::canonical_pod(ray, (1.0 - t) * a.radius + t * b.radius);
        }
        double along = t * (a.radius + b.radius);
        if (along <= a.radius)
            return detail::canonical_pod(a.ray, a.radius - along);
        return detail::canonical_pod(b.ray, along - a.radius);
    }
    }
    return {};
}

/// RHS - LHS of  d(P,Q_t)^2 <= (1-t) d(P,Q)^2 + t d(P,R)^2 - t(1-t) d(Q,R)^2,  Q_t on [Q,R].
inline double check_triangle_comparison(const NpcSpace& s, const PointRep& P, const PointRep& Q, const PointRep& R,
                                        double t)
{
    PointRep Qt = interpolate(s, Q, R, t);
    double dPQt = distance(s, P, Qt);
    double dPQ = distance(s, P, Q);
    double dPR = distance(s, P, R);
    double dQR = distance(s, Q, R);
    return (1.0 - t) * dPQ * dPQ + t * dPR * dPR - t * (1.0 - t) * dQR * dQR - dPQt * dPQt;
}

struct QuadrilateralResiduals {
    double menelaus = 0.0;
    double agamemnon = 0.0;
};

/// Quadrilateral comparison residuals (RHS - LHS) for the quadrilateral P, Q, R, S
/// with P_t on [P,S] and Q_t on [Q,R].
inline QuadrilateralResiduals check_quadrilateral(const NpcSpace& s, const PointRep& P, const PointRep& Q,
                                                  const PointRep& R, const PointRep& S, double t)
{
    PointRep Pt = interpolate(s, P, S, t);
    PointRep Qt = interpolate(s, Q, R, t);
    PointRep Q1t = interpolate(s, Q, R, 1.0 - t);
    double dPQ = distance(s, P, Q), dRS = distance(s, R, S);
    double dSP = distance(s, S, P), dQR = distance(s, Q, R);

    double lhs_m = std::pow(distance(s, Pt, Qt), 2);
    double rhs_m = (1.0 - t) * dPQ * dPQ + t * dRS * dRS - t * (1.0 - t) * std::pow(dSP - dQR, 2);

    double lhs_a = std::pow(distance(s, Qt, P), 2) + std::pow(distance(s, Q1t, S), 2);
    // Two triangle comparisons plus d^2_PR + d^2_SQ <= d^2_PQ + d^2_RS + 2 d_SP d_QR; equality for
    // Euclidean quadrilaterals with S - P parallel to R - Q.
    double rhs_a = dPQ * dPQ + dRS * dRS - 2.0 * t * dQR * dQR + 2.0 * t * dSP * dQR + 2.0 * t * t * dQR * dQR;
    return {rhs_m - lhs_m, rhs_a - lhs_a};
}

// ---------------------------------------------------------------------------
// Isometries

inline IsometryRep identity_isometry(const NpcSpace& s)
{
    switch (s.kind) {
    case SpaceKind::euclidean: return RigidMotion{Mat::Identity(s.dim, s.dim), Vec::Zero(s.dim)};
    case SpaceKind::hyperbolic_plane: return Mobius{};
    case SpaceKind::spd: return LinearAction{CMat::Identity(s.n, s.n)};
    case SpaceKind::pod: {
        RayPermutation p;
        for (int i = 0; i < s.arms; ++i)
            p.perm.push_back(i);
        return p;
    }
    }
    return {};
}

/// Checks the group-element constraints (orthogonality, unit determinant, bijectivity).
inline void validate_isometry(const NpcSpace& s, const IsometryRep& iso)
{
    constexpr double tol = 1e-10;
    switch (s.kind) {
    case SpaceKind::euclidean: {
        const auto* r = std::get_if<RigidMotion>(&iso);
        if (!r || r->rotation.rows() != s.dim || r->rotation.cols() != s.dim || r->translation.size() != s.dim)
            throw UsageError("isometry does not match euclidean target");
        if ((r->rotation.transpose() * r->rotation - Mat::Identity(s.dim, s.dim)).norm() > tol)
            throw DomainError("rigid motion rotation is not orthogonal");
        return;
    }
    case SpaceKind::hyperbolic_plane: {
        const auto* m = std::get_if<Mobius>(&iso);
        if (!m)
            throw UsageError("isometry does not match hyperbolic target");
        if (std::abs(m->m.determinant() - 1.0) > tol)
            throw DomainError("Mobius matrix must have determinant 1");
        return;
    }
    case SpaceKind::spd: {
        const auto* a = std::get_if<LinearAction>(&iso);
        if (!a || a->g.rows() != s.n || a->g.cols() != s.n)
            throw UsageError("isometry does not match spd target");
        if (!s.complex && a->g.imag().norm() > tol)
            throw UsageError("complex group element acting on real spd target");
        cplx det = a->g.determinant();
        if (det == cplx(0.0))
            throw DomainError("group element is singular");
        if (std::abs(det - cplx(1.0)) > tol)
            throw DomainError("group element must have determinant 1");
        return;
    }
    case SpaceKind::pod: {
        const auto* p = std::get_if<RayPermutation>(&iso);
        if (!p || static_cast<int>(p->perm.size()) != s.arms)
            throw UsageError("isometry does not match pod target");
        std::vector<int> sorted = p->perm;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < s.arms; ++i)
            if (sorted[i] != i)
                throw UsageError("ray permutation is not a bijection");
        return;
    }
    }
}

inline PointRep isometry_apply(const NpcSpace& s, const IsometryRep& iso, const PointRep& p)
{
    switch (s.kind) {
    case SpaceKind::euclidean: {
        const auto& r = std::get<RigidMotion>(iso);
        return Vec(r.rotation * detail::as_vec(s, p) + r.translation);
    }
    case SpaceKind::hyperbolic_plane: {
        const auto& m = std::get<Mobius>(iso).m;
        std::complex<double> z = detail::to_complex(detail::as_hyp(s, p));
        std::complex<double> w = (m(0, 0) * z + m(0, 1)) / (m(1, 0) * z + m(1, 1));
        return HalfPlanePoint{w.real(), w.imag()};
    }
    case SpaceKind::spd: {
        const auto& g = std::get<LinearAction>(iso).g;
        CMat ginv = linalg::checked_inverse(g);
        return make_spd_point(detail::normalize_spd(ginv.adjoint() * detail::as_spd(s, p) * ginv));
    }
    case SpaceKind::pod: {
        const auto& q = detail::as_pod(s, p);
        if (q.radius == 0.0)
            return PodPoint{0, 0.0};
        return PodPoint{std::get<RayPermutation>(iso).perm.at(q.ray), q.radius};
    }
    }
    return {};
}

/// (a o b): apply b first, then a. For spd this is A_{g_a g_b} = A_{g_a} o A_{g_b}.
inline IsometryRep compose(const NpcSpace& s, const IsometryRep& a, const IsometryRep& b)
{
    switch (s.kind) {
    case SpaceKind::euclidean: {
        const auto& x = std::get<RigidMotion>(a);
        const auto& y = std::get<RigidMotion>(b);
        return RigidMotion{x.rotation * y.rotation, x.rotation * y.translation + x.translation};
    }
    case SpaceKind::hyperbolic_plane: return Mobius{std::get<Mobius>(a).m * std::get<Mobius>(b).m};
    case SpaceKind::spd: return LinearAction{std::get<LinearAction>(a).g * std::get<LinearAction>(b).g};
    case SpaceKind::pod: {
        const auto& x = std::get<RayPermutation>(a).perm;
        const auto& y = std::get<RayPermutation>(b).perm;
        RayPermutation out;
        for (int i : y)
            out.perm.push_back(x.at(i));
        return out;
    }
    }
    return {};
}

inline IsometryRep inverse(const NpcSpace& s, const IsometryRep& a)
{
    switch (s.kind) {
    case SpaceKind::euclidean: {
        const auto& x = std::get<RigidMotion>(a);
        Mat rt = x.rotation.transpose();
        return RigidMotion{rt, -rt * x.translation};
    }
    case SpaceKind::hyperbolic_plane: return Mobius{linalg::checked_inverse(Mat(std::get<Mobius>(a).m))};
    case SpaceKind::spd: return LinearAction{linalg::checked_inverse(std::get<LinearAction>(a).g)};
    case SpaceKind::pod: {
        const auto& x = std::get<RayPermutation>(a).perm;
        RayPermutation out;
        out.perm.assign(x.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i)
            out.perm.at(x[i]) = static_cast<int>(i);
        return out;
    }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Random sampling (property tests and the check-npc suite)

/// Random self-adjoint trace-free matrix with Frobenius norm uniform in [0, max_norm].
template <class Rng>
CMat random_log_matrix(int n, bool complex, double max_norm, Rng& rng)
{
    std::normal_distribution<double> gauss;
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = cplx(gauss(rng), complex ? gauss(rng) : 0.0);
    m = linalg::hermitian_part(m);
    m -= (m.trace() / static_cast<double>(n)) * CMat::Identity(n, n);
    m = linalg::hermitian_part(m);
    double nrm = m.norm();
    if (nrm == 0.0)
        return m;
    std::uniform_real_distribution<double> uni(0.0, max_norm);
    return m * (uni(rng) / nrm);
}

template <class Rng>
PointRep sample_point(const NpcSpace& s, Rng& rng, double scale = 2.0)
{
    switch (s.kind) {
    case SpaceKind::euclidean: {
        std::normal_distribution<double> gauss(0.0, scale);
        Vec v(s.dim);
        for (int i = 0; i < s.dim; ++i)
            v(i) = gauss(rng);
        return v;
    }
    case SpaceKind::hyperbolic_plane: {
        std::uniform_real_distribution<double> ux(-scale, scale);
        std::uniform_real_distribution<double> uy(-scale, scale);
        return HalfPlanePoint{ux(rng), std::exp(uy(rng))};
    }
    case SpaceKind::spd: return make_spd_point(linalg::sa_exp(random_log_matrix(s.n, s.complex, scale, rng)));
    case SpaceKind::pod: {
        std::uniform_int_distribution<int> ray(0, s.arms - 1);
        std::uniform_real_distribution<double> r(0.0, 1.5 * scale);
        // A few exact origins keep the degenerate branch exercised.
        std::uniform_int_distribution<int> coin(0, 19);
        if (coin(rng) == 0)
            return PodPoint{0, 0.0};
        return detail::canonical_pod(ray(rng), r(rng));
    }
    }
    return {};
}

/// Random element of the isometry group (near the identity for spd so that g stays well conditioned).
template <class Rng>
IsometryRep sample_isometry(const NpcSpace& s, Rng& rng)
{
    std::normal_distribution<double> gauss;
    switch (s.kind) {
    case SpaceKind::euclidean: {
        Mat a(s.dim, s.dim);
        for (int i = 0; i < s.dim; ++i)
            for (int j = 0; j < s.dim; ++j)
                a(i, j) = gauss(rng);
        Eigen::HouseholderQR<Mat> qr(a);
        Mat q = qr.householderQ();
        Vec t(s.dim);
        for (int i = 0; i < s.dim; ++i)
            t(i) = gauss(rng);
        return RigidMotion{q, t};
    }
    case SpaceKind::hyperbolic_plane: {
        Eigen::Matrix2d m;
        m << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
        double det = m.determinant();
        if (det < 0.0)
            m.col(0) *= -1.0, det = -det;
        m /= std::sqrt(det);
        return Mobius{m};
    }
    case SpaceKind::spd: {
        CMat x(s.n, s.n);
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.n; ++j)
                x(i, j) = cplx(gauss(rng), s.complex ? gauss(rng) : 0.0);
        x -= (x.trace() / static_cast<double>(s.n)) * CMat::Identity(s.n, s.n);
        x *= 0.5 / std::max(1.0, x.norm());
        CMat g = x.exp();
        cplx det = g.determinant();
        g /= std::pow(det, 1.0 / static_cast<double>(s.n));
        return LinearAction{g};
    }
    case SpaceKind::pod: {
        RayPermutation p;
        for (int i = 0; i < s.arms; ++i)
            p.perm.push_back(i);
        std::shuffle(p.perm.begin(), p.perm.end(), rng);
        return p;
    }
    }
    return {};
}

struct NpcSuiteReport {
    std::size_t samples = 0;
    double min_triangle = 0.0;
    double min_menelaus = 0.0;
    double min_agamemnon = 0.0;
};

/// Random triples/quadruples with random t; minimum comparison residual per inequality.
inline NpcSuiteReport npc_suite(const NpcSpace& s, std::size_t samples, unsigned long seed, double scale = 2.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, 1.0);
    NpcSuiteReport rep;
    rep.samples = samples;
    rep.min_triangle = rep.min_menelaus = rep.min_agamemnon = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i) {
        PointRep P = sample_point(s, rng, scale), Q = sample_point(s, rng, scale);
        PointRep R = sample_point(s, rng, scale), S = sample_point(s, rng, scale);
        double t = ut(rng);
        rep.min_triangle = std::min(rep.min_triangle, check_triangle_comparison(s, P, Q, R, t));
        auto quad = check_quadrilateral(s, P, Q, R, S, t);
        rep.min_menelaus = std::min(rep.min_menelaus, quad.menelaus);
        rep.min_agamemnon = std::min(rep.min_agamemnon, quad.agamemnon);
    }
    return rep;
}

} // namespace npc
