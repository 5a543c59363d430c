#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "npc/errors.hpp"
#include "npc/linalg.hpp"

namespace npc {

namespace fd {

// Fourth-order central differences; the value type only needs +, - and scalar *.
template <class F>
auto partial(const F& g, const Vec& x, int a, double h)
{
    auto at = [&](double t) {
        Vec y = x;
        y(a) += t;
        return g(y);
    };
    using R = std::decay_t<decltype(g(x))>;
    R out = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    return out;
}

template <class F>
auto second_partial(const F& g, const Vec& x, int a, int b, double h)
{
    using R = std::decay_t<decltype(g(x))>;
    if (a == b) {
        auto at = [&](double t) {
            Vec y = x;
            y(a) += t;
            return g(y);
        };
        R out = (16.0 * (at(h) + at(-h)) - (at(2 * h) + at(-2 * h)) - 30.0 * at(0.0)) / (12.0 * h * h);
        return out;
    }
    static const int off[4] = {1, -1, 2, -2};
    static const double coef[4] = {8.0, -8.0, -1.0, 1.0};
    R acc = 0.0 * g(x);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            Vec y = x;
            y(a) += off[i] * h;
            y(b) += off[j] * h;
            acc = acc + (coef[i] * coef[j]) * g(y);
        }
    R out = acc / (144.0 * h * h);
    return out;
}

} // namespace fd

// A map between coordinate charts. Derivatives fall back to finite differences when not supplied.
struct ChartMap {
    std::string name;
    int m = 2;
    int d = 2;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jacobian;              // d x m
    std::function<std::vector<Mat>(const Vec&)> hessian; // d blocks of m x m
    double h1 = 1e-4;
    double h2 = 1e-3;

    Vec operator()(const Vec& x) const { return eval(x); }
};

inline Mat chart_jacobian(const ChartMap& c, const Vec& x)
{
    if (c.jacobian)
        return c.jacobian(x);
    Mat j(c.d, c.m);
    for (int a = 0; a < c.m; ++a)
        j.col(a) = fd::partial(c.eval, x, a, c.h1);
    return j;
}

inline std::vector<Mat> chart_hessian(const ChartMap& c, const Vec& x)
{
    if (c.hessian)
        return c.hessian(x);
    std::vector<Mat> out(c.d, Mat::Zero(c.m, c.m));
    for (int a = 0; a < c.m; ++a)
        for (int b = a; b < c.m; ++b) {
            Vec v = fd::second_partial(c.eval, x, a, b, c.h2);
            for (int k = 0; k < c.d; ++k)
                out[k](a, b) = out[k](b, a) = v(k);
        }
    return out;
}

// Largest entry gap between supplied and finite-difference first derivatives (0 when none supplied).
inline double jacobian_crosscheck(const ChartMap& c, const Vec& x)
{
    if (!c.jacobian)
        return 0.0;
    ChartMap plain = c;
    plain.jacobian = nullptr;
    return (c.jacobian(x) - chart_jacobian(plain, x)).cwiseAbs().maxCoeff();
}

struct Tensor4 {
    int d = 0;
    std::vector<double> v;

    Tensor4() = default;
    explicit Tensor4(int dim) : d(dim), v(static_cast<std::size_t>(dim * dim * dim * dim), 0.0) {}
    double& operator()(int i, int j, int k, int l) { return v[((i * d + j) * d + k) * d + l]; }
    double operator()(int i, int j, int k, int l) const { return v[((i * d + j) * d + k) * d + l]; }
};

// gamma[k](i, j) = Gamma^k_{ij}
using Christoffel = std::vector<Mat>;

struct TargetGeometry {
    std::string name;
    int d = 2;
    std::function<Mat(const Vec&)> metric;
    std::function<Christoffel(const Vec&)> christoffel;
    std::function<Tensor4(const Vec&)> curvature; // R_ijkl = h(R(d_i, d_j) d_k, d_l)
};

struct DomainGeometry {
    int m = 2;
    std::function<Mat(const Vec&)> metric; // empty means Euclidean

    bool flat() const { return !metric; }
    Mat at(const Vec& x) const { return metric ? metric(x) : Mat(Mat::Identity(m, m)); }
};

struct MetricChart {
    DomainGeometry domain;
    TargetGeometry target;
};

inline Christoffel levi_civita_fd(const std::function<Mat(const Vec&)>& metric, const Vec& y, double h = 1e-4)
{
    const int d = static_cast<int>(y.size());
    std::vector<Mat> dh(d);
    for (int l = 0; l < d; ++l)
        dh[l] = fd::partial(metric, y, l, h);
    Mat inv = linalg::checked_inverse(Mat(metric(y)));
    Christoffel g(d, Mat::Zero(d, d));
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < d; ++l)
                    s += inv(k, l) * (dh[i](j, l) + dh[j](i, l) - dh[l](i, j));
                g[k](i, j) = 0.5 * s;
            }
    return g;
}

inline Tensor4 curvature_from_christoffel(const std::function<Christoffel(const Vec&)>& gamma, const Mat& h, const Vec& y,
                                          double step = 1e-4)
{
    const int d = static_cast<int>(y.size());
    Christoffel g = gamma(y);
    std::vector<Christoffel> dg(d);
    for (int i = 0; i < d; ++i) {
        auto shifted = [&](double t) {
            Vec z = y;
            z(i) += t;
            return gamma(z);
        };
        auto p1 = shifted(step), m1 = shifted(-step), p2 = shifted(2 * step), m2 = shifted(-2 * step);
        dg[i].resize(d);
        for (int k = 0; k < d; ++k)
            dg[i][k] = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * step);
    }
    Tensor4 r(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double s = 0.0;
                    for (int m = 0; m < d; ++m) {
                        // R^m_{ijk}
                        double up = dg[i][m](j, k) - dg[j][m](i, k);
                        for (int q = 0; q < d; ++q)
                            up += g[q](j, k) * g[m](i, q) - g[q](i, k) * g[m](j, q);
                        s += up * h(m, l);
                    }
                    r(i, j, k, l) = s;
                }
    return r;
}

// Metric-only geometry: Christoffels and curvature by finite differences.
inline TargetGeometry geometry_from_metric(std::string name, int d, std::function<Mat(const Vec&)> metric)
{
    TargetGeometry t;
    t.name = std::move(name);
    t.d = d;
    t.metric = metric;
    t.christoffel = [metric](const Vec& y) { return levi_civita_fd(metric, y); };
    t.curvature = [metric](const Vec& y) {
        auto gamma = [metric](const Vec& z) { return levi_civita_fd(metric, z, 1e-3); };
        return curvature_from_christoffel(gamma, metric(y), y, 1e-3);
    };
    return t;
}

inline Tensor4 constant_curvature_tensor(double k, const Mat& h)
{
    const int d = static_cast<int>(h.rows());
    Tensor4 r(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int a = 0; a < d; ++a)
                for (int l = 0; l < d; ++l)
                    r(i, j, a, l) = k * (h(i, l) * h(j, a) - h(i, a) * h(j, l));
    return r;
}

// Metric e^{2 phi} delta, given grad phi.
inline Christoffel conformal_christoffel(const Vec& grad)
{
    const int d = static_cast<int>(grad.size());
    Christoffel g(d, Mat::Zero(d, d));
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                g[k](i, j) = (i == k ? grad(j) : 0.0) + (j == k ? grad(i) : 0.0) - (i == j ? grad(k) : 0.0);
    return g;
}

inline TargetGeometry flat_geometry(int d)
{
    TargetGeometry t;
    t.name = "flat";
    t.d = d;
    t.metric = [d](const Vec&) { return Mat(Mat::Identity(d, d)); };
    t.christoffel = [d](const Vec&) { return Christoffel(d, Mat::Zero(d, d)); };
    t.curvature = [d](const Vec&) { return Tensor4(d); };
    return t;
}

inline TargetGeometry hyperbolic_geometry()
{
    auto height = [](const Vec& y) {
        if (!(y(1) > 0.0))
            throw DomainError("half-plane chart needs y > 0");
        return y(1);
    };
    TargetGeometry t;
    t.name = "hyperbolic";
    t.d = 2;
    t.metric = [height](const Vec& y) { return Mat(Mat::Identity(2, 2) / (height(y) * height(y))); };
    t.christoffel = [height](const Vec& y) { return conformal_christoffel(Eigen::Vector2d(0.0, -1.0 / height(y))); };
    t.curvature = [t](const Vec& y) { return constant_curvature_tensor(-1.0, t.metric(y)); };
    return t;
}

// Stereographic chart of the unit sphere.
inline TargetGeometry sphere_geometry()
{
    TargetGeometry t;
    t.name = "sphere";
    t.d = 2;
    t.metric = [](const Vec& y) {
        double lam = 2.0 / (1.0 + y.squaredNorm());
        return Mat(lam * lam * Mat::Identity(2, 2));
    };
    t.christoffel = [](const Vec& y) { return conformal_christoffel(Vec(-2.0 * y / (1.0 + y.squaredNorm()))); };
    t.curvature = [t](const Vec& y) { return constant_curvature_tensor(1.0, t.metric(y)); };
    return t;
}

// Unimodular real 2x2 positive matrices h = [[1/y, x/y], [x/y, (x^2+y^2)/y]] with g(X,Y) = tr(h^-1 X h^-1 Y).
inline Mat spd2_point(const Vec& c)
{
    double x = c(0), y = c(1);
    if (!(y > 0.0))
        throw DomainError("spd chart needs y > 0");
    Mat h(2, 2);
    h << 1.0 / y, x / y, x / y, (x * x + y * y) / y;
    return h;
}

inline TargetGeometry spd2_geometry()
{
    auto metric = [](const Vec& c) {
        double x = c(0), y = c(1);
        Mat h = spd2_point(c);
        Mat dx(2, 2), dy(2, 2);
        dx << 0.0, 1.0 / y, 1.0 / y, 2.0 * x / y;
        dy << -1.0 / (y * y), -x / (y * y), -x / (y * y), 1.0 - x * x / (y * y);
        Mat hi = h.inverse();
        std::vector<Mat> basis{hi * dx, hi * dy};
        Mat g(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                g(i, j) = (basis[i] * basis[j]).trace();
        return g;
    };
    return geometry_from_metric("spd2", 2, metric);
}

inline double metric_symmetry_defect(const Mat& h) { return (h - h.transpose()).cwiseAbs().maxCoeff(); }

inline double christoffel_defect(const TargetGeometry& t, const Vec& y, double h = 1e-4)
{
    auto supplied = t.christoffel(y);
    auto fdg = levi_civita_fd(t.metric, y, h);
    double out = 0.0;
    for (int k = 0; k < t.d; ++k)
        out = std::max(out, (supplied[k] - fdg[k]).cwiseAbs().maxCoeff());
    return out;
}

inline double curvature_symmetry_defect(const Tensor4& r)
{
    double out = 0.0;
    const int d = r.d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    out = std::max(out, std::abs(r(i, j, k, l) + r(j, i, k, l)));
                    out = std::max(out, std::abs(r(i, j, k, l) + r(i, j, l, k)));
                    out = std::max(out, std::abs(r(i, j, k, l) - r(k, l, i, j)));
                }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Real operators

namespace detail {

inline Mat domain_inverse(const MetricChart& mc, const Vec& x)
{
    Mat g = mc.domain.at(x);
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success || metric_symmetry_defect(g) > 1e-12 || g.determinant() < 1e-14)
        throw DomainError("singular or indefinite domain metric");
    return llt.solve(Mat::Identity(g.rows(), g.cols()));
}

inline void check_dims(const ChartMap& c, const MetricChart& mc)
{
    if (c.m != mc.domain.m || c.d != mc.target.d)
        throw UsageError("chart " + c.name + " does not match the metric dimensions");
}

} // namespace detail

inline double energy_density(const ChartMap& c, const MetricChart& mc, const Vec& x)
{
    detail::check_dims(c, mc);
    Mat gi = detail::domain_inverse(mc, x);
    Mat j = chart_jacobian(c, x);
    Mat h = mc.target.metric(c(x));
    return 0.5 * (gi * j.transpose() * h * j).trace();
}

inline Vec tension_field(const ChartMap& c, const MetricChart& mc, const Vec& x)
{
    detail::check_dims(c, mc);
    Mat gi = detail::domain_inverse(mc, x);
    Mat j = chart_jacobian(c, x);
    auto hess = chart_hessian(c, x);
    auto gamma = mc.target.christoffel(c(x));
    Christoffel dgamma;
    if (!mc.domain.flat())
        dgamma = levi_civita_fd(mc.domain.metric, x);
    Vec tau = Vec::Zero(c.d);
    for (int k = 0; k < c.d; ++k) {
        Mat b = hess[k];
        if (!mc.domain.flat())
            for (int q = 0; q < c.m; ++q)
                b -= dgamma[q] * j(k, q);
        b += j.transpose() * gamma[k] * j;
        tau(k) = (gi.array() * b.array()).sum();
    }
    return tau;
}

inline double target_norm(const MetricChart& mc, const Vec& y, const Vec& v)
{
    return std::sqrt(std::max(0.0, v.dot(mc.target.metric(y) * v)));
}

// (nabla df)^k_{ab} on a flat domain.
inline std::vector<Mat> second_fundamental_form(const ChartMap& c, const MetricChart& mc, const Vec& x)
{
    Mat j = chart_jacobian(c, x);
    auto hess = chart_hessian(c, x);
    auto gamma = mc.target.christoffel(c(x));
    for (int k = 0; k < c.d; ++k)
        hess[k] += j.transpose() * gamma[k] * j;
    return hess;
}

struct WeitzenbockReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double tension = 0.0;
};

inline constexpr double kHarmonicTolerance = 1e-6;

// Delta e = |nabla df|^2 + <df Ric e_a, df e_a> - sum R(df e_a, df e_b, df e_b, df e_a) for harmonic f.
inline WeitzenbockReport weitzenbock_residual(const ChartMap& c, const MetricChart& mc, const Vec& x, double step = 1e-2)
{
    detail::check_dims(c, mc);
    if (!mc.domain.flat())
        throw UnsupportedError("the Weitzenbock check is implemented for flat domains");
    WeitzenbockReport out;
    Vec y = c(x);
    out.tension = target_norm(mc, y, tension_field(c, mc, x));
    if (out.tension > kHarmonicTolerance)
        throw DomainError("chart " + c.name + " is not harmonic at the sample point");
    double e0 = energy_density(c, mc, x);
    for (int a = 0; a < c.m; ++a) {
        Vec p = x, q = x;
        p(a) += step;
        q(a) -= step;
        out.lhs += (energy_density(c, mc, p) - 2.0 * e0 + energy_density(c, mc, q)) / (step * step);
    }
    Mat h = mc.target.metric(y);
    auto sff = second_fundamental_form(c, mc, x);
    for (int a = 0; a < c.m; ++a)
        for (int b = 0; b < c.m; ++b) {
            Vec v(c.d);
            for (int k = 0; k < c.d; ++k)
                v(k) = sff[k](a, b);
            out.rhs += v.dot(h * v);
        }
    Mat j = chart_jacobian(c, x);
    Tensor4 r = mc.target.curvature(y);
    for (int a = 0; a < c.m; ++a)
        for (int b = 0; b < c.m; ++b)
            for (int i = 0; i < c.d; ++i)
                for (int jj = 0; jj < c.d; ++jj)
                    for (int k = 0; k < c.d; ++k)
                        for (int l = 0; l < c.d; ++l)
                            out.rhs -= r(i, jj, k, l) * j(i, a) * j(jj, b) * j(k, b) * j(l, a);
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

struct ConvergenceStudy {
    std::vector<double> steps;
    std::vector<double> residuals;
    std::vector<double> orders; // log2 of successive residual ratios; NaN when both are at round-off
};

inline ConvergenceStudy weitzenbock_convergence(const ChartMap& c, const MetricChart& mc, const Vec& x, double step = 1e-2,
                                                int levels = 3)
{
    ConvergenceStudy s;
    for (int i = 0; i < levels; ++i) {
        s.steps.push_back(step);
        s.residuals.push_back(weitzenbock_residual(c, mc, x, step).residual);
        step *= 0.5;
    }
    for (int i = 0; i + 1 < levels; ++i) {
        double a = s.residuals[i], b = s.residuals[i + 1];
        s.orders.push_back(a > 1e-12 && b > 0.0 ? std::log2(a / b) : std::nan(""));
    }
    return s;
}

// ---------------------------------------------------------------------------------------------
// Complex domain C^n with real coordinates (x_1, y_1, x_2, y_2, ...)

struct ComplexJet {
    CMat dz;    // d x n, df/dz^a
    CMat dzbar; // d x n, df/dzbar^a
};

inline ComplexJet complex_jet(const Mat& j)
{
    if (j.cols() % 2 != 0)
        throw UsageError("complex derivatives need an even real domain dimension");
    const int n = static_cast<int>(j.cols()) / 2;
    ComplexJet out{CMat(j.rows(), n), CMat(j.rows(), n)};
    for (int k = 0; k < j.rows(); ++k)
        for (int a = 0; a < n; ++a) {
            out.dz(k, a) = 0.5 * cplx(j(k, 2 * a), -j(k, 2 * a + 1));
            out.dzbar(k, a) = 0.5 * cplx(j(k, 2 * a), j(k, 2 * a + 1));
        }
    return out;
}

// d^2/dz^a dzbar^b from a real Hessian block.
template <class M>
cplx dz_dzbar(const M& hess, int a, int b)
{
    return 0.25 * cplx(hess(2 * a, 2 * b) + hess(2 * a + 1, 2 * b + 1), hess(2 * a, 2 * b + 1) - hess(2 * a + 1, 2 * b));
}

// T^k_{ab} = d^2 f^k/dz^a dzbar^b + Gamma^k_ij df^i/dz^a df^j/dzbar^b, returned as d blocks of n x n.
inline std::vector<CMat> pluriharmonic_tensor(const ChartMap& c, const MetricChart& mc, const Vec& x)
{
    detail::check_dims(c, mc);
    if (!mc.domain.flat())
        throw UnsupportedError("the pluriharmonic tensor is implemented for flat complex domains");
    auto jet = complex_jet(chart_jacobian(c, x));
    auto hess = chart_hessian(c, x);
    auto gamma = mc.target.christoffel(c(x));
    const int n = c.m / 2;
    std::vector<CMat> t(c.d, CMat::Zero(n, n));
    for (int k = 0; k < c.d; ++k) {
        CMat g = gamma[k].cast<cplx>();
        CMat quad = jet.dz.transpose() * g * jet.dzbar;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                t[k](a, b) = dz_dzbar(hess[k], a, b) + quad(a, b);
    }
    return t;
}

// 4 sum_a T^k_aa, which equals the tension field.
inline Vec pluriharmonic_trace(const std::vector<CMat>& t)
{
    Vec out(static_cast<int>(t.size()));
    for (std::size_t k = 0; k < t.size(); ++k)
        out(static_cast<int>(k)) = 4.0 * t[k].trace().real();
    return out;
}

inline double pluriharmonic_norm2(const std::vector<CMat>& t, const Mat& h)
{
    double s = 0.0;
    const int d = static_cast<int>(t.size());
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            s += h(k, l) * (t[k].array() * t[l].array().conjugate()).sum().real();
    return s;
}

// -2 sum_{a,b} R_ijkl f^i_{z_a} f^k_{zbar_b} f^j_{z_b} f^l_{zbar_a}
inline double sampson_Q0(const Tensor4& r, const CMat& dz, const CMat& dzbar)
{
    const int d = r.d;
    const int n = static_cast<int>(dz.cols());
    cplx s = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    for (int k = 0; k < d; ++k)
                        for (int l = 0; l < d; ++l) {
                            double rv = r(i, j, k, l);
                            if (rv != 0.0)
                                s += rv * dz(i, a) * dzbar(k, b) * dz(j, b) * dzbar(l, a);
                        }
    return -2.0 * s.real();
}

inline double sampson_Q0(const MetricChart& mc, const Vec& y, const CMat& dz, const CMat& dzbar)
{
    return sampson_Q0(mc.target.curvature(y), dz, dzbar);
}

struct SampsonReport {
    double lhs = 0.0;       // d'd''{d''f, d''f} divided by omega^2/2
    double phi_norm2 = 0.0; // |d'_E d'' f|^2
    double q0 = 0.0;
    double rhs = 0.0;         // 4(|phi|^2 + Q0/2)
    double printed_rhs = 0.0; // 4(|phi|^2 + Q0)
    double residual = 0.0;
    double tension = 0.0;
    double lhs_imag = 0.0;
};

namespace detail {

inline int wedge_sign(std::array<int, 4> idx)
{
    int s = 1;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            if (idx[i] == idx[j])
                return 0;
            if (idx[i] > idx[j])
                s = -s;
        }
    return s;
}

} // namespace detail

// Both sides of the Bochner identity on C^2; the form {d''f, d''f} is differentiated with outer step `step`.
inline SampsonReport sampson_identity_residual(const ChartMap& c, const MetricChart& mc, const Vec& x, double step = 1e-2)
{
    detail::check_dims(c, mc);
    if (c.m != 4 || !mc.domain.flat())
        throw UsageError("the Sampson identity check needs a chart on flat C^2");
    SampsonReport out;
    Vec y = c(x);
    out.tension = target_norm(mc, y, tension_field(c, mc, x));
    if (out.tension > kHarmonicTolerance)
        throw DomainError("chart " + c.name + " is not harmonic at the sample point");

    // p_{ab} = h_ij f^i_{zbar_a} f^j_{z_b}: coefficient of dzbar^a ^ dz^b.
    auto pairing = [&](const Vec& z) {
        auto jet = complex_jet(chart_jacobian(c, z));
        CMat h = mc.target.metric(c(z)).cast<cplx>();
        CMat p = jet.dzbar.transpose() * h * jet.dz;
        return p;
    };
    std::vector<std::vector<CMat>> hess(4, std::vector<CMat>(4));
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b)
            hess[a][b] = hess[b][a] = fd::second_partial(pairing, x, a, b, step);

    // d'd'' P = sum d_{z_e} d_{zbar_g} p_{ab} dz^e ^ dzbar^g ^ dzbar^a ^ dz^b; basis dz1, dzbar1, dz2, dzbar2.
    cplx coef = 0.0;
    for (int e = 0; e < 2; ++e)
        for (int g = 0; g < 2; ++g)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    int s = detail::wedge_sign({2 * e, 2 * g + 1, 2 * a + 1, 2 * b});
                    if (s == 0)
                        continue;
                    Mat re(4, 4), im(4, 4);
                    for (int u = 0; u < 4; ++u)
                        for (int v = 0; v < 4; ++v) {
                            re(u, v) = hess[u][v](a, b).real();
                            im(u, v) = hess[u][v](a, b).imag();
                        }
                    coef += double(s) * (dz_dzbar(re, e, g) + cplx(0, 1) * dz_dzbar(im, e, g));
                }
    // omega^2/2 = -(1/4) dz1 ^ dzbar1 ^ dz2 ^ dzbar2
    out.lhs = -4.0 * coef.real();
    out.lhs_imag = -4.0 * coef.imag();

    Mat h = mc.target.metric(y);
    out.phi_norm2 = pluriharmonic_norm2(pluriharmonic_tensor(c, mc, x), h);
    auto jet = complex_jet(chart_jacobian(c, x));
    out.q0 = sampson_Q0(mc.target.curvature(y), jet.dz, jet.dzbar);
    out.rhs = 4.0 * (out.phi_norm2 + 0.5 * out.q0);
    out.printed_rhs = 4.0 * (out.phi_norm2 + out.q0);
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Curvature sign tests

struct NegativityReport {
    int samples = 0;
    int violations = 0;        // values above the tolerance
    int strictly_negative = 0; // values below minus the tolerance
    double worst = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    double max_imag = 0.0;
};

inline constexpr double kSignTolerance = 1e-10;

inline void record_sign(NegativityReport& rep, double v, double scale)
{
    ++rep.samples;
    double tol = kSignTolerance * std::max(1.0, scale);
    if (v > tol)
        ++rep.violations;
    if (v < -tol)
        ++rep.strictly_negative;
    rep.worst = std::max(rep.worst, v);
    rep.best = std::min(rep.best, v);
}

inline CMat complex_gaussian(int rows, int cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    CMat g(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            g(i, j) = cplx(n(rng), n(rng));
    return g;
}

// R_ijkl A^{il} A^{jk} on Hermitian positive draws A = G* G.
inline double hermitian_form(const Tensor4& r, const CMat& a)
{
    cplx s = 0.0;
    const int d = r.d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    s += r(i, j, k, l) * a(i, l) * a(j, k);
    return s.real();
}

inline NegativityReport hermitian_negativity_test(const Tensor4& r, int samples, std::uint64_t seed = 1)
{
    if (samples < 1)
        throw UsageError("samples must be positive");
    std::mt19937_64 rng(seed);
    NegativityReport rep;
    double scale = 0.0;
    for (double v : r.v)
        scale = std::max(scale, std::abs(v));
    for (int s = 0; s < samples; ++s) {
        CMat g = complex_gaussian(r.d, r.d, rng);
        CMat a = g.adjoint() * g;
        record_sign(rep, hermitian_form(r, a), scale * a.squaredNorm());
    }
    return rep;
}

struct KahlerCurvature {
    int dim = 1;
    std::vector<cplx> r; // R_{i jbar k lbar}

    explicit KahlerCurvature(int n = 1) : dim(n), r(static_cast<std::size_t>(n * n * n * n), 0.0) {}
    cplx& operator()(int i, int j, int k, int l) { return r[((i * dim + j) * dim + k) * dim + l]; }
    cplx operator()(int i, int j, int k, int l) const { return r[((i * dim + j) * dim + k) * dim + l]; }

    double hermitian_defect() const
    {
        double out = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                for (int k = 0; k < dim; ++k)
                    for (int l = 0; l < dim; ++l)
                        out = std::max(out, std::abs((*this)(i, j, k, l) - std::conj((*this)(j, i, l, k))));
        return out;
    }
};

using KahlerMetric1 = std::function<double(cplx)>;

// One complex dimension: R_{1 1bar 1 1bar} = -h d^2 log h / dw dwbar.
inline KahlerCurvature kahler_curvature_1d(const KahlerMetric1& h, cplx w, double step = 1e-3)
{
    auto logh = [&](const Vec& p) {
        double v = h(cplx(p(0), p(1)));
        if (!(v > 0.0))
            throw DomainError("Kahler metric must be positive");
        return std::log(v);
    };
    Vec p(2);
    p << w.real(), w.imag();
    double lap = fd::second_partial(logh, p, 0, 0, step) + fd::second_partial(logh, p, 1, 1, step);
    KahlerCurvature kc(1);
    kc(0, 0, 0, 0) = -h(w) * 0.25 * lap;
    return kc;
}

inline double strong_form(const KahlerCurvature& kc, const CMat& xi)
{
    cplx s = 0.0;
    const int n = kc.dim;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    s += kc(i, j, k, l) * xi(i, j) * std::conj(xi(l, k));
    return s.real();
}

// R_{i jbar k lbar}(A^i Bbar^j - C^i Dbar^j) conj(A^l Bbar^k - C^l Dbar^k) on complex Gaussian draws.
inline NegativityReport strong_negativity_test(const KahlerCurvature& kc, int samples, std::uint64_t seed = 1)
{
    if (samples < 1)
        throw UsageError("samples must be positive");
    if (kc.hermitian_defect() > 1e-10)
        throw InvariantError("Kahler curvature is not Hermitian symmetric");
    std::mt19937_64 rng(seed);
    NegativityReport rep;
    double scale = 0.0;
    for (auto v : kc.r)
        scale = std::max(scale, std::abs(v));
    while (rep.samples < samples) {
        CMat a = complex_gaussian(kc.dim, 1, rng), b = complex_gaussian(kc.dim, 1, rng);
        CMat c = complex_gaussian(kc.dim, 1, rng), d = complex_gaussian(kc.dim, 1, rng);
        CMat xi = a * b.adjoint() - c * d.adjoint();
        if (xi.norm() < 1e-8)
            continue;
        record_sign(rep, strong_form(kc, xi), scale * xi.squaredNorm());
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Named charts

struct ChartSpec {
    ChartMap map;
    MetricChart metrics;
    std::function<Vec(std::mt19937_64&)> sample;
};

namespace detail {

inline std::function<Vec(std::mt19937_64&)> box_sampler(Vec lo, Vec hi)
{
    return [lo, hi](std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Vec x(lo.size());
        for (int i = 0; i < lo.size(); ++i)
            x(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
        return x;
    };
}

inline Vec vec(std::initializer_list<double> v)
{
    Vec out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

inline ChartSpec make_spec(ChartMap map, TargetGeometry target, Vec lo, Vec hi)
{
    ChartSpec s;
    s.metrics.domain.m = map.m;
    s.metrics.target = std::move(target);
    s.map = std::move(map);
    s.sample = box_sampler(std::move(lo), std::move(hi));
    return s;
}

} // namespace detail

inline std::vector<std::string> chart_names()
{
    return {"identity-hyperbolic", "scaled-hyperbolic", "affine-flat",    "geodesic-loop",    "geodesic-product",
            "sine-harmonic",       "flat-re-z1z2bar",   "flat-re-z1z2",   "flat-z1z2bar",     "holomorphic-flat"};
}

inline ChartSpec named_chart(const std::string& name)
{
    using detail::vec;
    ChartMap c;
    c.name = name;
    if (name == "identity-hyperbolic" || name == "scaled-hyperbolic") {
        double s = name == "identity-hyperbolic" ? 1.0 : 2.0;
        c.eval = [s](const Vec& x) { return Vec(vec({x(0), s * x(1)})); };
        c.jacobian = [s](const Vec&) { return Mat(vec({1.0, s}).asDiagonal()); };
        c.hessian = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
        return detail::make_spec(c, hyperbolic_geometry(), vec({-1, 0.5}), vec({1, 2}));
    }
    if (name == "affine-flat") {
        Mat a(2, 2);
        a << 1.0, 2.0, -0.5, 1.5;
        c.eval = [a](const Vec& x) { return Vec(a * x + vec({0.3, -1.0})); };
        c.jacobian = [a](const Vec&) { return a; };
        return detail::make_spec(c, flat_geometry(2), vec({-1, -1}), vec({1, 1}));
    }
    if (name == "geodesic-loop") {
        c.m = 1;
        c.eval = [](const Vec& t) { return Vec(vec({0.0, std::exp(t(0))})); };
        c.jacobian = [](const Vec& t) { return Mat(vec({0.0, std::exp(t(0))})); };
        c.hessian = [](const Vec& t) {
            return std::vector<Mat>{Mat::Zero(1, 1), Mat::Constant(1, 1, std::exp(t(0)))};
        };
        return detail::make_spec(c, hyperbolic_geometry(), vec({-1}), vec({1}));
    }
    if (name == "geodesic-product") {
        c.m = 4;
        c.eval = [](const Vec& x) { return Vec(vec({0.0, std::exp(x(0) + x(2))})); };
        c.jacobian = [](const Vec& x) {
            Mat j = Mat::Zero(2, 4);
            j(1, 0) = j(1, 2) = std::exp(x(0) + x(2));
            return j;
        };
        return detail::make_spec(c, hyperbolic_geometry(), vec({-0.5, -0.5, -0.5, -0.5}), vec({0.5, 0.5, 0.5, 0.5}));
    }
    if (name == "sine-harmonic") {
        c.m = 4;
        c.eval = [](const Vec& x) { return Vec(vec({x(0), std::sin(x(2))})); };
        c.jacobian = [](const Vec& x) {
            Mat j = Mat::Zero(2, 4);
            j(0, 0) = 1.0;
            j(1, 2) = std::cos(x(2));
            return j;
        };
        c.hessian = [](const Vec& x) {
            std::vector<Mat> h(2, Mat::Zero(4, 4));
            h[1](2, 2) = -std::sin(x(2));
            return h;
        };
        return detail::make_spec(c, hyperbolic_geometry(), vec({-1, -1, 0.6, -1}), vec({1, 1, 2.5, 1}));
    }
    if (name == "flat-re-z1z2bar" || name == "flat-re-z1z2" || name == "flat-z1z2bar") {
        c.m = 4;
        if (name == "flat-re-z1z2bar")
            c.eval = [](const Vec& x) { return Vec(vec({x(0) * x(2) + x(1) * x(3), 0.0})); };
        else if (name == "flat-re-z1z2")
            c.eval = [](const Vec& x) { return Vec(vec({x(0) * x(2) - x(1) * x(3), 0.0})); };
        else
            c.eval = [](const Vec& x) { return Vec(vec({x(0) * x(2) + x(1) * x(3), x(1) * x(2) - x(0) * x(3)})); };
        return detail::make_spec(c, flat_geometry(2), vec({-1, -1, -1, -1}), vec({1, 1, 1, 1}));
    }
    if (name == "holomorphic-flat") {
        c.eval = [](const Vec& x) { return Vec(vec({x(0) * x(0) - x(1) * x(1), 2.0 * x(0) * x(1)})); };
        return detail::make_spec(c, flat_geometry(2), vec({-1, -1}), vec({1, 1}));
    }
    throw UsageError("unknown chart '" + name + "'");
}

struct TargetSpec {
    TargetGeometry geometry;
    std::function<Vec(std::mt19937_64&)> sample;
};

inline std::vector<std::string> target_names() { return {"hyperbolic", "sphere", "flat", "spd2"}; }

inline TargetSpec named_target(const std::string& name)
{
    using detail::vec;
    if (name == "hyperbolic")
        return {hyperbolic_geometry(), detail::box_sampler(vec({-1, 0.5}), vec({1, 2}))};
    if (name == "sphere")
        return {sphere_geometry(), detail::box_sampler(vec({-1, -1}), vec({1, 1}))};
    if (name == "flat")
        return {flat_geometry(2), detail::box_sampler(vec({-1, -1}), vec({1, 1}))};
    if (name == "spd2")
        return {spd2_geometry(), detail::box_sampler(vec({-1, 0.5}), vec({1, 2}))};
    throw UsageError("unknown target '" + name + "'");
}

struct KahlerTarget {
    std::string name;
    KahlerMetric1 metric;
    std::function<cplx(std::mt19937_64&)> sample;
};

inline std::vector<std::string> kahler_names() { return {"poincare-disk", "fubini-study", "flat"}; }

inline KahlerTarget named_kahler_target(const std::string& name)
{
    auto disk = [](double radius) {
        return [radius](std::mt19937_64& rng) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            return std::polar(radius * std::sqrt(u(rng)), 2.0 * M_PI * u(rng));
        };
    };
    if (name == "poincare-disk")
        return {name,
                [](cplx w) {
                    double r = 1.0 - std::norm(w);
                    if (!(r > 0.0))
                        throw DomainError("point outside the unit disk");
                    return 1.0 / (r * r);
                },
                disk(0.9)};
    if (name == "fubini-study")
        return {name, [](cplx w) { return 1.0 / ((1.0 + std::norm(w)) * (1.0 + std::norm(w))); }, disk(2.0)};
    if (name == "flat")
        return {name, [](cplx) { return 1.0; }, disk(1.0)};
    throw UsageError("unknown Kahler target '" + name + "'");
}

} // namespace npc
