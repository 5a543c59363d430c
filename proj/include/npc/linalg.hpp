#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>

#include "npc/errors.hpp"

namespace npc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using cplx = std::complex<double>;

namespace linalg {

inline constexpr double kEigenFloor = 1e-14;

inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

inline double hermitian_defect(const CMat& m) { return (m - m.adjoint()).norm(); }

/// Eigendecomposition of a self-adjoint matrix, with a scalar function applied to the spectrum.
struct SelfAdjointSpectrum {
    Eigen::VectorXd values;
    CMat vectors;

    explicit SelfAdjointSpectrum(const CMat& m)
    {
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
        if (es.info() != Eigen::Success)
            throw DomainError("self-adjoint eigendecomposition failed");
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    }

    CMat apply(const std::function<double(double)>& fn) const
    {
        Eigen::VectorXd mapped(values.size());
        for (Eigen::Index i = 0; i < values.size(); ++i)
            mapped(i) = fn(values(i));
        return hermitian_part(vectors * mapped.cast<cplx>().asDiagonal() * vectors.adjoint());
    }
};

/// Spectrum of a positive-definite matrix; eigenvalues clamped below at kEigenFloor, non-positive rejected.
inline SelfAdjointSpectrum positive_spectrum(const CMat& h)
{
    SelfAdjointSpectrum s(h);
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        if (!(s.values(i) > 0.0))
            throw DomainError("matrix is not positive definite");
        s.values(i) = std::max(s.values(i), kEigenFloor);
    }
    return s;
}

inline CMat spd_log(const CMat& h) { return positive_spectrum(h).apply([](double x) { return std::log(x); }); }
inline CMat spd_sqrt(const CMat& h) { return positive_spectrum(h).apply([](double x) { return std::sqrt(x); }); }
inline CMat spd_inv_sqrt(const CMat& h) { return positive_spectrum(h).apply([](double x) { return 1.0 / std::sqrt(x); }); }
inline CMat spd_pow(const CMat& h, double t)
{
    return positive_spectrum(h).apply([t](double x) { return std::pow(x, t); });
}
inline CMat spd_inverse(const CMat& h) { return positive_spectrum(h).apply([](double x) { return 1.0 / x; }); }

/// exp of a self-adjoint matrix.
inline CMat sa_exp(const CMat& x) { return SelfAdjointSpectrum(x).apply([](double v) { return std::exp(v); }); }

/// Matrix inverse with a singularity check.
inline CMat checked_inverse(const CMat& g)
{
    Eigen::FullPivLU<CMat> lu(g);
    if (!lu.isInvertible())
        throw DomainError("matrix is singular");
    return lu.inverse();
}

inline Mat checked_inverse(const Mat& g)
{
    Eigen::FullPivLU<Mat> lu(g);
    if (!lu.isInvertible())
        throw DomainError("matrix is singular");
    return lu.inverse();
}

/// Real trace of a product of matrices that is known to be real (e.g. trace(h^-1 X h^-1 Y) on self-adjoint data).
inline double real_trace(const CMat& m) { return m.trace().real(); }

/// Matrix commutator.
template <class M>
M bracket(const M& a, const M& b)
{
    return a * b - b * a;
}

} // namespace linalg
} // namespace npc
