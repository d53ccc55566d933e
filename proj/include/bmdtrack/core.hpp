#pragma once

// Common types, error classes and small numeric helpers shared by every
// bmdtrack module.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace bmd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

template <int M>
using VecM = Eigen::Matrix<double, M, 1>;
template <int M>
using MatM = Eigen::Matrix<double, M, M>;
template <int M>
using MatM6 = Eigen::Matrix<double, M, 6>;
template <int M>
using Mat6M = Eigen::Matrix<double, 6, M>;

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kepler dynamics evaluated too close to the origin.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Sensor geometry where a measurement function or its Jacobian is undefined.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Frame pair or frame parameters that cannot be resolved.
class FrameError : public Error {
public:
    using Error::Error;
};

/// Matrix factorization / inversion failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration; `path` names the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
    using Plain = typename Derived::PlainObject;
    Plain out = 0.5 * (m + m.transpose());
    return out;
}

template <typename Derived>
double max_asymmetry(const Eigen::MatrixBase<Derived>& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Lower Cholesky factor. Throws NumericalError naming the first leading
/// minor that is not positive definite (1-based).
template <int N>
Eigen::Matrix<double, N, N> cholesky_lower(const Eigen::Matrix<double, N, N>& a) {
    const Eigen::Index n = a.rows();
    Eigen::Matrix<double, N, N> l = Eigen::Matrix<double, N, N>::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw NumericalError("Cholesky factorization failed: leading minor " +
                                 std::to_string(j + 1) + " is not positive definite");
        }
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

/// Inverse of a symmetric positive-definite matrix.
template <int N>
Eigen::Matrix<double, N, N> spd_inverse(const Eigen::Matrix<double, N, N>& a,
                                        const char* what = "matrix") {
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(what) + " is not positive definite");
    }
    Eigen::Matrix<double, N, N> inv =
        llt.solve(Eigen::Matrix<double, N, N>::Identity(a.rows(), a.cols()));
    return symmetrized(inv);
}

/// Square root of a symmetric PSD matrix (zero eigenvalues allowed).
template <int N>
Eigen::Matrix<double, N, N> psd_sqrt(const Eigen::Matrix<double, N, N>& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(a);
    auto ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Smallest eigenvalue of a symmetric matrix.
template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
    using Plain = typename Derived::PlainObject;
    Eigen::SelfAdjointEigenSolver<Plain> es(symmetrized(a));
    return es.eigenvalues().minCoeff();
}

}  // namespace bmd
