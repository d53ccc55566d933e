#pragma once

// Two-body Kepler dynamics in ECI: state derivative, analytic Jacobian and
// fixed-step integrators.

#include "bmdtrack/core.hpp"
#include "bmdtrack/frames.hpp"

#include <algorithm>
#include <string_view>

namespace bmd {

struct PhysicalConstants {
    double mu = 3.986004418e14;  // m^3/s^2
};

enum class Integrator { Euler, Rk4 };

inline std::string_view to_string(Integrator i) { return i == Integrator::Euler ? "euler" : "rk4"; }

/// Substep control for propagation over an interval.
struct PropagationOptions {
    Integrator integrator = Integrator::Euler;
    double max_step = 0.5;  // s
};

inline constexpr double kMinKeplerRadius = 1.0;  // m

/// d/dt (p, v) = (v, -mu p / |p|^3).
inline Vec6 kepler_derivative(const Vec6& x, const PhysicalConstants& c = {}) {
    const Vec3 p = x.head<3>();
    const double r = p.norm();
    if (!(r >= kMinKeplerRadius)) {
        throw SingularityError("Kepler dynamics evaluated at |p| = " + std::to_string(r) + " m");
    }
    Vec6 rate;
    rate << x.tail<3>(), -c.mu / (r * r * r) * p;
    return rate;
}

inline Vec6 kepler_derivative(const State6& s, const PhysicalConstants& c = {}) {
    if (!std::holds_alternative<EciFrame>(s.frame)) throw FrameError("Kepler dynamics require ECI");
    return kepler_derivative(s.vector(), c);
}

/// F = df/dx. Upper-right block is I; lower-left is -mu (I/r^3 - 3 p p^T / r^5).
inline Mat6 kepler_jacobian(const Vec6& x, const PhysicalConstants& c = {}) {
    const Vec3 p = x.head<3>();
    const double r = p.norm();
    if (!(r >= kMinKeplerRadius)) {
        throw SingularityError("Kepler Jacobian evaluated at |p| = " + std::to_string(r) + " m");
    }
    const double r3 = r * r * r;
    const double r5 = r3 * r * r;
    Mat6 f = Mat6::Zero();
    f.topRightCorner<3, 3>() = Mat3::Identity();
    f.bottomLeftCorner<3, 3>() = -c.mu * (Mat3::Identity() / r3 - 3.0 * p * p.transpose() / r5);
    return f;
}

inline Vec6 propagate_euler(const Vec6& x, double dt, const PhysicalConstants& c = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagate_euler: dt must be positive");
    return x + dt * kepler_derivative(x, c);
}

inline Vec6 propagate_rk4(const Vec6& x, double dt, const PhysicalConstants& c = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("propagate_rk4: dt must be positive");
    const Vec6 k1 = kepler_derivative(x, c);
    const Vec6 k2 = kepler_derivative(Vec6(x + 0.5 * dt * k1), c);
    const Vec6 k3 = kepler_derivative(Vec6(x + 0.5 * dt * k2), c);
    const Vec6 k4 = kepler_derivative(Vec6(x + dt * k3), c);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline State6 propagate_euler(const State6& s, double dt, const PhysicalConstants& c = {}) {
    return State6::from_vector(propagate_euler(s.vector(), dt, c), s.frame, s.epoch + dt);
}

inline State6 propagate_rk4(const State6& s, double dt, const PhysicalConstants& c = {}) {
    return State6::from_vector(propagate_rk4(s.vector(), dt, c), s.frame, s.epoch + dt);
}

inline Vec6 propagate_step(const Vec6& x, double dt, Integrator integrator,
                           const PhysicalConstants& c = {}) {
    return integrator == Integrator::Euler ? propagate_euler(x, dt, c) : propagate_rk4(x, dt, c);
}

/// Number of equal substeps used to cover `interval` with steps <= max_step.
inline int substep_count(double interval, double max_step) {
    if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
    return std::max(1, static_cast<int>(std::ceil(interval / max_step - 1e-12)));
}

/// Propagates over `interval` seconds in ceil(interval / max_step) equal substeps.
inline Vec6 propagate(const Vec6& x, double interval, const PropagationOptions& opt,
                      const PhysicalConstants& c = {}) {
    if (!(interval > 0.0)) throw std::invalid_argument("propagate: interval must be positive");
    const int n = substep_count(interval, opt.max_step);
    const double h = interval / n;
    Vec6 y = x;
    for (int i = 0; i < n; ++i) y = propagate_step(y, h, opt.integrator, c);
    return y;
}

inline double specific_energy(const Vec6& x, const PhysicalConstants& c = {}) {
    return 0.5 * x.tail<3>().squaredNorm() - c.mu / x.head<3>().norm();
}

inline Vec3 angular_momentum(const Vec6& x) { return x.head<3>().cross(x.tail<3>()); }

}  // namespace bmd
