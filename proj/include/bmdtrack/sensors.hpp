#pragma once

// RF (range, azimuth, elevation) and IR (azimuth, elevation) measurement
// models, their Jacobians, and synthetic measurement generation.
//
// RF angles are in the site's ENU frame: azimuth = atan2(e, n) measured from
// north towards east, elevation = asin(u / r). IR angles are in missile body
// axes (x nose, y right wing, z down): azimuth = atan2(y, x),
// elevation = atan2(-z, sqrt(x^2 + y^2)).

#include "bmdtrack/core.hpp"
#include "bmdtrack/frames.hpp"

#include <optional>
#include <random>
#include <variant>

namespace bmd {

using SensorId = int;

/// Truth-object tag carried by simulated measurements; kFalseAlarm for clutter.
inline constexpr int kFalseAlarm = -1;

struct RfMeasurement {
    Vec3 z = Vec3::Zero();  // range (m), azimuth (rad), elevation (rad)
    Mat3 noise_cov = Mat3::Identity();
    SensorId sensor_id = 0;
    double timestamp = 0.0;
    GeodeticSite site;
    int origin = kFalseAlarm;  // simulation metadata, never read by the tracker
};

struct IrMeasurement {
    Vec2 z = Vec2::Zero();  // azimuth (rad), elevation (rad)
    Mat2 noise_cov = Mat2::Identity();
    SensorId sensor_id = 0;
    double timestamp = 0.0;
    BodyFrame body;
    int origin = kFalseAlarm;
};

using Measurement = std::variant<RfMeasurement, IrMeasurement>;

/// Which measurement components are angles (residuals wrapped to (-pi, pi]).
inline constexpr std::array<bool, 3> kRfAngular{false, true, false};
inline constexpr std::array<bool, 2> kIrAngular{true, false};

// ---------------------------------------------------------------------------
// RF model
// ---------------------------------------------------------------------------

inline Vec3 h_rf(const Vec3& p_enu) {
    const double e = p_enu.x(), n = p_enu.y(), u = p_enu.z();
    if (e == 0.0 && n == 0.0) throw GeometryError("h_rf: azimuth undefined at zenith (e = n = 0)");
    const double r = p_enu.norm();
    return {r, std::atan2(e, n), std::asin(std::clamp(u / r, -1.0, 1.0))};
}

/// 3x6 Jacobian of h_rf with respect to the ENU state (velocity columns zero).
inline MatM6<3> h_rf_jacobian(const Vec3& p_enu) {
    const double e = p_enu.x(), n = p_enu.y(), u = p_enu.z();
    const double rho2 = e * e + n * n;
    if (!(rho2 > 0.0)) throw GeometryError("h_rf_jacobian: zenith geometry (e = n = 0)");
    const double rho = std::sqrt(rho2);
    const double r2 = rho2 + u * u;
    const double r = std::sqrt(r2);
    MatM6<3> h = MatM6<3>::Zero();
    h.row(0).head<3>() << e / r, n / r, u / r;
    h.row(1).head<3>() << n / rho2, -e / rho2, 0.0;
    h.row(2).head<3>() << -(e * u / rho) / r2, -(n * u / rho) / r2, rho / r2;
    return h;
}

// ---------------------------------------------------------------------------
// IR model
// ---------------------------------------------------------------------------

inline Vec2 h_ir(const Vec3& p_body) {
    const double x = p_body.x(), y = p_body.y(), z = p_body.z();
    if (x == 0.0 && y == 0.0) throw GeometryError("h_ir: target on the body z axis");
    return {std::atan2(y, x), std::atan2(-z, std::hypot(x, y))};
}

/// 2x6 Jacobian of h_ir with respect to the body-frame state.
inline MatM6<2> h_ir_jacobian(const Vec3& p_body) {
    const double x = p_body.x(), y = p_body.y(), z = p_body.z();
    const double rho2 = x * x + y * y;
    if (!(rho2 > 0.0)) throw GeometryError("h_ir_jacobian: target on the body z axis");
    const double rho = std::sqrt(rho2);
    const double r2 = rho2 + z * z;
    MatM6<2> h = MatM6<2>::Zero();
    h.row(0).head<3>() << -y / rho2, x / rho2, 0.0;
    h.row(1).head<3>() << (x * z / rho) / r2, (y * z / rho) / r2, -rho / r2;
    return h;
}

/// Inverse of h_rf: ENU position from (range, azimuth, elevation).
inline Vec3 rf_to_enu(const Vec3& z) {
    const double r = z(0), az = z(1), el = z(2);
    return {r * std::cos(el) * std::sin(az), r * std::cos(el) * std::cos(az), r * std::sin(el)};
}

/// Jacobian of rf_to_enu.
inline Mat3 rf_to_enu_jacobian(const Vec3& z) {
    const double r = z(0), az = z(1), el = z(2);
    const double ce = std::cos(el), se = std::sin(el), ca = std::cos(az), sa = std::sin(az);
    Mat3 j;
    j << ce * sa, r * ce * ca, -r * se * sa,
         ce * ca, -r * ce * sa, -r * se * ca,
         se, 0.0, r * ce;
    return j;
}

/// Unit line of sight in body axes for IR angles.
inline Vec3 ir_line_of_sight(const Vec2& z) {
    const double az = z(0), el = z(1);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), -std::sin(el)};
}

// ---------------------------------------------------------------------------
// Sensor configuration and simulation
// ---------------------------------------------------------------------------

struct RfSensorConfig {
    SensorId id = 0;
    GeodeticSite site;
    Mat3 noise_cov = Eigen::Vector3d(25.0, 1e-6, 1e-6).asDiagonal();
    double detection_probability = 0.95;
    double false_alarm_rate = 0.0;  // expected clutter returns per scan
    double min_range = 1.0e3;       // clutter region (m)
    double max_range = 3.0e6;
    double max_elevation = kPi / 2.0;
};

struct IrSensorConfig {
    SensorId id = 100;
    Mat2 noise_cov = Eigen::Vector2d(0.25e-6, 0.25e-6).asDiagonal();
    double detection_probability = 0.95;
    double false_alarm_rate = 0.0;
    double fov_half_angle = kPi / 6.0;  // rad
};

namespace detail {

template <int M>
VecM<M> gaussian_sample(const MatM<M>& cov, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    VecM<M> w;
    for (int i = 0; i < M; ++i) w(i) = n01(rng);
    return psd_sqrt<M>(cov) * w;
}

inline bool detected(double pd, std::mt19937_64& rng) {
    if (pd >= 1.0) return true;
    if (pd <= 0.0) return false;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < pd;
}

}  // namespace detail

/// Noisy RF measurement of an ECI truth state, or nullopt on a missed
/// detection or degenerate geometry.
inline std::optional<RfMeasurement> simulate_measurement(const State6& truth,
                                                         const RfSensorConfig& sensor,
                                                         std::mt19937_64& rng) {
    if (!detail::detected(sensor.detection_probability, rng)) return std::nullopt;
    const StateTransform t = state_transform(truth.frame, EnuFrame{sensor.site}, truth.epoch);
    const Vec3 p_enu = t.apply_position(truth.position);
    Vec3 z;
    try {
        z = h_rf(p_enu);
    } catch (const GeometryError&) {
        return std::nullopt;
    }
    z += detail::gaussian_sample<3>(sensor.noise_cov, rng);
    z(1) = wrap_angle(z(1));
    z(2) = std::clamp(z(2), -kPi / 2.0, kPi / 2.0);
    RfMeasurement m;
    m.z = z;
    m.noise_cov = sensor.noise_cov;
    m.sensor_id = sensor.id;
    m.timestamp = truth.epoch;
    m.site = sensor.site;
    return m;
}

inline std::optional<IrMeasurement> simulate_measurement(const State6& truth,
                                                         const IrSensorConfig& sensor,
                                                         const BodyFrame& body,
                                                         std::mt19937_64& rng) {
    if (!detail::detected(sensor.detection_probability, rng)) return std::nullopt;
    const StateTransform t = state_transform(truth.frame, body, truth.epoch);
    Vec2 z;
    try {
        z = h_ir(t.apply_position(truth.position));
    } catch (const GeometryError&) {
        return std::nullopt;
    }
    z += detail::gaussian_sample<2>(sensor.noise_cov, rng);
    z(0) = wrap_angle(z(0));
    z(1) = std::clamp(z(1), -kPi / 2.0, kPi / 2.0);
    IrMeasurement m;
    m.z = z;
    m.noise_cov = sensor.noise_cov;
    m.sensor_id = sensor.id;
    m.timestamp = truth.epoch;
    m.body = body;
    return m;
}

inline std::optional<RfMeasurement> simulate_measurement(const State6& truth,
                                                         const RfSensorConfig& sensor,
                                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return simulate_measurement(truth, sensor, rng);
}

/// Sensor-frame elevation of an ECI position as seen from an RF site.
inline double site_elevation(const Vec3& p_eci, const GeodeticSite& site, double t) {
    const Vec3 p = state_transform(EciFrame{}, EnuFrame{site}, t).apply_position(p_eci);
    return std::atan2(p.z(), std::hypot(p.x(), p.y()));
}

/// Angle between an ECI position and the seeker boresight.
inline double off_boresight_angle(const Vec3& p_eci, const BodyFrame& body) {
    const Vec3 p = body.attitude.eci_to_body() * (p_eci - body.origin_position);
    return std::atan2(std::hypot(p.y(), p.z()), p.x());
}

}  // namespace bmd
