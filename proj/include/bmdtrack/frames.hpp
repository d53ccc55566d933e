#pragma once

// Coordinate frames (ECI, ECEF, ENU, missile BODY) on a spherical, uniformly
// rotating Earth. ECI coincides with ECEF at scenario time t = 0.

#include "bmdtrack/core.hpp"

#include <variant>

namespace bmd {

struct Earth {
    static constexpr double radius = 6371.0e3;          // m
    static constexpr double rotation_rate = 7.2921159e-5;  // rad/s
};

struct GeodeticSite {
    double latitude = 0.0;   // rad
    double longitude = 0.0;  // rad
    double altitude = 0.0;   // m

    bool valid() const {
        return std::isfinite(latitude) && std::isfinite(longitude) && std::isfinite(altitude) &&
               std::abs(latitude) <= kPi / 2.0;
    }
};

/// Direction-cosine matrix taking ECI vectors into body axes
/// (x through the nose, y right wing, z down).
class Attitude {
public:
    Attitude() : dcm_(Mat3::Identity()) {}

    static Attitude from_dcm(const Mat3& eci_to_body) {
        const double ortho = (eci_to_body.transpose() * eci_to_body - Mat3::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
        if (!(ortho < 1e-10) || std::abs(eci_to_body.determinant() - 1.0) > 1e-10) {
            throw FrameError("attitude matrix is not a proper rotation");
        }
        Attitude a;
        a.dcm_ = eci_to_body;
        return a;
    }

    /// Body axes with x along `boresight` and z as close to `down` as possible.
    static Attitude from_boresight(const Vec3& boresight, const Vec3& down) {
        const Vec3 x = boresight.normalized();
        Vec3 y = down.cross(x);
        if (y.norm() < 1e-9 * down.norm()) {
            // boresight parallel to down; any roll will do
            y = (std::abs(x.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).cross(x);
        }
        y.normalize();
        const Vec3 z = x.cross(y);
        Mat3 m;
        m.row(0) = x.transpose();
        m.row(1) = y.transpose();
        m.row(2) = z.transpose();
        return from_dcm(m);
    }

    const Mat3& eci_to_body() const { return dcm_; }

private:
    Mat3 dcm_;
};

struct EciFrame {};
struct EcefFrame {};
struct EnuFrame {
    GeodeticSite site;
};
/// Seeker body frame: origin at the interceptor (ECI position/velocity at the
/// frame epoch), axes from `attitude`.
struct BodyFrame {
    Attitude attitude;
    Vec3 origin_position = Vec3::Zero();
    Vec3 origin_velocity = Vec3::Zero();
};

using FrameTag = std::variant<EciFrame, EcefFrame, EnuFrame, BodyFrame>;

struct State6 {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    FrameTag frame = EciFrame{};
    double epoch = 0.0;

    Vec6 vector() const {
        Vec6 v;
        v << position, velocity;
        return v;
    }
    static State6 from_vector(const Vec6& x, FrameTag frame = EciFrame{}, double epoch = 0.0) {
        return State6{x.head<3>(), x.tail<3>(), std::move(frame), epoch};
    }
};

/// Affine map on 6-vectors: x_to = matrix * x_from + offset. The diagonal
/// 3x3 blocks are rotations; the lower-left block carries the Earth-rotation
/// transport term when one of the frames rotates.
class StateTransform {
public:
    StateTransform() : m_(Mat6::Identity()), b_(Vec6::Zero()) {}
    StateTransform(const Mat6& m, const Vec6& b) : m_(m), b_(b) {}

    static StateTransform rotation(const Mat3& r) {
        Mat6 m = Mat6::Zero();
        m.topLeftCorner<3, 3>() = r;
        m.bottomRightCorner<3, 3>() = r;
        return {m, Vec6::Zero()};
    }

    const Mat6& matrix() const { return m_; }
    const Vec6& offset() const { return b_; }
    Mat3 rotation_block() const { return m_.topLeftCorner<3, 3>(); }

    Vec6 apply(const Vec6& x) const { return m_ * x + b_; }
    Vec3 apply_position(const Vec3& p) const {
        return m_.topLeftCorner<3, 3>() * p + b_.head<3>();
    }

    /// this ∘ first: apply `first`, then this.
    StateTransform after(const StateTransform& first) const {
        return {m_ * first.m_, m_ * first.b_ + b_};
    }

    StateTransform inverse() const {
        // Block lower-triangular with orthonormal diagonal blocks.
        const Mat3 r1 = m_.topLeftCorner<3, 3>();
        const Mat3 r2 = m_.bottomRightCorner<3, 3>();
        const Mat3 c = m_.bottomLeftCorner<3, 3>();
        Mat6 inv = Mat6::Zero();
        inv.topLeftCorner<3, 3>() = r1.transpose();
        inv.bottomRightCorner<3, 3>() = r2.transpose();
        inv.bottomLeftCorner<3, 3>() = -r2.transpose() * c * r1.transpose();
        return {inv, -inv * b_};
    }

private:
    Mat6 m_;
    Vec6 b_;
};

namespace detail {

inline Mat3 rot_z_frame(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 r;
    r << c, s, 0, -s, c, 0, 0, 0, 1;
    return r;
}

inline Mat3 skew(const Vec3& w) {
    Mat3 s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

inline Vec3 site_ecef(const GeodeticSite& site) {
    const double r = Earth::radius + site.altitude;
    return r * Vec3(std::cos(site.latitude) * std::cos(site.longitude),
                    std::cos(site.latitude) * std::sin(site.longitude),
                    std::sin(site.latitude));
}

/// Rows are the east, north, up unit vectors in ECEF.
inline Mat3 ecef_to_enu_rotation(const GeodeticSite& site) {
    const double sl = std::sin(site.latitude), cl = std::cos(site.latitude);
    const double so = std::sin(site.longitude), co = std::cos(site.longitude);
    Mat3 r;
    r << -so, co, 0,
         -sl * co, -sl * so, cl,
         cl * co, cl * so, sl;
    return r;
}

inline StateTransform eci_to_ecef_transform(double t) {
    const Mat3 r = rot_z_frame(Earth::rotation_rate * t);
    const Mat3 w = skew(Vec3(0, 0, Earth::rotation_rate));
    Mat6 m = Mat6::Zero();
    m.topLeftCorner<3, 3>() = r;
    m.bottomRightCorner<3, 3>() = r;
    m.bottomLeftCorner<3, 3>() = -r * w;
    return {m, Vec6::Zero()};
}

inline StateTransform ecef_to_enu_transform(const GeodeticSite& site) {
    const Mat3 r = ecef_to_enu_rotation(site);
    Vec6 origin = Vec6::Zero();
    origin.head<3>() = site_ecef(site);
    StateTransform rot = StateTransform::rotation(r);
    return {rot.matrix(), -rot.matrix() * origin};
}

inline StateTransform eci_to_body_transform(const BodyFrame& body) {
    StateTransform rot = StateTransform::rotation(body.attitude.eci_to_body());
    Vec6 origin;
    origin << body.origin_position, body.origin_velocity;
    return {rot.matrix(), -rot.matrix() * origin};
}

inline void check_resolvable(const FrameTag& f) {
    if (const auto* enu = std::get_if<EnuFrame>(&f); enu && !enu->site.valid()) {
        throw FrameError("ENU site is not a valid geodetic position");
    }
}

/// ECI -> frame at time t.
inline StateTransform from_eci(const FrameTag& f, double t) {
    check_resolvable(f);
    return std::visit(
        [t](const auto& tag) -> StateTransform {
            using T = std::decay_t<decltype(tag)>;
            if constexpr (std::is_same_v<T, EciFrame>) {
                return {};
            } else if constexpr (std::is_same_v<T, EcefFrame>) {
                return eci_to_ecef_transform(t);
            } else if constexpr (std::is_same_v<T, EnuFrame>) {
                return ecef_to_enu_transform(tag.site).after(eci_to_ecef_transform(t));
            } else {
                return eci_to_body_transform(tag);
            }
        },
        f);
}

}  // namespace detail

inline State6 eci_to_ecef(double t, const State6& s) {
    if (!std::holds_alternative<EciFrame>(s.frame)) throw FrameError("eci_to_ecef: input not ECI");
    State6 out = State6::from_vector(detail::eci_to_ecef_transform(t).apply(s.vector()),
                                     EcefFrame{}, s.epoch);
    return out;
}

inline State6 ecef_to_enu(const GeodeticSite& site, const State6& s) {
    if (!std::holds_alternative<EcefFrame>(s.frame)) throw FrameError("ecef_to_enu: input not ECEF");
    if (!site.valid()) throw FrameError("ecef_to_enu: invalid site");
    return State6::from_vector(detail::ecef_to_enu_transform(site).apply(s.vector()),
                               EnuFrame{site}, s.epoch);
}

inline State6 enu_to_ecef(const GeodeticSite& site, const State6& s) {
    if (!std::holds_alternative<EnuFrame>(s.frame)) throw FrameError("enu_to_ecef: input not ENU");
    return State6::from_vector(detail::ecef_to_enu_transform(site).inverse().apply(s.vector()),
                               EcefFrame{}, s.epoch);
}

/// Transform taking states expressed in `from` to `to` at scenario time t.
inline StateTransform state_transform(const FrameTag& from, const FrameTag& to, double t) {
    return detail::from_eci(to, t).after(detail::from_eci(from, t).inverse());
}

inline State6 transform_state(const State6& s, const FrameTag& to, double t) {
    return State6::from_vector(state_transform(s.frame, to, t).apply(s.vector()), to, s.epoch);
}

}  // namespace bmd
