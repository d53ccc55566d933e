#pragma once

// Extended and unscented Kalman filters over Kepler dynamics with RF and IR
// measurement updates. All operations are pure StateEstimate -> StateEstimate
// transformations; estimates are kept in ECI.

#include "bmdtrack/core.hpp"
#include "bmdtrack/dynamics.hpp"
#include "bmdtrack/frames.hpp"
#include "bmdtrack/sensors.hpp"

#include <array>
#include <string_view>

namespace bmd {

struct StateEstimate {
    Vec6 mean = Vec6::Zero();
    Mat6 cov = Mat6::Identity();
    double epoch = 0.0;

    State6 state() const { return State6::from_vector(mean, EciFrame{}, epoch); }
};

using ProcessNoise = Mat6;

/// diag(0, 0, 0, q, q, q) * dt
inline ProcessNoise default_process_noise(double dt, double q = 1e-4) {
    ProcessNoise qm = ProcessNoise::Zero();
    qm.bottomRightCorner<3, 3>() = q * dt * Mat3::Identity();
    return qm;
}

inline constexpr double kEpochTolerance = 1e-6;

/// Normalized estimation error squared of `est` against a truth vector.
inline double nees(const StateEstimate& est, const Vec6& truth) {
    const Vec6 e = truth - est.mean;
    return e.dot(est.cov.ldlt().solve(e));
}

// ---------------------------------------------------------------------------
// EKF time update
// ---------------------------------------------------------------------------

/// Mean propagated with the chosen integrator; covariance
/// F_k Sigma F_k^T + Q with F_k = I + h F evaluated at the start of each substep.
/// Q is the noise for the whole interval and is spread evenly over substeps.
inline StateEstimate ekf_time_update(const StateEstimate& est, double dt, const ProcessNoise& q,
                                     const PropagationOptions& opt = {},
                                     const PhysicalConstants& c = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("ekf_time_update: dt must be positive");
    const int n = substep_count(dt, opt.max_step);
    const double h = dt / n;
    Vec6 x = est.mean;
    Mat6 p = est.cov;
    for (int i = 0; i < n; ++i) {
        const Mat6 fk = Mat6::Identity() + h * kepler_jacobian(x, c);
        x = propagate_step(x, h, opt.integrator, c);
        p = fk * p * fk.transpose() + q / n;
    }
    return {x, symmetrized(p), est.epoch + dt};
}

// ---------------------------------------------------------------------------
// Sigma points
// ---------------------------------------------------------------------------

inline constexpr int kStateDim = 6;
inline constexpr int kSigmaCount = 2 * kStateDim + 1;

/// Julier-Uhlmann parameterization: W_0 = kappa / (n + kappa),
/// W_i = 1 / (2 (n + kappa)), spread sqrt(n + kappa).
struct UkfParams {
    double kappa = 0.0;

    double spread() const { return std::sqrt(kStateDim + kappa); }
    double weight(int i) const {
        return i == 0 ? kappa / (kStateDim + kappa) : 0.5 / (kStateDim + kappa);
    }
    void validate() const {
        if (!(kStateDim + kappa > 0.0)) throw std::invalid_argument("UKF requires n + kappa > 0");
    }
};

struct SigmaSet {
    std::array<Vec6, kSigmaCount> points;
    std::array<double, kSigmaCount> weights{};

    Vec6 mean() const {
        Vec6 m = Vec6::Zero();
        for (int i = 0; i < kSigmaCount; ++i) m += weights[i] * points[i];
        return m;
    }
    Mat6 covariance(const Vec6& about) const {
        Mat6 p = Mat6::Zero();
        for (int i = 0; i < kSigmaCount; ++i) {
            const Vec6 d = points[i] - about;
            p += weights[i] * d * d.transpose();
        }
        return p;
    }
};

/// X_0 = mean, X_{i}, X_{i+n} = mean +/- sqrt(n + kappa) l_i with l_i the
/// columns of the lower Cholesky factor of the covariance.
inline SigmaSet sigma_points(const StateEstimate& est, const UkfParams& params = {}) {
    params.validate();
    const Mat6 l = cholesky_lower<6>(est.cov);
    const double s = params.spread();
    SigmaSet set;
    set.points[0] = est.mean;
    set.weights[0] = params.weight(0);
    for (int i = 0; i < kStateDim; ++i) {
        set.points[1 + i] = est.mean + s * l.col(i);
        set.points[1 + kStateDim + i] = est.mean - s * l.col(i);
        set.weights[1 + i] = params.weight(1 + i);
        set.weights[1 + kStateDim + i] = params.weight(1 + kStateDim + i);
    }
    return set;
}

/// Unscented time update through an arbitrary state flow Vec6 -> Vec6.
template <typename Flow>
StateEstimate ukf_time_update_with(const StateEstimate& est, double dt, const ProcessNoise& q,
                                   const UkfParams& params, Flow&& flow) {
    SigmaSet set = sigma_points(est, params);
    for (auto& x : set.points) x = flow(x);
    const Vec6 mean = set.mean();
    return {mean, symmetrized(Mat6(set.covariance(mean) + q)), est.epoch + dt};
}

inline StateEstimate ukf_time_update(const StateEstimate& est, double dt, const ProcessNoise& q,
                                     const UkfParams& params = {},
                                     const PropagationOptions& opt = {},
                                     const PhysicalConstants& c = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("ukf_time_update: dt must be positive");
    return ukf_time_update_with(est, dt, q, params,
                                [&](const Vec6& x) { return propagate(x, dt, opt, c); });
}

// ---------------------------------------------------------------------------
// Measurement updates
// ---------------------------------------------------------------------------

/// Innovation statistics for one measurement partition: residual z - zeta,
/// innovation covariance S (including R), and state/measurement cross
/// covariance. EKF innovations also carry H and R for the Joseph form.
template <int M>
struct Innovation {
    VecM<M> residual = VecM<M>::Zero();
    MatM<M> cov = MatM<M>::Identity();
    Mat6M<M> cross = Mat6M<M>::Zero();
    MatM6<M> jacobian = MatM6<M>::Zero();
    MatM<M> noise = MatM<M>::Zero();
    bool has_jacobian = false;

    double mahalanobis2() const { return residual.dot(cov.ldlt().solve(residual)); }
};

/// A measurement linearized about x0: h(x) ~ h0 + H (x - x0).
template <int M>
struct LinearMeasurement {
    VecM<M> z = VecM<M>::Zero();
    VecM<M> h0 = VecM<M>::Zero();
    MatM6<M> jacobian = MatM6<M>::Zero();
    MatM<M> noise = MatM<M>::Identity();
    Vec6 x0 = Vec6::Zero();
    std::array<bool, M> angular{};

    VecM<M> predicted(const Vec6& x) const { return h0 + jacobian * (x - x0); }
};

template <int M>
VecM<M> wrap_residual(VecM<M> v, const std::array<bool, M>& angular) {
    for (int i = 0; i < M; ++i)
        if (angular[i]) v(i) = wrap_angle(v(i));
    return v;
}

template <int M>
Innovation<M> ekf_innovation(const StateEstimate& est, const LinearMeasurement<M>& lm) {
    Innovation<M> in;
    in.residual = wrap_residual<M>(lm.z - lm.predicted(est.mean), lm.angular);
    in.cross = est.cov * lm.jacobian.transpose();
    in.cov = symmetrized(MatM<M>(lm.jacobian * in.cross + lm.noise));
    in.jacobian = lm.jacobian;
    in.noise = lm.noise;
    in.has_jacobian = true;
    return in;
}

/// Gain A = Sigma_xz S^-1; mean += A nu. Covariance uses Sigma - A H Sigma
/// when H is known (EKF), Sigma - A S A^T otherwise, or the Joseph form.
template <int M>
StateEstimate apply_innovation(const StateEstimate& est, const Innovation<M>& in,
                               bool joseph = false) {
    Eigen::LDLT<MatM<M>> ldlt(in.cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
        throw NumericalError("innovation covariance is not invertible");
    }
    const Mat6M<M> gain = ldlt.solve(in.cross.transpose()).transpose();
    StateEstimate out = est;
    out.mean = est.mean + gain * in.residual;
    if (in.has_jacobian && joseph) {
        const Mat6 ikh = Mat6::Identity() - gain * in.jacobian;
        out.cov = ikh * est.cov * ikh.transpose() + gain * in.noise * gain.transpose();
    } else if (in.has_jacobian) {
        out.cov = est.cov - gain * in.jacobian * est.cov;
    } else {
        out.cov = est.cov - gain * in.cov * gain.transpose();
    }
    out.cov = symmetrized(out.cov);
    return out;
}

template <int M>
struct UpdateResult {
    StateEstimate estimate;
    Innovation<M> innovation;
};

template <int M>
UpdateResult<M> kalman_update(const StateEstimate& est, const LinearMeasurement<M>& lm,
                              bool joseph = false) {
    Innovation<M> in = ekf_innovation(est, lm);
    return {apply_innovation(est, in, joseph), in};
}

inline void check_time_aligned(double est_epoch, double z_time) {
    if (std::abs(est_epoch - z_time) > kEpochTolerance) {
        throw std::invalid_argument("estimate epoch " + std::to_string(est_epoch) +
                                    " does not match measurement time " + std::to_string(z_time));
    }
}

/// ECI -> site ENU transform at the measurement time.
inline StateTransform rf_transform(const RfMeasurement& z) {
    return state_transform(EciFrame{}, EnuFrame{z.site}, z.timestamp);
}

inline StateTransform ir_transform(const IrMeasurement& z) {
    return state_transform(EciFrame{}, z.body, z.timestamp);
}

/// RF model linearized at the estimate mean; H_eci = H'_enu * T.
inline LinearMeasurement<3> linearize_rf(const StateEstimate& est, const RfMeasurement& z,
                                         const StateTransform& eci_to_enu) {
    const Vec3 p = eci_to_enu.apply_position(est.mean.head<3>());
    LinearMeasurement<3> lm;
    lm.z = z.z;
    lm.h0 = h_rf(p);
    lm.jacobian = h_rf_jacobian(p) * eci_to_enu.matrix();
    lm.noise = z.noise_cov;
    lm.x0 = est.mean;
    lm.angular = kRfAngular;
    return lm;
}

inline LinearMeasurement<2> linearize_ir(const StateEstimate& est, const IrMeasurement& z,
                                         const StateTransform& eci_to_body) {
    const Vec3 p = eci_to_body.apply_position(est.mean.head<3>());
    LinearMeasurement<2> lm;
    lm.z = z.z;
    lm.h0 = h_ir(p);
    lm.jacobian = h_ir_jacobian(p) * eci_to_body.matrix();
    lm.noise = z.noise_cov;
    lm.x0 = est.mean;
    lm.angular = kIrAngular;
    return lm;
}

inline UpdateResult<3> ekf_update_rf(const StateEstimate& est, const RfMeasurement& z,
                                     const StateTransform& eci_to_enu, bool joseph = false) {
    check_time_aligned(est.epoch, z.timestamp);
    return kalman_update(est, linearize_rf(est, z, eci_to_enu), joseph);
}

inline UpdateResult<3> ekf_update_rf(const StateEstimate& est, const RfMeasurement& z,
                                     bool joseph = false) {
    return ekf_update_rf(est, z, rf_transform(z), joseph);
}

inline UpdateResult<2> ekf_update_ir(const StateEstimate& est, const IrMeasurement& z,
                                     const StateTransform& eci_to_body, bool joseph = false) {
    check_time_aligned(est.epoch, z.timestamp);
    return kalman_update(est, linearize_ir(est, z, eci_to_body), joseph);
}

inline UpdateResult<2> ekf_update_ir(const StateEstimate& est, const IrMeasurement& z,
                                     bool joseph = false) {
    return ekf_update_ir(est, z, ir_transform(z), joseph);
}

/// Stacked RF+IR update (5-D measurement, block-diagonal noise).
inline LinearMeasurement<5> augment(const LinearMeasurement<3>& rf, const LinearMeasurement<2>& ir) {
    LinearMeasurement<5> lm;
    lm.z << rf.z, ir.z;
    lm.h0 << rf.h0, ir.predicted(rf.x0);
    lm.jacobian << rf.jacobian, ir.jacobian;
    lm.noise.setZero();
    lm.noise.topLeftCorner<3, 3>() = rf.noise;
    lm.noise.bottomRightCorner<2, 2>() = ir.noise;
    lm.x0 = rf.x0;
    lm.angular = {rf.angular[0], rf.angular[1], rf.angular[2], ir.angular[0], ir.angular[1]};
    return lm;
}

// ---------------------------------------------------------------------------
// UKF measurement update
// ---------------------------------------------------------------------------

/// standard: zeta = sum_{i=0}^{12} W_i h(X_i).
/// paper_exact: zeta = sum_{i=1}^{12} W_i h(X_i) (X_0 excluded, weights not renormalized).
enum class ZetaMode { Standard, PaperExact };

inline std::string_view to_string(ZetaMode m) {
    return m == ZetaMode::Standard ? "standard" : "paper_exact";
}

/// Angular components are averaged as wrapped offsets from h(X_0).
template <int M, typename Model>
VecM<M> ukf_predicted_observation(const SigmaSet& set, Model&& h,
                                  const std::array<bool, M>& angular = {},
                                  ZetaMode mode = ZetaMode::Standard) {
    std::array<VecM<M>, kSigmaCount> obs;
    for (int i = 0; i < kSigmaCount; ++i) obs[i] = h(set.points[i]);
    const VecM<M> ref = obs[0];
    VecM<M> zeta = VecM<M>::Zero();
    for (int i = mode == ZetaMode::Standard ? 0 : 1; i < kSigmaCount; ++i) {
        zeta += set.weights[i] * (ref + wrap_residual<M>(obs[i] - ref, angular));
    }
    return wrap_residual<M>(zeta, angular);
}

/// Sigma_zz = sum_{i=0}^{12} W_i dz dz^T + R, Sigma_xz = sum_{i=0}^{12} W_i dx dz^T.
template <int M, typename Model>
Innovation<M> ukf_innovation(const StateEstimate& est, const SigmaSet& set, const VecM<M>& z,
                             const MatM<M>& noise, Model&& h,
                             const std::array<bool, M>& angular = {},
                             ZetaMode mode = ZetaMode::Standard) {
    std::array<VecM<M>, kSigmaCount> obs;
    for (int i = 0; i < kSigmaCount; ++i) obs[i] = h(set.points[i]);
    const VecM<M> ref = obs[0];
    VecM<M> zeta = VecM<M>::Zero();
    for (int i = mode == ZetaMode::Standard ? 0 : 1; i < kSigmaCount; ++i) {
        zeta += set.weights[i] * (ref + wrap_residual<M>(obs[i] - ref, angular));
    }
    Innovation<M> in;
    in.cov = noise;
    in.cross.setZero();
    for (int i = 0; i < kSigmaCount; ++i) {
        const VecM<M> dz = wrap_residual<M>(obs[i] - zeta, angular);
        const Vec6 dx = set.points[i] - est.mean;
        in.cov += set.weights[i] * dz * dz.transpose();
        in.cross += set.weights[i] * dx * dz.transpose();
    }
    in.cov = symmetrized(in.cov);
    in.residual = wrap_residual<M>(z - zeta, angular);
    in.noise = noise;
    return in;
}

template <int M, typename Model>
UpdateResult<M> ukf_update(const StateEstimate& est, const SigmaSet& set, const VecM<M>& z,
                           const MatM<M>& noise, Model&& h, const std::array<bool, M>& angular = {},
                           ZetaMode mode = ZetaMode::Standard) {
    Innovation<M> in = ukf_innovation<M>(est, set, z, noise, h, angular, mode);
    return {apply_innovation(est, in), in};
}

inline auto rf_model(const StateTransform& eci_to_enu) {
    return [eci_to_enu](const Vec6& x) -> Vec3 { return h_rf(eci_to_enu.apply_position(x.head<3>())); };
}

inline auto ir_model(const StateTransform& eci_to_body) {
    return [eci_to_body](const Vec6& x) -> Vec2 { return h_ir(eci_to_body.apply_position(x.head<3>())); };
}

inline UpdateResult<3> ukf_update_rf(const StateEstimate& est, const RfMeasurement& z,
                                     const UkfParams& params = {},
                                     ZetaMode mode = ZetaMode::Standard) {
    check_time_aligned(est.epoch, z.timestamp);
    return ukf_update<3>(est, sigma_points(est, params), z.z, z.noise_cov,
                         rf_model(rf_transform(z)), kRfAngular, mode);
}

inline UpdateResult<2> ukf_update_ir(const StateEstimate& est, const IrMeasurement& z,
                                     const UkfParams& params = {},
                                     ZetaMode mode = ZetaMode::Standard) {
    check_time_aligned(est.epoch, z.timestamp);
    return ukf_update<2>(est, sigma_points(est, params), z.z, z.noise_cov,
                         ir_model(ir_transform(z)), kIrAngular, mode);
}

// ---------------------------------------------------------------------------
// Filter selection
// ---------------------------------------------------------------------------

enum class FilterKind { Ekf, Ukf };

inline std::string_view to_string(FilterKind k) { return k == FilterKind::Ekf ? "ekf" : "ukf"; }

struct FilterConfig {
    FilterKind kind = FilterKind::Ekf;
    PropagationOptions propagation;
    UkfParams ukf;
    ZetaMode zeta_mode = ZetaMode::Standard;
    bool joseph = false;
    PhysicalConstants constants;
    double process_noise_q = 1e-4;  // m^2/s^3
};

inline StateEstimate time_update(const StateEstimate& est, double dt, const FilterConfig& cfg) {
    const ProcessNoise q = default_process_noise(dt, cfg.process_noise_q);
    return cfg.kind == FilterKind::Ekf
               ? ekf_time_update(est, dt, q, cfg.propagation, cfg.constants)
               : ukf_time_update(est, dt, q, cfg.ukf, cfg.propagation, cfg.constants);
}

/// Innovation of an RF measurement against a time-aligned estimate.
inline Innovation<3> innovation(const StateEstimate& est, const RfMeasurement& z,
                                const FilterConfig& cfg) {
    check_time_aligned(est.epoch, z.timestamp);
    const StateTransform t = rf_transform(z);
    if (cfg.kind == FilterKind::Ekf) return ekf_innovation(est, linearize_rf(est, z, t));
    return ukf_innovation<3>(est, sigma_points(est, cfg.ukf), z.z, z.noise_cov, rf_model(t),
                             kRfAngular, cfg.zeta_mode);
}

inline Innovation<2> innovation(const StateEstimate& est, const IrMeasurement& z,
                                const FilterConfig& cfg) {
    check_time_aligned(est.epoch, z.timestamp);
    const StateTransform t = ir_transform(z);
    if (cfg.kind == FilterKind::Ekf) return ekf_innovation(est, linearize_ir(est, z, t));
    return ukf_innovation<2>(est, sigma_points(est, cfg.ukf), z.z, z.noise_cov, ir_model(t),
                             kIrAngular, cfg.zeta_mode);
}

template <int M>
StateEstimate measurement_update(const StateEstimate& est, const Innovation<M>& in,
                                 const FilterConfig& cfg) {
    return apply_innovation(est, in, cfg.joseph);
}

}  // namespace bmd
