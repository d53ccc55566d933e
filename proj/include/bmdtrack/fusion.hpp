#pragma once

// Remote-to-local track fusion: optimal linear combination, the remote track
// as a measurement (with the correlated-noise time update that follows it),
// covariance intersection, and remote cue association.

#include "bmdtrack/association.hpp"

#include <optional>
#include <string>

namespace bmd {

enum class FusionMethod { Linear, Measurement, CovarianceIntersection };

inline std::string_view to_string(FusionMethod m) {
    switch (m) {
        case FusionMethod::Linear: return "linear";
        case FusionMethod::Measurement: return "measurement";
        default: return "ci";
    }
}

struct RemoteCue {
    int id = 0;
    StateEstimate estimate;  ///< epoch = cue timestamp
    std::string source;
    double delivered = 0.0;  ///< time the cue reaches the local tracker
    int origin = kFalseAlarm;  ///< truth object id, when known

    double timestamp() const { return estimate.epoch; }
};

struct FusedTrack {
    StateEstimate estimate;
    FusionMethod method = FusionMethod::Measurement;
    int local_id = 0;
    int remote_id = 0;
    Mat6 weight_remote = Mat6::Zero();  ///< applied: x_F = W_R x_R + W_L x_L
    Mat6 weight_local = Mat6::Zero();
    double omega = 0.0;  ///< covariance intersection weight on the local track
};

using Mat12 = Eigen::Matrix<double, 12, 12>;

namespace detail {

inline void check_aligned(const StateEstimate& a, const StateEstimate& b) {
    if (std::abs(a.epoch - b.epoch) > kEpochTolerance)
        throw std::invalid_argument("fusion inputs are not time-aligned (" + std::to_string(a.epoch) +
                                    " vs " + std::to_string(b.epoch) + ")");
}

inline Mat6 checked_inverse(const Mat6& m, const char* what) {
    Eigen::LDLT<Mat6> ldlt(m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError(std::string(what) + " is not positive definite");
    return symmetrized(Mat6(ldlt.solve(Mat6::Identity())));
}

}  // namespace detail

/// Optimal unbiased linear combination for correlated estimates.
/// The stacked block [A_R; A_L] = Sigma^-1 E (E' Sigma^-1 E)^-1 with E = [I; I];
/// the estimate applies its transpose blocks. Sigma_F = (E' Sigma^-1 E)^-1.
inline FusedTrack fuse_linear(const StateEstimate& remote, const StateEstimate& local,
                              const Mat6& cross = Mat6::Zero()) {
    detail::check_aligned(remote, local);
    Mat12 joint;
    joint << remote.cov, cross, cross.transpose(), local.cov;
    Eigen::LDLT<Mat12> ldlt(joint);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
        throw NumericalError(
            "joint remote/local covariance is singular; use covariance_intersection instead");
    }
    Eigen::Matrix<double, 12, 6> e;
    e << Mat6::Identity(), Mat6::Identity();
    const Eigen::Matrix<double, 12, 6> sinv_e = ldlt.solve(e);
    const Mat6 info = symmetrized(Mat6(e.transpose() * sinv_e));
    const Mat6 sigma_f = detail::checked_inverse(info, "fused information");
    const Eigen::Matrix<double, 12, 6> a = sinv_e * sigma_f;

    FusedTrack f;
    f.method = FusionMethod::Linear;
    f.weight_remote = a.topRows<6>().transpose();
    f.weight_local = a.bottomRows<6>().transpose();
    f.estimate.mean = f.weight_remote * remote.mean + f.weight_local * local.mean;
    f.estimate.cov = sigma_f;
    f.estimate.epoch = local.epoch;
    return f;
}

/// Information fusion of independent estimates.
inline FusedTrack fuse_independent(const StateEstimate& remote, const StateEstimate& local) {
    detail::check_aligned(remote, local);
    const Mat6 ir = detail::checked_inverse(remote.cov, "remote covariance");
    const Mat6 il = detail::checked_inverse(local.cov, "local covariance");
    FusedTrack f;
    f.method = FusionMethod::Linear;
    f.estimate.cov = detail::checked_inverse(symmetrized(Mat6(ir + il)), "fused information");
    f.weight_remote = f.estimate.cov * ir;
    f.weight_local = f.estimate.cov * il;
    f.estimate.mean = f.estimate.cov * (ir * remote.mean + il * local.mean);
    f.estimate.epoch = local.epoch;
    return f;
}

/// Remote track as a direct state measurement z_F = x_R with R_R = Sigma_R.
inline FusedTrack fuse_as_measurement(const StateEstimate& local, const RemoteCue& remote) {
    detail::check_aligned(remote.estimate, local);
    const Mat6 sum = symmetrized(Mat6(local.cov + remote.estimate.cov));
    Eigen::LDLT<Mat6> ldlt(sum);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("local + remote covariance is singular");
    const Mat6 gain = ldlt.solve(local.cov).transpose();  // Sigma_L (Sigma_L + Sigma_R)^-1
    FusedTrack f;
    f.method = FusionMethod::Measurement;
    f.remote_id = remote.id;
    f.weight_remote = gain;
    f.weight_local = Mat6::Identity() - gain;
    f.estimate.mean = local.mean + gain * (remote.estimate.mean - local.mean);
    f.estimate.cov = symmetrized(Mat6(local.cov - gain * local.cov));
    f.estimate.epoch = local.epoch;
    return f;
}

/// Sigma_F^-1 = w Sigma_L^-1 + (1 - w) Sigma_R^-1 with w in [0, 1] minimizing
/// trace(Sigma_F), found by golden-section search.
inline FusedTrack covariance_intersection(const StateEstimate& remote, const StateEstimate& local,
                                          double tolerance = 1e-6) {
    detail::check_aligned(remote, local);
    const Mat6 ir = detail::checked_inverse(remote.cov, "remote covariance");
    const Mat6 il = detail::checked_inverse(local.cov, "local covariance");
    auto fused_cov = [&](double w) { return Mat6(Mat6(w * il + (1.0 - w) * ir).inverse()); };
    auto trace_at = [&](double w) { return fused_cov(w).trace(); };

    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = trace_at(c), fd = trace_at(d);
    while (b - a > tolerance) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = trace_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = trace_at(d);
        }
    }
    double w = 0.5 * (a + b);
    // the trace is convex in w; the optimum may sit on the boundary
    for (double edge : {0.0, 1.0})
        if (trace_at(edge) < trace_at(w)) w = edge;

    FusedTrack f;
    f.method = FusionMethod::CovarianceIntersection;
    f.omega = w;
    f.estimate.cov = symmetrized(fused_cov(w));
    f.weight_local = w * f.estimate.cov * il;
    f.weight_remote = (1.0 - w) * f.estimate.cov * ir;
    f.estimate.mean = f.weight_local * local.mean + f.weight_remote * remote.mean;
    f.estimate.epoch = local.epoch;
    return f;
}

/// One time step after a measurement-style fusion, with the remote
/// "measurement" noise correlated to the process noise (E[n_R n_L'] = S_RL).
/// S_RL is a rate: over dt the correlation is S_d = dt S_RL, giving
///   mean = f(x) + S_d R^-1 (z_F - x),
///   Sigma = (Phi - S_d R^-1) Sigma (Phi - S_d R^-1)' + Q - S_d R^-1 S_d'.
/// Phi and Q are the EKF transition and accumulated process noise over dt.
inline StateEstimate fused_time_update(const StateEstimate& fused, const Mat6& s_rl, const Mat6& r_r,
                                       const Vec6& z_f, double dt, const ProcessNoise& q_l,
                                       const PropagationOptions& opt = {},
                                       const PhysicalConstants& c = {}) {
    if (!(dt > 0.0)) throw std::invalid_argument("fused_time_update: dt must be positive");
    const Mat6 r_inv = detail::checked_inverse(r_r, "remote measurement covariance");
    const int n = substep_count(dt, opt.max_step);
    const double h = dt / n;
    Vec6 x = fused.mean;
    Mat6 phi = Mat6::Identity();
    Mat6 q = Mat6::Zero();
    for (int i = 0; i < n; ++i) {
        const Mat6 fk = Mat6::Identity() + h * kepler_jacobian(x, c);
        x = propagate_step(x, h, opt.integrator, c);
        phi = fk * phi;
        q = fk * q * fk.transpose() + q_l / n;
    }
    const Mat6 j = dt * s_rl * r_inv;
    const Mat6 g = phi - j;
    StateEstimate out;
    out.mean = x + j * (z_f - fused.mean);
    out.cov = symmetrized(Mat6(g * fused.cov * g.transpose() + q - j * r_r * j.transpose()));
    out.epoch = fused.epoch + dt;
    return out;
}

/// Cue propagated to local time t with RK4 and EKF covariance propagation.
inline RemoteCue propagate_cue(const RemoteCue& cue, double t, const FilterConfig& fcfg) {
    RemoteCue out = cue;
    const double dt = t - cue.timestamp();
    if (dt < -kEpochTolerance) throw std::invalid_argument("cue is newer than the local time");
    if (dt <= kEpochTolerance) return out;
    PropagationOptions opt = fcfg.propagation;
    opt.integrator = Integrator::Rk4;
    out.estimate = ekf_time_update(cue.estimate, dt, default_process_noise(dt, fcfg.process_noise_q), opt,
                                   fcfg.constants);
    return out;
}

struct CueAssociation {
    std::optional<int> track_id;
    std::vector<double> values;  ///< per live track (kForbidden when outside the gate)
};

/// 1 x (1 + n) association of a time-aligned cue against live local tracks with
/// an identity observation model and S = Sigma_L + Sigma_R. Any gated track
/// beats the new-track column; among gated tracks the likelihood decides.
inline CueAssociation associate_remote(const RemoteCue& cue, const std::vector<Track>& tracks,
                                       double gate_probability = 0.997) {
    const double threshold = chi2_gate_threshold(6, gate_probability);
    std::vector<int> index;
    for (int j = 0; j < static_cast<int>(tracks.size()); ++j)
        if (tracks[j].alive()) index.push_back(j);
    const int n = static_cast<int>(index.size());
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(1, n + 1, kForbidden);
    CueAssociation out;
    out.values.assign(n, kForbidden);
    double lowest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        const StateEstimate& local = tracks[index[j]].estimate;
        detail::check_aligned(cue.estimate, local);
        Innovation<6> in;
        in.residual = cue.estimate.mean - local.mean;
        in.cov = symmetrized(Mat6(local.cov + cue.estimate.cov));
        const GateResult g = gate(in, threshold);
        if (!g.pass) continue;
        values(0, j) = -0.5 * g.distance2 - 0.5 * g.log_det_2pi_s;
        out.values[j] = values(0, j);
        lowest = std::min(lowest, values(0, j));
    }
    values(0, n) = std::isfinite(lowest) ? lowest - 1.0 : 0.0;
    const AssignmentSolution s = solve_assignment(values);
    if (s.column[0] >= 0 && s.column[0] < n) out.track_id = tracks[index[s.column[0]]].id;
    return out;
}

}  // namespace bmd
