#pragma once

// Maximum-likelihood measurement-to-track association: gating, value
// matrices, auction assignment, log-likelihood-ratio track scoring and the
// track lifecycle, plus the IR seeker pointing directive.

#include "bmdtrack/assignment.hpp"
#include "bmdtrack/filters.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace bmd {

enum class TrackStatus { Tentative, Confirmed, Deleted };

inline std::string_view to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::Tentative: return "tentative";
        case TrackStatus::Confirmed: return "confirmed";
        default: return "deleted";
    }
}

struct Track {
    int id = 0;
    StateEstimate estimate;
    TrackStatus status = TrackStatus::Tentative;
    double score_rf = 0.0;
    double score_ir = 0.0;
    int hits = 0;
    int misses = 0;
    int consecutive_misses = 0;
    double last_update = 0.0;
    bool rv_flag = false;
    /// Single-return estimate of a new track, kept until its second RF return.
    std::optional<StateEstimate> seed;

    double score() const { return score_rf + score_ir; }
    bool alive() const { return status != TrackStatus::Deleted; }
};

struct TrackFile {
    std::vector<Track> tracks;
    int next_id = 1;

    /// Drops deleted tracks.
    void prune() {
        std::erase_if(tracks, [](const Track& t) { return !t.alive(); });
    }
    Track* find(int id) {
        for (auto& t : tracks)
            if (t.id == id) return &t;
        return nullptr;
    }
};

struct AssociationConfig {
    double gate_probability = 0.997;
    double pd_rf = 0.95;
    double pd_ir = 0.95;
    double false_alarm_density_rf = 0.0;  ///< per m rad^2
    double false_alarm_density_ir = 0.0;  ///< per rad^2
    /// When set, ln(new_track_density) is the new-track value for every
    /// measurement. Otherwise the value is chosen per measurement so that a
    /// measurement farther than new_track_sigma from every track prefers a new track.
    std::optional<double> new_track_density;
    double new_track_sigma = 3.5;
    double confirm_score = 4.6;
    double delete_score = -2.3;
    double score_cap = 10.0;  ///< per sensor
    int max_consecutive_misses = 5;
    double init_velocity_sigma = 3000.0;
    double quantum = 1e-4;
};

// ---------------------------------------------------------------------------
// Gating
// ---------------------------------------------------------------------------

inline double chi2_gate_threshold(int dof, double probability) {
    if (!(probability > 0.0 && probability < 1.0))
        throw std::invalid_argument("gate probability must be in (0, 1)");
    return boost::math::quantile(boost::math::chi_squared(dof), probability);
}

/// Volume constant of the unit ball in M dimensions (M = 1, 2, 3).
inline double unit_ball_volume(int m) {
    switch (m) {
        case 1: return 2.0;
        case 2: return kPi;
        case 3: return 4.0 * kPi / 3.0;
        default: return std::pow(kPi, m / 2.0) / std::tgamma(m / 2.0 + 1.0);
    }
}

struct GateResult {
    bool pass = false;
    double distance2 = std::numeric_limits<double>::infinity();
    double log_det_2pi_s = 0.0;  ///< ln |2 pi S|
    double log_det_s = 0.0;      ///< ln |S|
    std::string diagnostic;
};

template <int M>
GateResult gate(const Innovation<M>& in, double threshold) {
    GateResult g;
    Eigen::LDLT<MatM<M>> ldlt(in.cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
        g.diagnostic = "innovation covariance not invertible";
        return g;
    }
    g.distance2 = in.residual.dot(ldlt.solve(in.residual));
    g.log_det_s = ldlt.vectorD().array().log().sum();
    g.log_det_2pi_s = M * std::log(2.0 * kPi) + g.log_det_s;
    g.pass = g.distance2 <= threshold;
    return g;
}

/// Gaussian fit value ln P_D - d^2/2 - ln|2 pi S| / 2.
inline double association_value(double pd, const GateResult& g) {
    return std::log(pd) - 0.5 * g.distance2 - 0.5 * g.log_det_2pi_s;
}

/// Score change for an assigned measurement: the association value measured
/// against a clutter density of lambda_fa + 1 / V_gate.
inline double hit_score_increment(int dof, double value, const GateResult& g, double threshold,
                                  double false_alarm_density) {
    const double log_volume =
        std::log(unit_ball_volume(dof)) + 0.5 * dof * std::log(threshold) + 0.5 * g.log_det_s;
    return value + log_volume - std::log1p(false_alarm_density * std::exp(log_volume));
}

inline double miss_score_increment(double pd) { return std::log1p(-pd); }

// ---------------------------------------------------------------------------
// Association problems
// ---------------------------------------------------------------------------

template <typename Z>
struct MeasurementTraits;

template <>
struct MeasurementTraits<RfMeasurement> {
    static constexpr int dim = 3;
    static double pd(const AssociationConfig& c) { return c.pd_rf; }
    static double clutter(const AssociationConfig& c) { return c.false_alarm_density_rf; }
};

template <>
struct MeasurementTraits<IrMeasurement> {
    static constexpr int dim = 2;
    static double pd(const AssociationConfig& c) { return c.pd_ir; }
    static double clutter(const AssociationConfig& c) { return c.false_alarm_density_ir; }
};

/// m x n track block, optionally followed by m new-track columns (diagonal
/// pattern: measurement i may start new track i).
struct AssociationProblem {
    Eigen::MatrixXd values;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> gate_mask;
    std::vector<double> new_track_value;
    int track_count = 0;
    bool new_track_columns = false;
};

template <typename Z>
struct SensorProblem {
    static constexpr int M = MeasurementTraits<Z>::dim;
    AssociationProblem problem;
    std::vector<int> track_index;  ///< column -> index into the track vector
    std::vector<std::optional<Innovation<M>>> innovations;  ///< row-major m x n
    std::vector<GateResult> gates;
    double threshold = 0.0;

    const std::optional<Innovation<M>>& innovation(int i, int j) const {
        return innovations[static_cast<std::size_t>(i) * problem.track_count + j];
    }
    const GateResult& gate_result(int i, int j) const {
        return gates[static_cast<std::size_t>(i) * problem.track_count + j];
    }
};

/// Builds the value matrix for one sensor batch against all live tracks, which
/// must already be time-updated to the measurement time.
template <typename Z>
SensorProblem<Z> build_association_matrix(const std::vector<Z>& measurements,
                                          const std::vector<Track>& tracks,
                                          const FilterConfig& fcfg, const AssociationConfig& acfg,
                                          bool new_track_columns) {
    using Tr = MeasurementTraits<Z>;
    SensorProblem<Z> sp;
    for (int j = 0; j < static_cast<int>(tracks.size()); ++j)
        if (tracks[j].alive()) sp.track_index.push_back(j);
    const int m = static_cast<int>(measurements.size());
    const int n = static_cast<int>(sp.track_index.size());
    sp.threshold = chi2_gate_threshold(Tr::dim, acfg.gate_probability);
    auto& p = sp.problem;
    p.track_count = n;
    p.new_track_columns = new_track_columns;
    p.values = Eigen::MatrixXd::Constant(m, n + (new_track_columns ? m : 0), kForbidden);
    p.gate_mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, p.values.cols(), false);
    p.new_track_value.assign(m, 0.0);
    sp.innovations.resize(static_cast<std::size_t>(m) * n);
    sp.gates.resize(static_cast<std::size_t>(m) * n);
    const double pd = Tr::pd(acfg);

    for (int i = 0; i < m; ++i) {
        double adaptive = kForbidden;
        for (int j = 0; j < n; ++j) {
            const Track& t = tracks[sp.track_index[j]];
            const std::size_t k = static_cast<std::size_t>(i) * n + j;
            try {
                sp.innovations[k] = innovation(t.estimate, measurements[i], fcfg);
            } catch (const Error& e) {
                sp.gates[k].diagnostic = e.what();
                continue;
            }
            sp.gates[k] = gate(*sp.innovations[k], sp.threshold);
            if (!sp.gates[k].pass) continue;
            p.values(i, j) = association_value(pd, sp.gates[k]);
            p.gate_mask(i, j) = true;
            const double at_sigma = std::log(pd) - 0.5 * acfg.new_track_sigma * acfg.new_track_sigma -
                                    0.5 * sp.gates[k].log_det_2pi_s;
            adaptive = std::max(adaptive, at_sigma);
        }
        if (acfg.new_track_density) p.new_track_value[i] = std::log(*acfg.new_track_density);
        else p.new_track_value[i] = adaptive == kForbidden ? 0.0 : adaptive;
        if (new_track_columns) {
            p.values(i, n + i) = p.new_track_value[i];
            p.gate_mask(i, n + i) = true;
        }
    }
    return sp;
}

inline constexpr int kNewTrack = -2;

/// Per measurement: track column, kNewTrack, or kUnassigned.
struct Assignment {
    std::vector<int> target;
};

inline Assignment solve_association(const AssociationProblem& p, const AssignmentOptions& opt = {}) {
    const AssignmentSolution s = solve_assignment(p.values, opt);
    Assignment a;
    a.target.resize(s.column.size());
    for (std::size_t i = 0; i < s.column.size(); ++i) {
        const int c = s.column[i];
        a.target[i] = c == kUnassigned ? kUnassigned : (c < p.track_count ? c : kNewTrack);
    }
    return a;
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

enum class SensorKind { Rf, Ir };

inline std::string_view to_string(SensorKind k) { return k == SensorKind::Rf ? "rf" : "ir"; }

struct AssignmentRecord {
    double time = 0.0;
    SensorKind kind = SensorKind::Rf;
    SensorId sensor = 0;
    int measurement = 0;  ///< index within the scan batch
    int origin = kFalseAlarm;
    int track = 0;  ///< track id, or 0 when unassigned
    bool new_track = false;
    double value = 0.0;
    double distance2 = 0.0;
};

struct ScanReport {
    std::vector<AssignmentRecord> assignments;
    std::vector<int> spawned, confirmed, deleted;
    std::vector<std::string> warnings;
};

/// Seeker geometry used to decide which tracks the IR sensor should have seen.
struct SeekerView {
    BodyFrame body;
    double fov_half_angle = kPi / 6.0;
};

/// Tentative estimate from one RF return: position from the inverted
/// measurement, zero velocity with a broad prior.
inline StateEstimate initiate_from_rf(const RfMeasurement& z, double velocity_sigma) {
    const StateTransform to_eci = state_transform(EnuFrame{z.site}, EciFrame{}, z.timestamp);
    const Mat3 j = rf_to_enu_jacobian(z.z);
    const Mat3 rot = to_eci.rotation_block();
    StateEstimate est;
    est.mean.head<3>() = to_eci.apply_position(rf_to_enu(z.z));
    est.mean.tail<3>().setZero();
    est.cov.setZero();
    est.cov.topLeftCorner<3, 3>() = symmetrized(Mat3(rot * j * z.noise_cov * j.transpose() * rot.transpose()));
    est.cov.bottomRightCorner<3, 3>() = velocity_sigma * velocity_sigma * Mat3::Identity();
    est.epoch = z.timestamp;
    return est;
}

/// Time-updates every live track to t. Tracks that fail numerically are deleted.
inline void predict_tracks(TrackFile& file, double t, const FilterConfig& fcfg, ScanReport& report) {
    for (Track& tr : file.tracks) {
        if (!tr.alive()) continue;
        const double dt = t - tr.estimate.epoch;
        if (dt <= kEpochTolerance) continue;
        try {
            tr.estimate = time_update(tr.estimate, dt, fcfg);
        } catch (const std::exception& e) {
            tr.status = TrackStatus::Deleted;
            report.deleted.push_back(tr.id);
            report.warnings.push_back("track " + std::to_string(tr.id) + " time update: " + e.what());
        }
    }
}

/// Track state from two RF returns: the velocity at the first return is
/// found by Newton shooting so the Kepler arc passes through both positions.
/// The covariance maps both position covariances through the state
/// transition matrix of the arc.
inline StateEstimate two_point_initiate(const StateEstimate& seed, const RfMeasurement& z,
                                        const FilterConfig& fcfg) {
    const double dt = z.timestamp - seed.epoch;
    if (!(dt > kEpochTolerance)) throw std::invalid_argument("two_point_initiate: returns are not time-ordered");
    const StateEstimate second = initiate_from_rf(z, 0.0);
    const Vec3 p1 = seed.mean.head<3>(), p2 = second.mean.head<3>();
    const int n = substep_count(dt, fcfg.propagation.max_step);
    const double h = dt / n;
    auto flow = [&](const Vec6& x0, Mat6& phi) {
        Vec6 x = x0;
        phi.setIdentity();
        for (int i = 0; i < n; ++i) {
            phi = (Mat6::Identity() + h * kepler_jacobian(x, fcfg.constants)) * phi;
            x = propagate_step(x, h, fcfg.propagation.integrator, fcfg.constants);
        }
        return x;
    };
    Vec6 x0;
    x0 << p1, (p2 - p1) / dt;
    Mat6 phi;
    Vec6 x1 = flow(x0, phi);
    for (int it = 0; it < 20; ++it) {
        const Vec3 miss = p2 - x1.head<3>();
        if (miss.norm() <= 1e-9 * p2.norm()) break;
        x0.tail<3>() += phi.topRightCorner<3, 3>().partialPivLu().solve(miss);
        x1 = flow(x0, phi);
    }
    const Mat3 pv_inv = phi.topRightCorner<3, 3>().inverse();
    Mat6 a = Mat6::Zero();  // (p1, p2) -> (p2, v2)
    a.topRightCorner<3, 3>().setIdentity();
    a.bottomLeftCorner<3, 3>() = phi.bottomLeftCorner<3, 3>() - phi.bottomRightCorner<3, 3>() * pv_inv * phi.topLeftCorner<3, 3>();
    a.bottomRightCorner<3, 3>() = phi.bottomRightCorner<3, 3>() * pv_inv;
    Mat6 joint = Mat6::Zero();
    joint.topLeftCorner<3, 3>() = seed.cov.topLeftCorner<3, 3>();
    joint.bottomRightCorner<3, 3>() = second.cov.topLeftCorner<3, 3>();
    StateEstimate out;
    out.mean << p2, x1.tail<3>();
    out.cov = symmetrized(Mat6(a * joint * a.transpose()));
    out.epoch = z.timestamp;
    return out;
}

namespace detail {

inline double capped(double score, double cap) { return std::min(score, cap); }

inline Track& spawn_track(TrackFile& file, const RfMeasurement& z, const AssociationConfig& acfg,
                          ScanReport& report) {
    Track t;
    t.id = file.next_id++;
    t.estimate = initiate_from_rf(z, acfg.init_velocity_sigma);
    t.last_update = z.timestamp;
    t.hits = 1;
    t.seed = t.estimate;
    file.tracks.push_back(t);
    report.spawned.push_back(t.id);
    return file.tracks.back();
}

/// Applies one sensor batch: solve, update assigned tracks, record outcomes.
/// Returns the indices of measurements left unassigned or routed to new tracks.
template <typename Z>
std::vector<int> apply_batch(TrackFile& file, const std::vector<Z>& batch, SensorKind kind,
                             bool new_track_columns, const FilterConfig& fcfg,
                             const AssociationConfig& acfg, std::vector<bool>& updated,
                             ScanReport& report) {
    using Tr = MeasurementTraits<Z>;
    const SensorProblem<Z> sp = build_association_matrix(batch, file.tracks, fcfg, acfg, new_track_columns);
    const Assignment a = solve_association(sp.problem, {acfg.quantum});
    std::vector<int> leftover;
    for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
        AssignmentRecord rec;
        rec.time = batch[i].timestamp;
        rec.kind = kind;
        rec.sensor = batch[i].sensor_id;
        rec.measurement = i;
        rec.origin = batch[i].origin;
        const int col = a.target[i];
        if (col < 0) {
            rec.new_track = col == kNewTrack;
            if (rec.new_track) rec.value = sp.problem.new_track_value[i];
            leftover.push_back(i);
            report.assignments.push_back(rec);
            continue;
        }
        const int ti = sp.track_index[col];
        Track& tr = file.tracks[ti];
        const GateResult& g = sp.gate_result(i, col);
        rec.track = tr.id;
        rec.value = sp.problem.values(i, col);
        rec.distance2 = g.distance2;
        try {
            if constexpr (std::is_same_v<Z, RfMeasurement>) {
                if (tr.seed) {
                    tr.estimate = two_point_initiate(*tr.seed, batch[i], fcfg);
                    tr.seed.reset();
                } else {
                    tr.estimate = measurement_update(tr.estimate, *sp.innovation(i, col), fcfg);
                }
            } else {
                tr.estimate = measurement_update(tr.estimate, *sp.innovation(i, col), fcfg);
            }
        } catch (const std::exception& e) {
            report.warnings.push_back("track " + std::to_string(tr.id) + " update: " + e.what());
            rec.track = 0;
            report.assignments.push_back(rec);
            continue;
        }
        const double inc = hit_score_increment(Tr::dim, rec.value, g, sp.threshold, Tr::clutter(acfg));
        double& score = kind == SensorKind::Rf ? tr.score_rf : tr.score_ir;
        score = capped(score + inc, acfg.score_cap);
        tr.last_update = rec.time;
        updated[ti] = true;
        report.assignments.push_back(rec);
    }
    return leftover;
}

/// Groups a batch by sensor id, preserving order within each group.
template <typename Z>
std::map<SensorId, std::vector<Z>> by_sensor(const std::vector<Z>& batch) {
    std::map<SensorId, std::vector<Z>> groups;
    for (const Z& z : batch) groups[z.sensor_id].push_back(z);
    return groups;
}

inline void apply_lifecycle(TrackFile& file, const std::vector<bool>& touched,
                            const AssociationConfig& acfg, ScanReport& report) {
    for (std::size_t k = 0; k < file.tracks.size(); ++k) {
        Track& tr = file.tracks[k];
        if (!tr.alive()) continue;
        if (k < touched.size()) {
            if (touched[k]) {
                ++tr.hits;
                tr.consecutive_misses = 0;
            } else {
                ++tr.misses;
                ++tr.consecutive_misses;
            }
        }
        if (tr.score() <= acfg.delete_score || tr.consecutive_misses > acfg.max_consecutive_misses) {
            tr.status = TrackStatus::Deleted;
            report.deleted.push_back(tr.id);
        } else if (tr.status == TrackStatus::Tentative && tr.score() >= acfg.confirm_score) {
            tr.status = TrackStatus::Confirmed;
            report.confirmed.push_back(tr.id);
        }
    }
}

}  // namespace detail

/// One RF scan with new-track columns in the value matrix. Tracks must be
/// time-updated to the scan time. Each sensor's returns form one problem.
inline ScanReport scan_single_sensor(TrackFile& file, const std::vector<RfMeasurement>& rf,
                                     const FilterConfig& fcfg, const AssociationConfig& acfg) {
    ScanReport report;
    const std::size_t existing = file.tracks.size();
    std::vector<bool> updated(existing, false);
    for (const auto& [sensor, batch] : detail::by_sensor(rf)) {
        updated.resize(file.tracks.size(), false);
        const std::size_t before = report.assignments.size();
        const std::vector<int> left =
            detail::apply_batch(file, batch, SensorKind::Rf, true, fcfg, acfg, updated, report);
        for (int i : left) {
            AssignmentRecord& rec = report.assignments[before + i];
            if (!rec.new_track) continue;
            rec.track = detail::spawn_track(file, batch[i], acfg, report).id;
        }
    }
    for (std::size_t k = 0; k < existing; ++k) {
        Track& tr = file.tracks[k];
        if (tr.alive() && !updated[k])
            tr.score_rf = detail::capped(tr.score_rf + miss_score_increment(acfg.pd_rf), acfg.score_cap);
    }
    std::vector<bool> touched(updated.begin(), updated.begin() + existing);
    detail::apply_lifecycle(file, touched, acfg, report);
    return report;
}

/// Synchronized RF + IR scan: per-sensor m x n problems, RF first, then IR
/// against the RF-updated states. Unassigned RF returns start tentative
/// tracks; IR returns never do. IR misses count only for tracks inside the
/// seeker field of view.
inline ScanReport scan_multi_sensor(TrackFile& file, const std::vector<RfMeasurement>& rf,
                                    const std::vector<IrMeasurement>& ir,
                                    const std::optional<SeekerView>& seeker,
                                    const FilterConfig& fcfg, const AssociationConfig& acfg) {
    ScanReport report;
    const std::size_t existing = file.tracks.size();
    std::vector<bool> rf_updated(existing, false);
    std::vector<RfMeasurement> unassigned_rf;
    std::vector<std::size_t> unassigned_rec;
    for (const auto& [sensor, batch] : detail::by_sensor(rf)) {
        const std::size_t before = report.assignments.size();
        const std::vector<int> left =
            detail::apply_batch(file, batch, SensorKind::Rf, false, fcfg, acfg, rf_updated, report);
        for (int i : left) {
            unassigned_rf.push_back(batch[i]);
            unassigned_rec.push_back(before + i);
        }
    }
    for (std::size_t k = 0; k < existing; ++k) {
        Track& tr = file.tracks[k];
        if (tr.alive() && !rf_updated[k])
            tr.score_rf = detail::capped(tr.score_rf + miss_score_increment(acfg.pd_rf), acfg.score_cap);
    }
    // new-track pass
    for (std::size_t u = 0; u < unassigned_rf.size(); ++u) {
        AssignmentRecord& rec = report.assignments[unassigned_rec[u]];
        rec.new_track = true;
        rec.track = detail::spawn_track(file, unassigned_rf[u], acfg, report).id;
    }

    std::vector<bool> ir_updated(file.tracks.size(), false);
    for (const auto& [sensor, batch] : detail::by_sensor(ir))
        detail::apply_batch(file, batch, SensorKind::Ir, false, fcfg, acfg, ir_updated, report);
    if (seeker) {
        for (std::size_t k = 0; k < existing; ++k) {
            Track& tr = file.tracks[k];
            if (!tr.alive() || ir_updated[k]) continue;
            if (off_boresight_angle(tr.estimate.mean.head<3>(), seeker->body) <= seeker->fov_half_angle)
                tr.score_ir =
                    detail::capped(tr.score_ir + miss_score_increment(acfg.pd_ir), acfg.score_cap);
        }
    }
    std::vector<bool> touched(existing);
    for (std::size_t k = 0; k < existing; ++k) touched[k] = rf_updated[k] || ir_updated[k];
    detail::apply_lifecycle(file, touched, acfg, report);
    return report;
}

// ---------------------------------------------------------------------------
// Seeker pointing
// ---------------------------------------------------------------------------

struct PointingDirective {
    int track_id = 0;
    double time = 0.0;
    bool coasted = false;
    int measurement = -1;          ///< IR batch index when not coasted
    Vec2 angles = Vec2::Zero();    ///< azimuth, elevation in the seeker body frame
    Vec2 predicted = Vec2::Zero(); ///< predicted RV angles, body frame
    Vec3 line_of_sight = Vec3::UnitX();  ///< unit vector, ECI
    Mat2 angle_cov = Mat2::Zero();  ///< predicted angular covariance of the RV track
};

/// Pointing target for the IR seeker from predicted (not yet updated) tracks.
/// The RV track is paired with IR returns by the m_IR x n assignment; with no
/// return it coasts on the predicted RV state.
inline PointingDirective seeker_point(const std::vector<Track>& tracks,
                                      const std::vector<IrMeasurement>& ir, const SeekerView& seeker,
                                      double t, const FilterConfig& fcfg,
                                      const AssociationConfig& acfg) {
    int rv = -1, count = 0;
    for (int j = 0; j < static_cast<int>(tracks.size()); ++j)
        if (tracks[j].alive() && tracks[j].rv_flag) {
            rv = j;
            ++count;
        }
    if (count != 1)
        throw std::invalid_argument("seeker_point: expected exactly one RV track, found " +
                                    std::to_string(count));
    const Track& rv_track = tracks[rv];
    check_time_aligned(rv_track.estimate.epoch, t);

    PointingDirective d;
    d.track_id = rv_track.id;
    d.time = t;
    const StateTransform to_body = state_transform(EciFrame{}, seeker.body, t);
    const LinearMeasurement<2> lm = [&] {
        IrMeasurement probe;
        probe.body = seeker.body;
        probe.timestamp = t;
        return linearize_ir(rv_track.estimate, probe, to_body);
    }();
    d.angle_cov = symmetrized(Mat2(lm.jacobian * rv_track.estimate.cov * lm.jacobian.transpose()));
    d.predicted = lm.h0;

    if (!ir.empty()) {
        const SensorProblem<IrMeasurement> sp = build_association_matrix(ir, tracks, fcfg, acfg, false);
        const Assignment a = solve_association(sp.problem, {acfg.quantum});
        for (int i = 0; i < static_cast<int>(ir.size()); ++i) {
            if (a.target[i] < 0 || sp.track_index[a.target[i]] != rv) continue;
            d.measurement = i;
            d.angles = ir[i].z;
            const StateTransform from_body = state_transform(ir[i].body, EciFrame{}, t);
            d.line_of_sight = (from_body.rotation_block() * ir_line_of_sight(ir[i].z)).normalized();
            return d;
        }
    }
    d.coasted = true;
    d.angles = lm.h0;
    d.line_of_sight = (rv_track.estimate.mean.head<3>() - seeker.body.origin_position).normalized();
    return d;
}

}  // namespace bmd
