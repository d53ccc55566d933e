#pragma once

// Synthetic truth, sensor scans and remote cue streams for multi-piece
// ballistic targets.

#include "bmdtrack/fusion.hpp"
#include "bmdtrack/sensors.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bmd {

struct TruthObject {
    int id = 0;
    Vec6 initial = Vec6::Zero();  ///< ECI state at spawn_time
    bool rv = false;
    double spawn_time = 0.0;
};

/// Interceptor carrying the IR seeker. It flies ballistically from `initial`
/// (ECI state at t = 0); the seeker works from `start_time` on.
struct SeekerSpec {
    IrSensorConfig ir;
    Vec6 initial = Vec6::Zero();
    double start_time = 0.0;
};

struct RemoteSpec {
    double interval = 10.0;  ///< s between deliveries
    double latency = 10.0;   ///< s between cue timestamp and delivery
    double start_time = 0.0; ///< first delivery
    Mat6 cov = Eigen::Matrix<double, 6, 1>(1e4, 1e4, 1e4, 1e2, 1e2, 1e2).asDiagonal();
    Mat6 s_rl = Mat6::Zero();
    std::vector<int> objects;  ///< truth ids reported; empty = all
    std::string source = "remote";
    /// Cues read from a file replace the generated stream when set.
    std::optional<std::vector<RemoteCue>> recorded;
};

struct ScenarioConfig {
    double duration = 300.0;
    double scan_interval = 1.0;
    double truth_step = 0.1;  ///< RK4 step for truth generation
    PhysicalConstants constants;
    std::vector<TruthObject> objects;
    std::vector<RfSensorConfig> rf_sensors;
    std::optional<SeekerSpec> seeker;
    std::optional<RemoteSpec> remote;

    void validate() const {
        if (!(duration > 0.0)) throw ConfigError("duration", "must be positive");
        if (!(scan_interval > 0.0)) throw ConfigError("scan_interval", "must be positive");
        if (!(truth_step > 0.0)) throw ConfigError("truth_step", "must be positive");
        if (objects.empty()) throw ConfigError("objects", "at least one object is required");
        if (rf_sensors.empty() && !seeker) throw ConfigError("sensors", "at least one sensor is required");
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const std::string path = "objects[" + std::to_string(i) + "]";
            if (objects[i].spawn_time < 0.0) throw ConfigError(path + ".spawn_time", "must be >= 0");
            if (objects[i].initial.head<3>().norm() < Earth::radius)
                throw ConfigError(path + ".position", "starts below the Earth surface");
            for (std::size_t k = 0; k < i; ++k)
                if (objects[k].id == objects[i].id) throw ConfigError(path + ".id", "duplicate object id");
        }
        if (std::count_if(objects.begin(), objects.end(), [](const TruthObject& o) { return o.rv; }) > 1)
            throw ConfigError("objects", "at most one object may be the RV");
        for (std::size_t i = 0; i < rf_sensors.size(); ++i) {
            const std::string path = "sensors.rf[" + std::to_string(i) + "]";
            const auto& s = rf_sensors[i];
            if (!s.site.valid()) throw ConfigError(path + ".site", "invalid geodetic site");
            if (min_eigenvalue(s.noise_cov) <= 0.0) throw ConfigError(path + ".noise", "must be positive definite");
            if (s.detection_probability < 0.0 || s.detection_probability > 1.0)
                throw ConfigError(path + ".pd", "must be in [0, 1]");
            if (s.false_alarm_rate < 0.0) throw ConfigError(path + ".false_alarm_rate", "must be >= 0");
        }
        if (seeker) {
            if (min_eigenvalue(seeker->ir.noise_cov) <= 0.0)
                throw ConfigError("sensors.ir.noise", "must be positive definite");
            if (seeker->ir.detection_probability < 0.0 || seeker->ir.detection_probability > 1.0)
                throw ConfigError("sensors.ir.pd", "must be in [0, 1]");
            if (!(seeker->ir.fov_half_angle > 0.0 && seeker->ir.fov_half_angle < kPi / 2.0))
                throw ConfigError("sensors.ir.fov_half_angle", "must be in (0, pi/2)");
            if (std::none_of(objects.begin(), objects.end(), [](const TruthObject& o) { return o.rv; }))
                throw ConfigError("objects", "an IR seeker needs one object marked rv");
        }
        if (remote) {
            if (!(remote->interval > 0.0)) throw ConfigError("remote.interval", "must be positive");
            if (remote->latency < 0.0) throw ConfigError("remote.latency", "must be >= 0");
            if (min_eigenvalue(remote->cov) <= 0.0) throw ConfigError("remote.cov", "must be positive definite");
        }
    }

    int scan_count() const { return static_cast<int>(std::floor(duration / scan_interval + 1e-9)) + 1; }
    double scan_time(int k) const { return k * scan_interval; }
};

// ---------------------------------------------------------------------------
// Truth
// ---------------------------------------------------------------------------

struct TruthTrack {
    int id = 0;
    bool rv = false;
    int first = 0;  ///< first scan index with a state
    std::vector<Vec6> states;  ///< states[k - first] at scan k
    std::optional<double> impact_time;

    bool present(int k) const { return k >= first && k < first + static_cast<int>(states.size()); }
    const Vec6& at(int k) const { return states.at(static_cast<std::size_t>(k - first)); }
};

struct TruthEvent {
    double time = 0.0;
    int object = 0;
    std::string what;
};

struct TruthHistory {
    std::vector<double> times;
    std::vector<TruthTrack> objects;
    std::vector<Vec6> interceptor;  ///< per scan, when a seeker is configured
    std::vector<TruthEvent> events;

    const TruthTrack* find(int id) const {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }
};

namespace detail {

/// Propagates x from t0 to t1 with RK4 steps no longer than `step`. Returns
/// nullopt and the impact time if the trajectory dips below the surface.
inline std::optional<Vec6> fly(Vec6 x, double t0, double t1, double step, const PhysicalConstants& c,
                               double& impact) {
    if (t1 - t0 <= 0.0) return x;
    const int n = substep_count(t1 - t0, step);
    const double h = (t1 - t0) / n;
    for (int i = 0; i < n; ++i) {
        x = propagate_rk4(x, h, c);
        if (x.head<3>().norm() < Earth::radius) {
            impact = t0 + (i + 1) * h;
            return std::nullopt;
        }
    }
    return x;
}

}  // namespace detail

/// Each object is propagated with RK4 between scan times from its spawn time
/// and terminated at impact.
inline TruthHistory generate_truth(const ScenarioConfig& cfg) {
    cfg.validate();
    TruthHistory out;
    const int n = cfg.scan_count();
    for (int k = 0; k < n; ++k) out.times.push_back(cfg.scan_time(k));
    for (const TruthObject& obj : cfg.objects) {
        TruthTrack tr;
        tr.id = obj.id;
        tr.rv = obj.rv;
        tr.first = static_cast<int>(std::ceil(obj.spawn_time / cfg.scan_interval - 1e-9));
        Vec6 x = obj.initial;
        double t = obj.spawn_time;
        for (int k = tr.first; k < n; ++k) {
            double impact = 0.0;
            const auto next = detail::fly(x, t, out.times[k], cfg.truth_step, cfg.constants, impact);
            if (!next) {
                tr.impact_time = impact;
                out.events.push_back({impact, obj.id, "impact"});
                break;
            }
            x = *next;
            t = out.times[k];
            tr.states.push_back(x);
        }
        out.objects.push_back(std::move(tr));
    }
    if (cfg.seeker) {
        Vec6 x = cfg.seeker->initial;
        double t = 0.0;
        for (int k = 0; k < n; ++k) {
            double impact = 0.0;
            const auto next = detail::fly(x, t, out.times[k], cfg.truth_step, cfg.constants, impact);
            if (!next) {
                out.events.push_back({impact, 0, "interceptor impact"});
                break;
            }
            x = *next;
            t = out.times[k];
            out.interceptor.push_back(x);
        }
    }
    return out;
}

/// Truth of one object at an arbitrary time inside its lifetime, propagated
/// from the latest scan sample at or before t.
inline std::optional<Vec6> truth_at(const TruthHistory& truth, const ScenarioConfig& cfg, int id, double t) {
    const TruthTrack* tr = truth.find(id);
    if (!tr || tr->states.empty()) return std::nullopt;
    int k = static_cast<int>(std::floor(t / cfg.scan_interval + 1e-9));
    k = std::min(k, tr->first + static_cast<int>(tr->states.size()) - 1);
    if (k < tr->first) return std::nullopt;
    const double tk = truth.times[k];
    if (t - tk > cfg.scan_interval + 1e-9) return std::nullopt;  // after impact
    double impact = 0.0;
    return detail::fly(tr->at(k), tk, t, cfg.truth_step, cfg.constants, impact);
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

struct ScanBatch {
    int index = 0;
    double time = 0.0;
    std::vector<RfMeasurement> rf;
    std::vector<IrMeasurement> ir;
};

/// Seeker body frame at the interceptor state looking along `boresight`.
inline BodyFrame seeker_frame(const Vec6& interceptor, const Vec3& boresight) {
    BodyFrame b;
    b.origin_position = interceptor.head<3>();
    b.origin_velocity = interceptor.tail<3>();
    b.attitude = Attitude::from_boresight(boresight, -interceptor.head<3>());
    return b;
}

inline bool rf_visible(const Vec3& p_eci, const RfSensorConfig& s, double t) {
    const Vec3 p = state_transform(EciFrame{}, EnuFrame{s.site}, t).apply_position(p_eci);
    const double el = std::atan2(p.z(), std::hypot(p.x(), p.y()));
    return el > 0.0 && el <= s.max_elevation;
}

/// Measurements of every visible object at scan k plus Poisson clutter; each
/// sensor's batch is shuffled. `body` is the seeker frame when IR is active.
inline ScanBatch generate_scan(const TruthHistory& truth, int k, const ScenarioConfig& cfg,
                               const std::optional<BodyFrame>& body, std::mt19937_64& rng) {
    ScanBatch scan;
    scan.index = k;
    scan.time = truth.times.at(k);
    const double t = scan.time;
    for (const RfSensorConfig& s : cfg.rf_sensors) {
        std::vector<RfMeasurement> batch;
        for (const TruthTrack& obj : truth.objects) {
            if (!obj.present(k)) continue;
            const Vec6& x = obj.at(k);
            if (!rf_visible(x.head<3>(), s, t)) continue;
            auto z = simulate_measurement(State6::from_vector(x, EciFrame{}, t), s, rng);
            if (!z) continue;
            z->origin = obj.id;
            batch.push_back(*z);
        }
        if (s.false_alarm_rate > 0.0) {
            const int count = std::poisson_distribution<int>(s.false_alarm_rate)(rng);
            std::uniform_real_distribution<double> range(s.min_range, s.max_range), az(-kPi, kPi),
                el(0.0, s.max_elevation);
            for (int i = 0; i < count; ++i) {
                RfMeasurement z;
                z.z << range(rng), az(rng), el(rng);
                z.noise_cov = s.noise_cov;
                z.sensor_id = s.id;
                z.timestamp = t;
                z.site = s.site;
                z.origin = kFalseAlarm;
                batch.push_back(z);
            }
        }
        std::shuffle(batch.begin(), batch.end(), rng);
        scan.rf.insert(scan.rf.end(), batch.begin(), batch.end());
    }
    if (cfg.seeker && body) {
        const IrSensorConfig& s = cfg.seeker->ir;
        std::vector<IrMeasurement> batch;
        for (const TruthTrack& obj : truth.objects) {
            if (!obj.present(k)) continue;
            const Vec6& x = obj.at(k);
            if (off_boresight_angle(x.head<3>(), *body) > s.fov_half_angle) continue;
            auto z = simulate_measurement(State6::from_vector(x, EciFrame{}, t), s, *body, rng);
            if (!z) continue;
            z->origin = obj.id;
            batch.push_back(*z);
        }
        if (s.false_alarm_rate > 0.0) {
            const int count = std::poisson_distribution<int>(s.false_alarm_rate)(rng);
            std::uniform_real_distribution<double> ang(-s.fov_half_angle, s.fov_half_angle);
            for (int i = 0; i < count; ++i) {
                IrMeasurement z;
                z.z << ang(rng), ang(rng);
                z.noise_cov = s.noise_cov;
                z.sensor_id = s.id;
                z.timestamp = t;
                z.body = *body;
                z.origin = kFalseAlarm;
                batch.push_back(z);
            }
        }
        std::shuffle(batch.begin(), batch.end(), rng);
        scan.ir = std::move(batch);
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Remote cues
// ---------------------------------------------------------------------------

/// Cues delivered every `interval` from `start_time`, each carrying the truth
/// `latency` seconds before delivery plus N(0, cov) error. Sorted by delivery.
inline std::vector<RemoteCue> generate_remote_cues(const TruthHistory& truth, const ScenarioConfig& cfg,
                                                   std::mt19937_64& rng) {
    std::vector<RemoteCue> cues;
    if (!cfg.remote) return cues;
    const RemoteSpec& spec = *cfg.remote;
    if (spec.recorded) {
        for (const RemoteCue& c : *spec.recorded)
            if (c.delivered <= cfg.duration + 1e-9) cues.push_back(c);
        std::stable_sort(cues.begin(), cues.end(),
                         [](const RemoteCue& a, const RemoteCue& b) { return a.delivered < b.delivered; });
        return cues;
    }
    const Mat6 root = psd_sqrt<6>(spec.cov);
    std::normal_distribution<double> n01(0.0, 1.0);
    int next_id = 1;
    for (int k = 0;; ++k) {
        const double delivered = spec.start_time + k * spec.interval;
        if (delivered > cfg.duration + 1e-9) break;
        const double stamp = delivered - spec.latency;
        if (stamp < 0.0) continue;
        for (const TruthTrack& obj : truth.objects) {
            if (!spec.objects.empty() &&
                std::find(spec.objects.begin(), spec.objects.end(), obj.id) == spec.objects.end())
                continue;
            const auto x = truth_at(truth, cfg, obj.id, stamp);
            if (!x) continue;
            Vec6 w;
            for (int i = 0; i < 6; ++i) w(i) = n01(rng);
            RemoteCue cue;
            cue.id = next_id++;
            cue.estimate = {*x + root * w, spec.cov, stamp};
            cue.source = spec.source;
            cue.origin = obj.id;
            cue.delivered = delivered;
            cues.push_back(cue);
        }
    }
    return cues;
}

}  // namespace bmd
