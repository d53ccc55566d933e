#pragma once

// JSON scenario files. Every field is optional except the object list and at
// least one sensor; unknown keys are rejected. Errors carry the field path.
//
// {
//   "duration": 300, "scan_interval": 1, "truth_step": 0.1, "mu": 3.986004418e14,
//   "objects": [ { "id": 1, "rv": true, "spawn_time": 0, "state": <state> } ],
//   "sensors": {
//     "rf": [ { "id": 1, "site": <site>, "sigma": [m, rad, rad], "pd": 0.95,
//               "false_alarm_rate": 0, "min_range": 1e3, "max_range": 3e6,
//               "max_elevation_deg": 90 } ],
//     "ir": { "id": 100, "sigma": [rad, rad], "pd": 0.95, "false_alarm_rate": 0,
//             "fov_half_angle_deg": 30, "platform": <state>, "start_time": 0 }
//   },
//   "remote": { "interval": 10, "latency": 10, "start_time": 0, "sigma": [6],
//               "s_rl_diag": [6], "objects": [ids], "source": "remote",
//               "file": "cues.jsonl" },
//   "tracker": { "filter": "ekf|ukf", "integrator": "euler|rk4", "max_step": 0.5,
//                "ukf_kappa": 0, "ukf_zeta_mode": "standard|paper_exact",
//                "joseph": false, "process_noise_q": 1e-4,
//                "fusion": "linear|measurement|ci", "metrics_burn_in": 10,
//                "association": { ...AssociationConfig fields... } }
// }
//
// <site>  = { "lat_deg": .., "lon_deg": .., "alt_m": .. }
// <state> = { "frame": "eci", "position": [3], "velocity": [3] }
//         | { "frame": "enu", "site": <site>, "position": [3], "velocity": [3] }
// ENU states are converted to ECI at the object's spawn time (t = 0 for the
// IR platform).
//
// remote.file replaces the generated cues with a JSON-lines stream, one cue
// per line: { "id", "t", "mean": [6], "cov_upper": [21] } with optional
// "delivered" (default t + latency), "origin" and "source". Relative paths
// resolve against the scenario file's directory.

#include "bmdtrack/fusion.hpp"
#include "bmdtrack/metrics.hpp"
#include "bmdtrack/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

namespace bmd {

struct TrackerConfig {
    FilterConfig filter;
    AssociationConfig association;
    FusionMethod fusion = FusionMethod::Measurement;
    MetricsOptions metrics;
};

struct ScenarioFile {
    ScenarioConfig scenario;
    TrackerConfig tracker;
};

namespace config_detail {

using json = nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    require_object(j, path);
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : keys) ok = ok || key == k;
        if (!ok) throw ConfigError(join(path, key), "unknown field");
    }
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
}

inline void read(const json& j, const char* key, const std::string& path, double& out) {
    if (j.contains(key)) out = number(j.at(key), join(path, key));
}

inline void read(const json& j, const char* key, const std::string& path, int& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
    out = v.get<int>();
}

inline void read(const json& j, const char* key, const std::string& path, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
    out = j.at(key).get<bool>();
}

inline void read(const json& j, const char* key, const std::string& path, std::string& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
    out = j.at(key).get<std::string>();
}

/// Enumerated string field; the first option is the default. Options are
/// matched by their to_string spelling.
template <typename E>
E choice(const json& j, const char* key, const std::string& path, std::initializer_list<E> options) {
    if (!j.contains(key)) return *options.begin();
    std::string s;
    read(j, key, path, s);
    std::string expected;
    for (E e : options) {
        if (to_string(e) == s) return e;
        expected += (expected.empty() ? "\"" : ", \"") + std::string(to_string(e)) + "\"";
    }
    throw ConfigError(join(path, key), "expected one of " + expected);
}

template <int N>
Eigen::Matrix<double, N, 1> vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != N)
        throw ConfigError(path, "expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

template <int N>
Eigen::Matrix<double, N, N> sigma_cov(const json& j, const std::string& path) {
    const auto s = vector<N>(j, path);
    if (s.minCoeff() <= 0.0) throw ConfigError(path, "standard deviations must be positive");
    return Eigen::Matrix<double, N, 1>(s.cwiseProduct(s)).asDiagonal();
}

inline GeodeticSite site(const json& j, const std::string& path) {
    allow_keys(j, path, {"lat_deg", "lon_deg", "alt_m"});
    double lat = 0, lon = 0, alt = 0;
    read(j, "lat_deg", path, lat);
    read(j, "lon_deg", path, lon);
    read(j, "alt_m", path, alt);
    if (std::abs(lat) > 90.0) throw ConfigError(join(path, "lat_deg"), "must be within [-90, 90]");
    return {lat * kPi / 180.0, lon * kPi / 180.0, alt};
}

inline Vec6 state(const json& j, const std::string& path, double t) {
    allow_keys(j, path, {"frame", "site", "position", "velocity"});
    std::string frame = "eci";
    read(j, "frame", path, frame);
    if (!j.contains("position")) throw ConfigError(join(path, "position"), "required");
    Vec6 x;
    x.head<3>() = vector<3>(j.at("position"), join(path, "position"));
    x.tail<3>() = j.contains("velocity") ? vector<3>(j.at("velocity"), join(path, "velocity")) : Vec3::Zero();
    if (frame == "eci") {
        if (j.contains("site")) throw ConfigError(join(path, "site"), "only used with frame \"enu\"");
        return x;
    }
    if (frame != "enu") throw ConfigError(join(path, "frame"), "expected \"eci\" or \"enu\"");
    if (!j.contains("site")) throw ConfigError(join(path, "site"), "required for frame \"enu\"");
    const GeodeticSite s = site(j.at("site"), join(path, "site"));
    return state_transform(EnuFrame{s}, EciFrame{}, t).apply(x);
}

inline RfSensorConfig rf_sensor(const json& j, const std::string& path) {
    allow_keys(j, path, {"id", "site", "sigma", "pd", "false_alarm_rate", "min_range", "max_range",
                         "max_elevation_deg"});
    RfSensorConfig s;
    read(j, "id", path, s.id);
    if (!j.contains("site")) throw ConfigError(join(path, "site"), "required");
    s.site = site(j.at("site"), join(path, "site"));
    if (j.contains("sigma")) s.noise_cov = sigma_cov<3>(j.at("sigma"), join(path, "sigma"));
    read(j, "pd", path, s.detection_probability);
    read(j, "false_alarm_rate", path, s.false_alarm_rate);
    read(j, "min_range", path, s.min_range);
    read(j, "max_range", path, s.max_range);
    double max_el = 90.0;
    read(j, "max_elevation_deg", path, max_el);
    s.max_elevation = max_el * kPi / 180.0;
    if (!(s.min_range > 0.0 && s.max_range > s.min_range))
        throw ConfigError(join(path, "max_range"), "need 0 < min_range < max_range");
    return s;
}

inline SeekerSpec ir_sensor(const json& j, const std::string& path) {
    allow_keys(j, path, {"id", "sigma", "pd", "false_alarm_rate", "fov_half_angle_deg", "platform", "start_time"});
    SeekerSpec s;
    read(j, "id", path, s.ir.id);
    if (j.contains("sigma")) s.ir.noise_cov = sigma_cov<2>(j.at("sigma"), join(path, "sigma"));
    read(j, "pd", path, s.ir.detection_probability);
    read(j, "false_alarm_rate", path, s.ir.false_alarm_rate);
    double fov = 30.0;
    read(j, "fov_half_angle_deg", path, fov);
    s.ir.fov_half_angle = fov * kPi / 180.0;
    read(j, "start_time", path, s.start_time);
    if (!j.contains("platform")) throw ConfigError(join(path, "platform"), "required");
    s.initial = state(j.at("platform"), join(path, "platform"), 0.0);
    return s;
}

inline Mat6 cov_upper(const json& a, const std::string& path) {
    if (!a.is_array() || a.size() != 21) throw ConfigError(path, "expected 21 numbers");
    Mat6 m;
    int n = 0;
    for (int r = 0; r < 6; ++r)
        for (int c = r; c < 6; ++c, ++n) m(r, c) = m(c, r) = number(a[n], path);
    if (!(min_eigenvalue(m) > 0.0)) throw ConfigError(path, "not positive definite");
    return m;
}

inline std::vector<RemoteCue> cue_stream(const std::filesystem::path& file, const RemoteSpec& spec,
                                         const std::string& path) {
    std::ifstream in(file);
    if (!in) throw ConfigError(path, "cannot open " + file.string());
    std::vector<RemoteCue> cues;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string at = path + ":" + std::to_string(n);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(at, std::string("invalid JSON: ") + e.what());
        }
        allow_keys(j, at, {"id", "t", "mean", "cov_upper", "delivered", "origin", "source"});
        for (const char* k : {"id", "t", "mean", "cov_upper"})
            if (!j.contains(k)) throw ConfigError(join(at, k), "required");
        RemoteCue c;
        if (!j.at("id").is_number_integer()) throw ConfigError(join(at, "id"), "expected an integer");
        c.id = j.at("id").get<int>();
        c.estimate.epoch = number(j.at("t"), join(at, "t"));
        c.estimate.mean = vector<6>(j.at("mean"), join(at, "mean"));
        c.estimate.cov = cov_upper(j.at("cov_upper"), join(at, "cov_upper"));
        c.delivered = c.estimate.epoch + spec.latency;
        read(j, "delivered", at, c.delivered);
        if (c.delivered < c.estimate.epoch) throw ConfigError(join(at, "delivered"), "before the cue timestamp");
        c.source = spec.source;
        read(j, "source", at, c.source);
        read(j, "origin", at, c.origin);
        cues.push_back(c);
    }
    return cues;
}

inline RemoteSpec remote(const json& j, const std::string& path, const std::filesystem::path& base) {
    allow_keys(j, path, {"interval", "latency", "start_time", "sigma", "s_rl_diag", "objects", "source", "file"});
    RemoteSpec r;
    read(j, "interval", path, r.interval);
    read(j, "latency", path, r.latency);
    read(j, "start_time", path, r.start_time);
    if (j.contains("sigma")) r.cov = sigma_cov<6>(j.at("sigma"), join(path, "sigma"));
    if (j.contains("s_rl_diag")) r.s_rl = Mat6(vector<6>(j.at("s_rl_diag"), join(path, "s_rl_diag")).asDiagonal());
    if (j.contains("objects")) {
        const json& ids = j.at("objects");
        if (!ids.is_array()) throw ConfigError(join(path, "objects"), "expected an array of ids");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!ids[i].is_number_integer())
                throw ConfigError(join(path, "objects") + "[" + std::to_string(i) + "]", "expected an integer");
            r.objects.push_back(ids[i].get<int>());
        }
    }
    read(j, "source", path, r.source);
    if (j.contains("file")) {
        if (!j.at("file").is_string()) throw ConfigError(join(path, "file"), "expected a path");
        std::filesystem::path file = j.at("file").get<std::string>();
        if (file.is_relative()) file = base / file;
        r.recorded = cue_stream(file, r, join(path, "file"));
    }
    return r;
}

inline AssociationConfig association(const json& j, const std::string& path) {
    allow_keys(j, path, {"gate_probability", "pd_rf", "pd_ir", "false_alarm_density_rf", "false_alarm_density_ir",
                         "new_track_density", "new_track_sigma", "confirm_score", "delete_score", "score_cap",
                         "max_consecutive_misses", "init_velocity_sigma", "quantum"});
    AssociationConfig a;
    read(j, "gate_probability", path, a.gate_probability);
    read(j, "pd_rf", path, a.pd_rf);
    read(j, "pd_ir", path, a.pd_ir);
    read(j, "false_alarm_density_rf", path, a.false_alarm_density_rf);
    read(j, "false_alarm_density_ir", path, a.false_alarm_density_ir);
    if (j.contains("new_track_density")) {
        const double d = number(j.at("new_track_density"), join(path, "new_track_density"));
        if (!(d > 0.0)) throw ConfigError(join(path, "new_track_density"), "must be positive");
        a.new_track_density = d;
    }
    read(j, "new_track_sigma", path, a.new_track_sigma);
    read(j, "confirm_score", path, a.confirm_score);
    read(j, "delete_score", path, a.delete_score);
    read(j, "score_cap", path, a.score_cap);
    read(j, "max_consecutive_misses", path, a.max_consecutive_misses);
    read(j, "init_velocity_sigma", path, a.init_velocity_sigma);
    read(j, "quantum", path, a.quantum);
    if (!(a.gate_probability > 0.0 && a.gate_probability < 1.0))
        throw ConfigError(join(path, "gate_probability"), "must be in (0, 1)");
    for (auto [key, v] : {std::pair{"pd_rf", a.pd_rf}, std::pair{"pd_ir", a.pd_ir}})
        if (!(v > 0.0 && v < 1.0)) throw ConfigError(join(path, key), "must be in (0, 1)");
    if (a.false_alarm_density_rf < 0.0 || a.false_alarm_density_ir < 0.0)
        throw ConfigError(join(path, "false_alarm_density_rf"), "must be >= 0");
    if (!(a.delete_score < a.confirm_score))
        throw ConfigError(join(path, "delete_score"), "must be below confirm_score");
    if (!(a.quantum > 0.0)) throw ConfigError(join(path, "quantum"), "must be positive");
    if (a.max_consecutive_misses < 0) throw ConfigError(join(path, "max_consecutive_misses"), "must be >= 0");
    return a;
}

inline TrackerConfig tracker(const json& j, const std::string& path) {
    allow_keys(j, path, {"filter", "integrator", "max_step", "ukf_kappa", "ukf_zeta_mode", "joseph",
                         "process_noise_q", "fusion", "metrics_burn_in", "association"});
    TrackerConfig t;
    t.filter.kind = choice(j, "filter", path, {FilterKind::Ekf, FilterKind::Ukf});
    t.filter.propagation.integrator = choice(j, "integrator", path, {Integrator::Rk4, Integrator::Euler});
    read(j, "max_step", path, t.filter.propagation.max_step);
    if (!(t.filter.propagation.max_step > 0.0)) throw ConfigError(join(path, "max_step"), "must be positive");
    read(j, "ukf_kappa", path, t.filter.ukf.kappa);
    if (!(kStateDim + t.filter.ukf.kappa > 0.0)) throw ConfigError(join(path, "ukf_kappa"), "must exceed -6");
    t.filter.zeta_mode = choice(j, "ukf_zeta_mode", path, {ZetaMode::Standard, ZetaMode::PaperExact});
    read(j, "joseph", path, t.filter.joseph);
    read(j, "process_noise_q", path, t.filter.process_noise_q);
    if (t.filter.process_noise_q < 0.0) throw ConfigError(join(path, "process_noise_q"), "must be >= 0");
    t.fusion = choice(j, "fusion", path,
                      {FusionMethod::Measurement, FusionMethod::Linear, FusionMethod::CovarianceIntersection});
    read(j, "metrics_burn_in", path, t.metrics.burn_in_scans);
    if (t.metrics.burn_in_scans < 0) throw ConfigError(join(path, "metrics_burn_in"), "must be >= 0");
    if (j.contains("association")) t.association = association(j.at("association"), join(path, "association"));
    return t;
}

}  // namespace config_detail

/// `base` is the directory relative file references resolve against.
inline ScenarioFile parse_scenario(const nlohmann::json& j, const std::filesystem::path& base = ".") {
    using namespace config_detail;
    allow_keys(j, "", {"duration", "scan_interval", "truth_step", "mu", "objects", "sensors", "remote", "tracker"});
    ScenarioFile f;
    ScenarioConfig& s = f.scenario;
    read(j, "duration", "", s.duration);
    read(j, "scan_interval", "", s.scan_interval);
    read(j, "truth_step", "", s.truth_step);
    read(j, "mu", "", s.constants.mu);
    if (!(s.constants.mu > 0.0)) throw ConfigError("mu", "must be positive");
    if (!j.contains("objects") || !j.at("objects").is_array())
        throw ConfigError("objects", "expected an array of objects");
    const json& objs = j.at("objects");
    for (std::size_t i = 0; i < objs.size(); ++i) {
        const std::string path = "objects[" + std::to_string(i) + "]";
        allow_keys(objs[i], path, {"id", "rv", "spawn_time", "state"});
        TruthObject o;
        o.id = static_cast<int>(i) + 1;
        read(objs[i], "id", path, o.id);
        if (o.id <= 0) throw ConfigError(join(path, "id"), "must be positive");
        read(objs[i], "rv", path, o.rv);
        read(objs[i], "spawn_time", path, o.spawn_time);
        if (!objs[i].contains("state")) throw ConfigError(join(path, "state"), "required");
        o.initial = state(objs[i].at("state"), join(path, "state"), o.spawn_time);
        s.objects.push_back(o);
    }
    if (j.contains("sensors")) {
        const json& sj = j.at("sensors");
        allow_keys(sj, "sensors", {"rf", "ir"});
        if (sj.contains("rf")) {
            if (!sj.at("rf").is_array()) throw ConfigError("sensors.rf", "expected an array");
            for (std::size_t i = 0; i < sj.at("rf").size(); ++i)
                s.rf_sensors.push_back(rf_sensor(sj.at("rf")[i], "sensors.rf[" + std::to_string(i) + "]"));
        }
        if (sj.contains("ir")) s.seeker = ir_sensor(sj.at("ir"), "sensors.ir");
    }
    if (j.contains("remote")) s.remote = remote(j.at("remote"), "remote", base);
    f.tracker = tracker(j.contains("tracker") ? j.at("tracker") : json::object(), "tracker");
    f.tracker.filter.constants = s.constants;
    s.validate();
    return f;
}

inline ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return parse_scenario(j, std::filesystem::path(path).parent_path());
}

}  // namespace bmd
