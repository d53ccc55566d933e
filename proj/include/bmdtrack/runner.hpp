#pragma once

// End-to-end replications: truth, scans, association, seeker pointing and
// remote cue fusion, with JSON-lines logs and CSV metrics.
//
// Output layout under the run directory:
//   run.json                  scenario path, filter, reps, seed, burn-in
//   rep_NNNN/run.json         replication seed and failure count
//   rep_NNNN/truth.jsonl      {scan, t, id, state[6]} (id 0: interceptor)
//   rep_NNNN/measurements.jsonl {scan, t, kind, sensor, z[], origin}
//   rep_NNNN/cues.jsonl       {id, t, mean[6], cov_upper[21], delivered, source,
//                              origin, scan, track, trace_before, trace_after}
//   rep_NNNN/tracks.jsonl     {scan, t, id, status, mean[6], cov_upper[21]}
//   rep_NNNN/assignments.jsonl {scan, t, kind, sensor, measurement, origin,
//                              track, new_track, value, distance2}
//   rep_NNNN/directives.jsonl {scan, t, track, coasted, measurement, angles[2],
//                              predicted[2], los[3], angle_cov_upper[3], true_angles[2]}
//   rep_NNNN/events.jsonl     {scan, t, kind, message}
//   metrics.csv, tracks.csv, aggregate.csv, summary.json
// The CSV and summary files are computed from the logs alone.

#include "bmdtrack/config.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace bmd {

struct DirectiveRecord {
    int scan = 0;
    PointingDirective directive;
    bool has_truth = false;
    Vec2 true_angles = Vec2::Zero();  ///< RV truth in the seeker body frame

    /// Squared Mahalanobis distance of the pointing error against angle_cov.
    double error_distance2() const {
        Vec2 e = true_angles - directive.angles;
        e(0) = wrap_angle(e(0));
        return e.dot(directive.angle_cov.ldlt().solve(e));
    }
};

struct EventRecord {
    int scan = 0;
    double time = 0.0;
    std::string kind;  ///< impact, warning, error
    std::string message;
};

struct ReplicationResult {
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<double> times;
    RunLog log;
    std::vector<ScanBatch> scans;
    std::vector<Vec6> interceptor;
    std::vector<DirectiveRecord> directives;
    std::vector<EventRecord> events;
    int failed_scans = 0;
    RunMetrics metrics;

    bool failed() const { return failed_scans > 0; }
};

/// Independent generator per (base seed, replication, stream).
inline std::mt19937_64 stream_rng(std::uint64_t base, int rep, int stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

namespace detail {

inline Mat6 upper_symmetric(const Mat6& m) {
    Mat6 s = m;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < i; ++j) s(i, j) = s(j, i);
    return s;
}

/// Remote measurement retained for the correlated-noise time update.
struct PendingFusion {
    Vec6 z = Vec6::Zero();
    Mat6 r = Mat6::Identity();
};

class Replication {
public:
    Replication(const ScenarioFile& f, int rep, std::uint64_t seed)
        : sc_(f.scenario), tc_(f.tracker), fcfg_(f.tracker.filter), acfg_(f.tracker.association) {
        out_.rep = rep;
        out_.seed = seed;
        meas_rng_ = stream_rng(seed, rep, 0);
        cue_rng_ = stream_rng(seed, rep, 1);
    }

    ReplicationResult run() {
        truth_ = generate_truth(sc_);
        out_.times = truth_.times;
        for (const TruthTrack& o : truth_.objects)
            for (std::size_t i = 0; i < o.states.size(); ++i) {
                const int k = o.first + static_cast<int>(i);
                out_.log.truth.push_back({k, truth_.times[k], o.id, o.states[i]});
                if (o.rv) rv_id_ = o.id;
            }
        out_.interceptor = truth_.interceptor;
        for (const TruthEvent& e : truth_.events)
            out_.events.push_back({scan_of(e.time), e.time, "impact",
                                   e.object ? "object " + std::to_string(e.object) : "interceptor"});
        cues_ = generate_remote_cues(truth_, sc_, cue_rng_);

        for (int k = 0; k < static_cast<int>(truth_.times.size()); ++k) {
            try {
                scan(k);
            } catch (const std::exception& e) {
                ++out_.failed_scans;
                out_.events.push_back({k, truth_.times[k], "error", e.what()});
            }
            record_tracks(k);
        }
        out_.metrics = compute_metrics(out_.log, tc_.metrics);
        return std::move(out_);
    }

private:
    int scan_of(double t) const { return static_cast<int>(std::floor(t / sc_.scan_interval + 1e-9)); }

    void warn(int k, const std::vector<std::string>& msgs) {
        for (const auto& m : msgs) out_.events.push_back({k, truth_.times[k], "warning", m});
    }

    void predict(int k) {
        const double t = truth_.times[k];
        std::vector<std::string> warnings;
        for (Track& tr : file_.tracks) {
            if (!tr.alive()) continue;
            const double dt = t - tr.estimate.epoch;
            if (dt <= kEpochTolerance) continue;
            try {
                const auto p = pending_.find(tr.id);
                if (p != pending_.end()) {
                    tr.estimate = fused_time_update(tr.estimate, sc_.remote->s_rl, p->second.r, p->second.z, dt,
                                                    default_process_noise(dt, fcfg_.process_noise_q),
                                                    fcfg_.propagation, fcfg_.constants);
                } else {
                    tr.estimate = time_update(tr.estimate, dt, fcfg_);
                }
            } catch (const std::exception& e) {
                tr.status = TrackStatus::Deleted;
                warnings.push_back("track " + std::to_string(tr.id) + " time update: " + e.what());
            }
        }
        pending_.clear();
        warn(k, warnings);
    }

    /// The RV track is the confirmed track with the most updates from the RV.
    void flag_rv() {
        int best = 0, best_id = 0;
        for (const Track& tr : file_.tracks) {
            if (!tr.alive() || tr.status != TrackStatus::Confirmed) continue;
            const auto it = origin_counts_.find(tr.id);
            if (it == origin_counts_.end()) continue;
            const auto c = it->second.find(rv_id_);
            if (c != it->second.end() && c->second > best) {
                best = c->second;
                best_id = tr.id;
            }
        }
        for (Track& tr : file_.tracks) tr.rv_flag = best_id != 0 && tr.id == best_id;
    }

    void scan(int k) {
        const double t = truth_.times[k];
        predict(k);

        std::optional<SeekerView> view;
        if (sc_.seeker && t >= sc_.seeker->start_time - 1e-9 && k < static_cast<int>(truth_.interceptor.size())) {
            const Vec6& platform = truth_.interceptor[k];
            if (!boresight_) {
                // acquisition: the seeker is cued onto the RV before any RV track exists
                const TruthTrack* rv = truth_.find(rv_id_);
                if (rv && rv->present(k)) boresight_ = rv->at(k).head<3>() - platform.head<3>();
            }
            if (boresight_) view = SeekerView{seeker_frame(platform, *boresight_), sc_.seeker->ir.fov_half_angle};
        }

        ScanBatch batch =
            generate_scan(truth_, k, sc_, view ? std::optional<BodyFrame>(view->body) : std::nullopt, meas_rng_);

        if (view) {
            flag_rv();
            const bool has_rv = std::any_of(file_.tracks.begin(), file_.tracks.end(),
                                            [](const Track& tr) { return tr.alive() && tr.rv_flag; });
            if (has_rv) {
                DirectiveRecord d;
                d.scan = k;
                d.directive = seeker_point(file_.tracks, batch.ir, *view, t, fcfg_, acfg_);
                const TruthTrack* rv = truth_.find(rv_id_);
                d.has_truth = rv && rv->present(k);
                if (d.has_truth)
                    d.true_angles = h_ir(state_transform(EciFrame{}, view->body, t).apply_position(rv->at(k).head<3>()));
                boresight_ = d.directive.line_of_sight;
                out_.directives.push_back(d);
            } else {
                boresight_.reset();
            }
        }

        const ScanReport report = sc_.seeker ? scan_multi_sensor(file_, batch.rf, batch.ir, view, fcfg_, acfg_)
                                             : scan_single_sensor(file_, batch.rf, fcfg_, acfg_);
        for (const AssignmentRecord& r : report.assignments) {
            out_.log.assignments.push_back({k, r});
            if (r.track != 0) ++origin_counts_[r.track][r.origin];
        }
        warn(k, report.warnings);
        out_.scans.push_back(std::move(batch));

        while (next_cue_ < cues_.size() && cues_[next_cue_].delivered <= t + 1e-9) ingest(cues_[next_cue_++], k);
    }

    void ingest(const RemoteCue& cue, int k) {
        const double t = truth_.times[k];
        CueRecord rec;
        rec.id = cue.id;
        rec.scan = k;
        rec.timestamp = cue.timestamp();
        rec.delivered = cue.delivered;
        rec.source = cue.source;
        rec.origin = cue.origin;
        rec.mean = cue.estimate.mean;
        rec.cov = upper_symmetric(cue.estimate.cov);
        try {
            const RemoteCue local_time = propagate_cue(cue, t, fcfg_);
            const CueAssociation a = associate_remote(local_time, file_.tracks, acfg_.gate_probability);
            if (a.track_id) {
                Track& tr = *file_.find(*a.track_id);
                FusedTrack f;
                switch (tc_.fusion) {
                    case FusionMethod::Linear: f = fuse_linear(local_time.estimate, tr.estimate); break;
                    case FusionMethod::Measurement: f = fuse_as_measurement(tr.estimate, local_time); break;
                    default: f = covariance_intersection(local_time.estimate, tr.estimate); break;
                }
                rec.track = tr.id;
                rec.trace_before = tr.estimate.cov.trace();
                rec.trace_after = f.estimate.cov.trace();
                tr.estimate = f.estimate;
                if (tc_.fusion == FusionMethod::Measurement && !sc_.remote->s_rl.isZero())
                    pending_[tr.id] = {local_time.estimate.mean, local_time.estimate.cov};
            }
        } catch (const std::exception& e) {
            out_.events.push_back({k, t, "warning", "cue " + std::to_string(cue.id) + ": " + e.what()});
        }
        out_.log.cues.push_back(rec);
    }

    void record_tracks(int k) {
        for (const Track& tr : file_.tracks) {
            if (!tr.alive()) continue;
            out_.log.tracks.push_back(
                {k, truth_.times[k], tr.id, tr.status, tr.estimate.mean, upper_symmetric(tr.estimate.cov)});
        }
        file_.prune();
    }

    const ScenarioConfig& sc_;
    const TrackerConfig& tc_;
    const FilterConfig& fcfg_;
    const AssociationConfig& acfg_;
    ReplicationResult out_;
    std::mt19937_64 meas_rng_, cue_rng_;
    TruthHistory truth_;
    std::vector<RemoteCue> cues_;
    std::size_t next_cue_ = 0;
    TrackFile file_;
    int rv_id_ = 0;
    std::optional<Vec3> boresight_;
    std::map<int, PendingFusion> pending_;
    std::map<int, std::map<int, int>> origin_counts_;
};

}  // namespace detail

/// One replication. Numerical failures inside a scan are logged as events and
/// the replication continues with the next scan.
inline ReplicationResult run_replication(const ScenarioFile& f, int rep, std::uint64_t seed) {
    return detail::Replication(f, rep, seed).run();
}

// ---------------------------------------------------------------------------
// Logs
// ---------------------------------------------------------------------------

namespace io {

using json = nlohmann::json;

template <typename Derived>
json array(const Eigen::MatrixBase<Derived>& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json upper(const Mat6& m) {
    json a = json::array();
    for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) a.push_back(m(i, j));
    return a;
}

inline Mat6 from_upper(const json& a) {
    if (!a.is_array() || a.size() != 21) throw std::runtime_error("cov_upper must have 21 entries");
    Mat6 m;
    int n = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) m(i, j) = m(j, i) = a[n++].get<double>();
    return m;
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& a) {
    if (!a.is_array() || a.size() != N) throw std::runtime_error("expected an array of " + std::to_string(N));
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = a[i].get<double>();
    return v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline TrackStatus status_from(const std::string& s) {
    if (s == "tentative") return TrackStatus::Tentative;
    if (s == "confirmed") return TrackStatus::Confirmed;
    if (s == "deleted") return TrackStatus::Deleted;
    throw std::runtime_error("unknown track status " + s);
}

class LineWriter {
public:
    explicit LineWriter(const std::filesystem::path& p) : out_(p) {
        if (!out_) throw std::runtime_error("cannot write " + p.string());
    }
    void operator()(const json& j) { out_ << j.dump() << '\n'; }

private:
    std::ofstream out_;
};

template <typename F>
void read_lines(const std::filesystem::path& p, F&& f) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) f(json::parse(line));
}

inline std::string rep_dir_name(int rep) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep_%04d", rep);
    return buf;
}

}  // namespace io

inline void write_replication_logs(const ReplicationResult& r, const std::filesystem::path& dir) {
    using io::json;
    std::filesystem::create_directories(dir);
    {
        std::ofstream meta(dir / "run.json");
        meta << json{{"rep", r.rep}, {"seed", r.seed}, {"failed_scans", r.failed_scans}}.dump(2) << '\n';
    }
    {
        io::LineWriter w(dir / "truth.jsonl");
        for (const TruthSample& s : r.log.truth)
            w({{"scan", s.scan}, {"t", s.time}, {"id", s.id}, {"state", io::array(s.state)}});
        for (std::size_t k = 0; k < r.interceptor.size(); ++k)
            w({{"scan", k}, {"t", r.times.at(k)}, {"id", 0},
               {"state", io::array(r.interceptor[k])}});
    }
    {
        io::LineWriter w(dir / "measurements.jsonl");
        for (const ScanBatch& b : r.scans) {
            for (const RfMeasurement& z : b.rf)
                w({{"scan", b.index}, {"t", z.timestamp}, {"kind", "rf"}, {"sensor", z.sensor_id},
                   {"z", io::array(z.z)}, {"origin", z.origin}});
            for (const IrMeasurement& z : b.ir)
                w({{"scan", b.index}, {"t", z.timestamp}, {"kind", "ir"}, {"sensor", z.sensor_id},
                   {"z", io::array(z.z)}, {"origin", z.origin}});
        }
    }
    {
        io::LineWriter w(dir / "cues.jsonl");
        for (const CueRecord& c : r.log.cues)
            w({{"id", c.id}, {"t", c.timestamp}, {"mean", io::array(c.mean)}, {"cov_upper", io::upper(c.cov)},
               {"delivered", c.delivered}, {"source", c.source}, {"origin", c.origin}, {"scan", c.scan},
               {"track", c.track ? json(*c.track) : json(nullptr)}, {"trace_before", c.trace_before},
               {"trace_after", c.trace_after}});
    }
    {
        io::LineWriter w(dir / "tracks.jsonl");
        for (const TrackSample& s : r.log.tracks)
            w({{"scan", s.scan}, {"t", s.time}, {"id", s.id}, {"status", to_string(s.status)},
               {"mean", io::array(s.mean)}, {"cov_upper", io::upper(s.cov)}});
    }
    {
        io::LineWriter w(dir / "assignments.jsonl");
        for (const AssignmentEntry& a : r.log.assignments) {
            const AssignmentRecord& x = a.record;
            w({{"scan", a.scan}, {"t", x.time}, {"kind", to_string(x.kind)}, {"sensor", x.sensor},
               {"measurement", x.measurement}, {"origin", x.origin}, {"track", x.track},
               {"new_track", x.new_track}, {"value", io::finite_or_null(x.value)},
               {"distance2", io::finite_or_null(x.distance2)}});
        }
    }
    {
        io::LineWriter w(dir / "directives.jsonl");
        for (const DirectiveRecord& d : r.directives) {
            const PointingDirective& p = d.directive;
            w({{"scan", d.scan}, {"t", p.time}, {"track", p.track_id}, {"coasted", p.coasted},
               {"measurement", p.measurement}, {"angles", io::array(p.angles)},
               {"predicted", io::array(p.predicted)}, {"los", io::array(p.line_of_sight)},
               {"angle_cov_upper", {p.angle_cov(0, 0), p.angle_cov(0, 1), p.angle_cov(1, 1)}},
               {"true_angles", d.has_truth ? io::array(d.true_angles) : json(nullptr)}});
        }
    }
    {
        io::LineWriter w(dir / "events.jsonl");
        for (const EventRecord& e : r.events)
            w({{"scan", e.scan}, {"t", e.time}, {"kind", e.kind}, {"message", e.message}});
    }
}

/// RunLog as recorded in a replication directory.
inline RunLog read_run_log(const std::filesystem::path& dir) {
    RunLog log;
    io::read_lines(dir / "truth.jsonl", [&](const io::json& j) {
        if (j.at("id").get<int>() == 0) return;  // interceptor
        log.truth.push_back({j.at("scan").get<int>(), j.at("t").get<double>(), j.at("id").get<int>(),
                             io::vec<6>(j.at("state"))});
    });
    io::read_lines(dir / "tracks.jsonl", [&](const io::json& j) {
        log.tracks.push_back({j.at("scan").get<int>(), j.at("t").get<double>(), j.at("id").get<int>(),
                              io::status_from(j.at("status").get<std::string>()), io::vec<6>(j.at("mean")),
                              io::from_upper(j.at("cov_upper"))});
    });
    io::read_lines(dir / "assignments.jsonl", [&](const io::json& j) {
        AssignmentEntry a;
        a.scan = j.at("scan").get<int>();
        AssignmentRecord& x = a.record;
        x.time = j.at("t").get<double>();
        x.kind = j.at("kind").get<std::string>() == "rf" ? SensorKind::Rf : SensorKind::Ir;
        x.sensor = j.at("sensor").get<SensorId>();
        x.measurement = j.at("measurement").get<int>();
        x.origin = j.at("origin").get<int>();
        x.track = j.at("track").get<int>();
        x.new_track = j.at("new_track").get<bool>();
        const auto num = [&](const char* key) {
            return j.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(key).get<double>();
        };
        x.value = num("value");
        x.distance2 = num("distance2");
        log.assignments.push_back(a);
    });
    io::read_lines(dir / "cues.jsonl", [&](const io::json& j) {
        CueRecord c;
        c.id = j.at("id").get<int>();
        c.timestamp = j.at("t").get<double>();
        c.mean = io::vec<6>(j.at("mean"));
        c.cov = io::from_upper(j.at("cov_upper"));
        c.delivered = j.at("delivered").get<double>();
        c.source = j.at("source").get<std::string>();
        c.origin = j.at("origin").get<int>();
        c.scan = j.at("scan").get<int>();
        if (!j.at("track").is_null()) c.track = j.at("track").get<int>();
        c.trace_before = j.at("trace_before").get<double>();
        c.trace_after = j.at("trace_after").get<double>();
        log.cues.push_back(c);
    });
    return log;
}

// ---------------------------------------------------------------------------
// Metrics files
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"pos_rmse",    "vel_rmse",        "nees",
                                                "purity",      "association_accuracy", "cue_accuracy",
                                                "fusion_trace_ratio", "confirmed_count", "truth_count"};
    return names;
}

inline std::optional<double> metric_value(const RunMetrics& m, const std::string& name) {
    if (name == "pos_rmse") return m.pos_rmse;
    if (name == "vel_rmse") return m.vel_rmse;
    if (name == "nees") return m.nees;
    if (name == "purity") return m.purity;
    if (name == "association_accuracy") return m.association_accuracy;
    if (name == "cue_accuracy") return m.cue_accuracy;
    if (name == "fusion_trace_ratio") return m.fusion_trace_ratio;
    if (name == "confirmed_count") return m.confirmed_count;
    if (name == "truth_count") return m.truth_count;
    throw std::invalid_argument("unknown metric " + name);
}

struct AggregateMetric {
    std::string name;
    std::optional<double> mean, stderr_;
    int n = 0;
};

/// Mean and standard error across replications; replications without a
/// value (empty metrics) are skipped.
inline std::vector<AggregateMetric> aggregate(const std::vector<RunMetrics>& reps) {
    std::vector<AggregateMetric> out;
    for (const std::string& name : metric_names()) {
        AggregateMetric a;
        a.name = name;
        std::vector<double> v;
        for (const RunMetrics& m : reps)
            if (const auto x = metric_value(m, name)) v.push_back(*x);
        a.n = static_cast<int>(v.size());
        if (!v.empty()) {
            double sum = 0.0;
            for (double x : v) sum += x;
            a.mean = sum / a.n;
            if (a.n > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - *a.mean) * (x - *a.mean);
                a.stderr_ = std::sqrt(ss / (a.n - 1) / a.n);
            }
        }
        out.push_back(a);
    }
    return out;
}

inline std::string csv_number(std::optional<double> v) {
    if (!v || !std::isfinite(*v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

inline std::string csv_number(std::optional<int> v) { return v ? std::to_string(*v) : ""; }

inline constexpr const char* kMetricsHeader =
    "rep,seed,failed_scans,empty,truth_count,confirmed_count,pos_rmse,vel_rmse,nees,purity,"
    "association_accuracy,cue_accuracy,fusion_trace_ratio";
inline constexpr const char* kTracksHeader =
    "rep,track_id,truth_id,samples,pos_rmse,vel_rmse,nees,updates,purity,majority_origin";
inline constexpr const char* kAggregateHeader = "metric,mean,stderr,n";

struct RunSummary {
    std::string scenario;
    std::string filter;
    int reps = 0;
    std::uint64_t seed = 0;
    int burn_in = 10;
};

/// Recomputes metrics.csv, tracks.csv, aggregate.csv and summary.json from
/// the logs under `out`. Returns the number of failed replications.
inline int write_metrics(const std::filesystem::path& out) {
    using io::json;
    std::ifstream meta_in(out / "run.json");
    if (!meta_in) throw std::runtime_error("no run.json in " + out.string());
    json meta;
    meta_in >> meta;
    const int reps = meta.at("reps").get<int>();
    MetricsOptions opt;
    opt.burn_in_scans = meta.at("burn_in").get<int>();

    std::ofstream metrics(out / "metrics.csv"), tracks(out / "tracks.csv"), agg(out / "aggregate.csv");
    metrics << kMetricsHeader << '\n';
    tracks << kTracksHeader << '\n';
    std::vector<RunMetrics> all;
    int failed = 0;
    for (int rep = 0; rep < reps; ++rep) {
        const std::filesystem::path dir = out / io::rep_dir_name(rep);
        std::ifstream rin(dir / "run.json");
        if (!rin) throw std::runtime_error("missing " + (dir / "run.json").string());
        json rj;
        rin >> rj;
        const int failed_scans = rj.at("failed_scans").get<int>();
        if (failed_scans > 0) ++failed;
        const RunMetrics m = compute_metrics(read_run_log(dir), opt);
        all.push_back(m);
        metrics << rep << ',' << rj.at("seed").get<std::uint64_t>() << ',' << failed_scans << ','
                << (m.empty ? 1 : 0) << ',' << m.truth_count << ',' << m.confirmed_count << ','
                << csv_number(m.pos_rmse) << ',' << csv_number(m.vel_rmse) << ',' << csv_number(m.nees) << ','
                << csv_number(m.purity) << ',' << csv_number(m.association_accuracy) << ','
                << csv_number(m.cue_accuracy) << ',' << csv_number(m.fusion_trace_ratio) << '\n';
        for (const TrackMetrics& t : m.tracks)
            tracks << rep << ',' << t.track_id << ',' << csv_number(t.truth_id) << ',' << t.samples << ','
                   << csv_number(t.pos_rmse) << ',' << csv_number(t.vel_rmse) << ',' << csv_number(t.nees) << ','
                   << t.updates << ',' << csv_number(t.purity) << ',' << t.majority_origin << '\n';
    }
    const std::vector<AggregateMetric> a = aggregate(all);
    agg << kAggregateHeader << '\n';
    json summary = meta;
    summary["failed_reps"] = failed;
    json aj = json::object();
    for (const AggregateMetric& x : a) {
        agg << x.name << ',' << csv_number(x.mean) << ',' << csv_number(x.stderr_) << ',' << x.n << '\n';
        aj[x.name] = {{"mean", x.mean ? json(*x.mean) : json(nullptr)},
                      {"stderr", x.stderr_ ? json(*x.stderr_) : json(nullptr)},
                      {"n", x.n}};
    }
    summary["aggregate"] = aj;
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
    return failed;
}

struct RunOptions {
    std::filesystem::path out;
    int reps = 1;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string scenario_path;  ///< recorded in run.json
};

/// Runs every replication (in parallel up to `jobs`), writes the logs and
/// then the metrics files. Returns the number of failed replications.
inline int run_all(const ScenarioFile& f, const RunOptions& opt) {
    if (opt.reps < 1) throw ConfigError("reps", "must be >= 1");
    if (opt.jobs < 1) throw ConfigError("jobs", "must be >= 1");
    std::filesystem::create_directories(opt.out);
    {
        const io::json meta{{"scenario", opt.scenario_path},
                            {"filter", to_string(f.tracker.filter.kind)},
                            {"fusion", to_string(f.tracker.fusion)},
                            {"reps", opt.reps},
                            {"seed", opt.seed},
                            {"burn_in", f.tracker.metrics.burn_in_scans}};
        std::ofstream(opt.out / "run.json") << meta.dump(2) << '\n';
    }
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::string error;
    auto worker = [&] {
        for (int rep = next++; rep < opt.reps; rep = next++) {
            try {
                const ReplicationResult r = run_replication(f, rep, opt.seed);
                write_replication_logs(r, opt.out / io::rep_dir_name(rep));
            } catch (const std::exception& e) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (error.empty()) error = "replication " + std::to_string(rep) + ": " + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < std::min(opt.jobs, opt.reps); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!error.empty()) throw std::runtime_error(error);
    return write_metrics(opt.out);
}

}  // namespace bmd
