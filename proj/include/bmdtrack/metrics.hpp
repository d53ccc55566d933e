#pragma once

// Run logs and the metrics computed from them. Metrics are pure functions of
// the logged histories so they can be recomputed offline.

#include "bmdtrack/association.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bmd {

struct TruthSample {
    int scan = 0;
    double time = 0.0;
    int id = 0;
    Vec6 state = Vec6::Zero();
};

/// Track state after a scan has been processed (and any cue fused).
struct TrackSample {
    int scan = 0;
    double time = 0.0;
    int id = 0;
    TrackStatus status = TrackStatus::Tentative;
    Vec6 mean = Vec6::Zero();
    Mat6 cov = Mat6::Identity();
};

struct AssignmentEntry {
    int scan = 0;
    AssignmentRecord record;
};

struct CueRecord {
    int id = 0;
    int scan = 0;  ///< scan at which the cue was ingested
    double timestamp = 0.0;
    double delivered = 0.0;
    std::string source;
    int origin = kFalseAlarm;
    Vec6 mean = Vec6::Zero();
    Mat6 cov = Mat6::Identity();
    std::optional<int> track;
    double trace_before = 0.0;
    double trace_after = 0.0;
};

struct RunLog {
    std::vector<TruthSample> truth;
    std::vector<TrackSample> tracks;
    std::vector<AssignmentEntry> assignments;
    std::vector<CueRecord> cues;
};

struct MetricsOptions {
    int burn_in_scans = 10;  ///< RMSE and NEES use scans >= this index
};

struct TrackMetrics {
    int track_id = 0;
    std::optional<int> truth_id;
    int samples = 0;  ///< confirmed samples after burn-in against the paired truth
    std::optional<double> pos_rmse, vel_rmse, nees;
    int updates = 0;  ///< measurement updates while confirmed
    std::optional<double> purity;
    int majority_origin = kFalseAlarm;
};

struct RunMetrics {
    bool empty = true;  ///< no confirmed tracks: the optional metrics are unset
    int truth_count = 0;
    int confirmed_count = 0;  ///< confirmed tracks alive at the final scan
    std::optional<double> pos_rmse, vel_rmse, nees;
    std::optional<double> purity, association_accuracy;
    std::optional<double> cue_accuracy, fusion_trace_ratio;
    std::vector<TrackMetrics> tracks;
};

namespace detail {

using PairCost = std::map<std::pair<int, int>, double>;  // (track, truth) -> mean distance

/// Greedy on mean distance, then pairwise swaps (including moves to unpaired
/// truths) while the total cost drops.
inline std::map<int, int> pair_tracks(const std::vector<int>& tracks, const std::vector<int>& truths,
                                      const PairCost& cost) {
    auto c = [&](int tr, int tt) {
        const auto it = cost.find({tr, tt});
        return it == cost.end() ? std::numeric_limits<double>::infinity() : it->second;
    };
    std::map<int, int> pairs;
    std::set<int> used_tracks, used_truths;
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        int bt = 0, bx = 0;
        for (int tr : tracks) {
            if (used_tracks.count(tr)) continue;
            for (int tt : truths) {
                if (used_truths.count(tt)) continue;
                if (c(tr, tt) < best) {
                    best = c(tr, tt);
                    bt = tr;
                    bx = tt;
                }
            }
        }
        if (!std::isfinite(best)) break;
        pairs[bt] = bx;
        used_tracks.insert(bt);
        used_truths.insert(bx);
    }
    for (bool improved = true; improved;) {
        improved = false;
        for (auto& [a, xa] : pairs) {
            for (auto& [b, xb] : pairs) {
                if (a >= b) continue;
                if (c(a, xb) + c(b, xa) < c(a, xa) + c(b, xb) - 1e-12) {
                    std::swap(xa, xb);
                    improved = true;
                }
            }
            for (int y : truths) {
                if (used_truths.count(y) || !(c(a, y) < c(a, xa) - 1e-12)) continue;
                used_truths.erase(xa);
                used_truths.insert(y);
                xa = y;
                improved = true;
            }
        }
    }
    return pairs;
}

inline std::optional<double> ratio(double num, double den) {
    if (den <= 0.0) return std::nullopt;
    return num / den;
}

}  // namespace detail

/// Tracks that were ever confirmed are paired one-to-one with truth objects
/// by minimum time-averaged position distance over their confirmed samples.
inline RunMetrics compute_metrics(const RunLog& log, const MetricsOptions& opt = {}) {
    RunMetrics m;
    std::map<std::pair<int, int>, const TruthSample*> truth_at;  // (scan, id)
    std::set<int> truth_ids;
    int last_scan = 0;
    for (const auto& s : log.truth) {
        truth_at[{s.scan, s.id}] = &s;
        truth_ids.insert(s.id);
        last_scan = std::max(last_scan, s.scan);
    }
    std::map<std::pair<int, int>, TrackStatus> status_at;  // (scan, track)
    std::set<int> confirmed_ids;
    for (const auto& s : log.tracks) {
        status_at[{s.scan, s.id}] = s.status;
        if (s.status == TrackStatus::Confirmed) confirmed_ids.insert(s.id);
        last_scan = std::max(last_scan, s.scan);
    }
    m.truth_count = static_cast<int>(truth_ids.size());
    for (const auto& s : log.tracks)
        if (s.scan == last_scan && s.status == TrackStatus::Confirmed) ++m.confirmed_count;
    if (confirmed_ids.empty()) return m;
    m.empty = false;

    // pairing
    std::map<std::pair<int, int>, std::pair<double, int>> acc;
    for (const auto& s : log.tracks) {
        if (s.status != TrackStatus::Confirmed) continue;
        for (int id : truth_ids) {
            const auto it = truth_at.find({s.scan, id});
            if (it == truth_at.end()) continue;
            auto& a = acc[{s.id, id}];
            a.first += (s.mean.head<3>() - it->second->state.head<3>()).norm();
            ++a.second;
        }
    }
    detail::PairCost cost;
    for (const auto& [key, a] : acc) cost[key] = a.first / a.second;
    const std::vector<int> tracks(confirmed_ids.begin(), confirmed_ids.end());
    const std::vector<int> truths(truth_ids.begin(), truth_ids.end());
    const std::map<int, int> pairs = detail::pair_tracks(tracks, truths, cost);

    std::map<int, TrackMetrics> per;
    for (int id : tracks) {
        per[id].track_id = id;
        if (const auto it = pairs.find(id); it != pairs.end()) per[id].truth_id = it->second;
    }

    // estimation errors
    struct Sums {
        double p = 0, v = 0, nees = 0;
        int n = 0;
    };
    Sums total;
    std::map<int, Sums> track_sums;
    for (const auto& s : log.tracks) {
        if (s.status != TrackStatus::Confirmed || s.scan < opt.burn_in_scans) continue;
        const auto pit = pairs.find(s.id);
        if (pit == pairs.end()) continue;
        const auto tit = truth_at.find({s.scan, pit->second});
        if (tit == truth_at.end()) continue;
        const Vec6& x = tit->second->state;
        const double p2 = (s.mean.head<3>() - x.head<3>()).squaredNorm();
        const double v2 = (s.mean.tail<3>() - x.tail<3>()).squaredNorm();
        const double e = nees({s.mean, s.cov, s.time}, x);
        for (Sums* sm : {&total, &track_sums[s.id]}) {
            sm->p += p2;
            sm->v += v2;
            sm->nees += e;
            ++sm->n;
        }
    }
    if (total.n > 0) {
        m.pos_rmse = std::sqrt(total.p / total.n);
        m.vel_rmse = std::sqrt(total.v / total.n);
        m.nees = total.nees / total.n;
    }
    for (const auto& [id, sm] : track_sums) {
        TrackMetrics& t = per[id];
        t.samples = sm.n;
        t.pos_rmse = std::sqrt(sm.p / sm.n);
        t.vel_rmse = std::sqrt(sm.v / sm.n);
        t.nees = sm.nees / sm.n;
    }

    // purity and association accuracy over updates made while confirmed
    std::map<int, std::map<int, int>> origins;  // track -> origin -> count
    int updates = 0, correct = 0;
    for (const auto& a : log.assignments) {
        const AssignmentRecord& r = a.record;
        if (r.track == 0 || r.new_track) continue;
        const auto st = status_at.find({a.scan, r.track});
        if (st == status_at.end() || st->second != TrackStatus::Confirmed) continue;
        ++origins[r.track][r.origin];
        ++updates;
        const auto pit = pairs.find(r.track);
        if (pit != pairs.end() && pit->second == r.origin) ++correct;
    }
    int majority_total = 0;
    for (const auto& [id, counts] : origins) {
        TrackMetrics& t = per[id];
        int best = 0, n = 0;
        for (const auto& [origin, c] : counts) {
            n += c;
            if (c > best) {
                best = c;
                t.majority_origin = origin;
            }
        }
        t.updates = n;
        t.purity = static_cast<double>(best) / n;
        majority_total += best;
    }
    m.purity = detail::ratio(majority_total, updates);
    m.association_accuracy = detail::ratio(correct, updates);

    // cues: a track holds a truth object while its latest update came from it;
    // the cue is correct when it went to a live holder of its origin, or was
    // refused when there is none
    std::map<int, std::vector<std::pair<int, int>>> history;  // track -> (scan, origin)
    for (const auto& a : log.assignments)
        if (a.record.track != 0) history[a.record.track].push_back({a.scan, a.record.origin});
    const auto holds = [&](int track, int scan, int origin) {
        const auto it = history.find(track);
        if (it == history.end() || !status_at.count({scan, track})) return false;
        const auto& h = it->second;
        const auto last = std::upper_bound(h.begin(), h.end(), std::pair{scan, std::numeric_limits<int>::max()});
        return last != h.begin() && std::prev(last)->second == origin;
    };
    int cue_correct = 0, accepted = 0;
    double trace_ratio = 0.0;
    for (const CueRecord& c : log.cues) {
        bool any_holder = false;
        for (const auto& [id, _] : history) any_holder = any_holder || holds(id, c.scan, c.origin);
        if (c.track ? holds(*c.track, c.scan, c.origin) : !any_holder) ++cue_correct;
        if (c.track) {
            ++accepted;
            trace_ratio += c.trace_after / c.trace_before;
        }
    }
    m.cue_accuracy = detail::ratio(cue_correct, static_cast<double>(log.cues.size()));
    m.fusion_trace_ratio = detail::ratio(trace_ratio, accepted);

    for (auto& [id, t] : per) m.tracks.push_back(t);
    return m;
}

}  // namespace bmd
