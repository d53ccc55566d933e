#include "bmdtrack/metrics.hpp"

#include <gtest/gtest.h>

namespace bmd {
namespace {

Vec6 truth_state(int id, int k) {
    Vec6 x;
    x << 7e6 + 1e4 * id, 1e3 * k, 0, 0, 1e3, 0;
    return x;
}

void add_truth(RunLog& log, int id, int scans) {
    for (int k = 0; k < scans; ++k) log.truth.push_back({k, double(k), id, truth_state(id, k)});
}

void add_sample(RunLog& log, int k, int id, const Vec6& mean, TrackStatus st = TrackStatus::Confirmed) {
    log.tracks.push_back({k, double(k), id, st, mean, Mat6::Identity()});
}

void add_update(RunLog& log, int k, int track, int origin) {
    AssignmentRecord r;
    r.time = k;
    r.track = track;
    r.origin = origin;
    log.assignments.push_back({k, r});
}

TEST(ComputeMetrics, PerfectTrackHasZeroError) {
    RunLog log;
    add_truth(log, 1, 20);
    for (int k = 0; k < 20; ++k) {
        add_sample(log, k, 7, truth_state(1, k));
        add_update(log, k, 7, 1);
    }
    const RunMetrics m = compute_metrics(log);
    ASSERT_FALSE(m.empty);
    EXPECT_EQ(*m.pos_rmse, 0.0);
    EXPECT_EQ(*m.vel_rmse, 0.0);
    EXPECT_EQ(*m.nees, 0.0);
    EXPECT_EQ(*m.purity, 1.0);
    EXPECT_EQ(*m.association_accuracy, 1.0);
    EXPECT_EQ(m.truth_count, 1);
    EXPECT_EQ(m.confirmed_count, 1);
    ASSERT_EQ(m.tracks.size(), 1u);
    EXPECT_EQ(m.tracks[0].truth_id, 1);
    EXPECT_EQ(m.tracks[0].samples, 10);
}

TEST(ComputeMetrics, HandBuiltErrors) {
    RunLog log;
    add_truth(log, 1, 3);
    const double err[3] = {1.0, 2.0, 2.0};
    for (int k = 0; k < 3; ++k) {
        Vec6 x = truth_state(1, k);
        x(1) += err[k];
        add_sample(log, k, 1, x);
    }
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_NEAR(*m.pos_rmse, std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(*m.nees, 3.0, 1e-12);  // identity covariance
    EXPECT_FALSE(m.purity.has_value());  // no updates logged
}

TEST(ComputeMetrics, SwappedTracksLosePurity) {
    RunLog log;
    add_truth(log, 1, 10);
    add_truth(log, 2, 10);
    // tracks follow their truth but swap measurement sources for the last 4 scans
    for (int k = 0; k < 10; ++k) {
        add_sample(log, k, 10, truth_state(1, k));
        add_sample(log, k, 20, truth_state(2, k));
        const bool swapped = k >= 6;
        add_update(log, k, 10, swapped ? 2 : 1);
        add_update(log, k, 20, swapped ? 1 : 2);
    }
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_NEAR(*m.purity, 0.6, 1e-12);
    EXPECT_NEAR(*m.association_accuracy, 0.6, 1e-12);
    EXPECT_EQ(m.tracks[0].majority_origin, 1);
    EXPECT_EQ(m.tracks[1].majority_origin, 2);
}

TEST(ComputeMetrics, NoConfirmedTracksIsEmpty) {
    RunLog log;
    add_truth(log, 1, 5);
    for (int k = 0; k < 5; ++k) add_sample(log, k, 3, truth_state(1, k), TrackStatus::Tentative);
    const RunMetrics m = compute_metrics(log);
    EXPECT_TRUE(m.empty);
    EXPECT_FALSE(m.pos_rmse.has_value());
    EXPECT_FALSE(m.purity.has_value());
    EXPECT_EQ(m.confirmed_count, 0);
    EXPECT_EQ(m.truth_count, 1);
}

TEST(ComputeMetrics, TentativeUpdatesExcludedFromPurity) {
    RunLog log;
    add_truth(log, 1, 4);
    for (int k = 0; k < 4; ++k) {
        add_sample(log, k, 1, truth_state(1, k), k < 2 ? TrackStatus::Tentative : TrackStatus::Confirmed);
        add_update(log, k, 1, k < 2 ? kFalseAlarm : 1);
    }
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_EQ(*m.purity, 1.0);
    EXPECT_EQ(m.tracks[0].updates, 2);
}

TEST(ComputeMetrics, PairingPrefersGlobalAssignment) {
    RunLog log;
    log.truth.push_back({0, 0.0, 1, Vec6::Zero()});
    Vec6 t2 = Vec6::Zero();
    t2(0) = 3.0;
    log.truth.push_back({0, 0.0, 2, t2});
    Vec6 a = Vec6::Zero();
    a(0) = 1.0;
    Vec6 b = Vec6::Zero();
    b(0) = -2.0;
    add_sample(log, 0, 100, a);
    add_sample(log, 0, 200, b);
    // distances: A-1 = 1, A-2 = 2, B-1 = 2, B-2 = 5; greedy (A,1),(B,2)=6 vs swap 4
    const RunMetrics m = compute_metrics(log, {0});
    ASSERT_EQ(m.tracks.size(), 2u);
    EXPECT_EQ(m.tracks[0].truth_id, 2);
    EXPECT_EQ(m.tracks[1].truth_id, 1);
}

TEST(ComputeMetrics, ExtraTrackIsUnpaired) {
    RunLog log;
    add_truth(log, 1, 3);
    for (int k = 0; k < 3; ++k) {
        add_sample(log, k, 1, truth_state(1, k));
        Vec6 far = truth_state(1, k);
        far(0) += 1e5;
        add_sample(log, k, 2, far);
    }
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_EQ(m.tracks[0].truth_id, 1);
    EXPECT_FALSE(m.tracks[1].truth_id.has_value());
    EXPECT_EQ(*m.pos_rmse, 0.0);
    EXPECT_EQ(m.confirmed_count, 2);
}

TEST(ComputeMetrics, CueAccuracyAndTraceRatio) {
    RunLog log;
    add_truth(log, 1, 3);
    add_truth(log, 2, 3);
    for (int k = 0; k < 3; ++k) {
        add_sample(log, k, 1, truth_state(1, k));
        add_sample(log, k, 2, truth_state(2, k));
        add_update(log, k, 1, 1);
        add_update(log, k, 2, 2);
    }
    CueRecord good;
    good.scan = 1;
    good.origin = 1;
    good.track = 1;
    good.trace_before = 4.0;
    good.trace_after = 1.0;
    CueRecord wrong = good;
    wrong.track = 2;
    wrong.trace_after = 2.0;
    CueRecord unknown;  // no track follows object 9, refusing is correct
    unknown.scan = 1;
    unknown.origin = 9;
    CueRecord refused = unknown;  // object 2 has a track
    refused.origin = 2;
    log.cues = {good, wrong, unknown, refused};
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_NEAR(*m.cue_accuracy, 2.0 / 4.0, 1e-12);
    EXPECT_NEAR(*m.fusion_trace_ratio, (0.25 + 0.5) / 2.0, 1e-12);
}

TEST(ComputeMetrics, CueJudgedByTheTrackFollowingTheObjectThen) {
    RunLog log;
    add_truth(log, 1, 10);
    // track 1 follows object 1 until scan 7, then a one-scan replacement takes over
    for (int k = 0; k < 10; ++k) {
        if (k <= 7) {
            add_sample(log, k, 1, truth_state(1, k));
            add_update(log, k, 1, 1);
        }
        if (k == 9) {
            add_sample(log, k, 5, truth_state(1, k));
            add_update(log, k, 5, 1);
        }
    }
    CueRecord early;
    early.scan = 4;
    early.origin = 1;
    early.track = 1;
    early.trace_before = early.trace_after = 1.0;
    CueRecord gap = early;  // nothing follows object 1 at scan 8
    gap.scan = 8;
    gap.track.reset();
    CueRecord late = early;
    late.scan = 9;
    late.track = 5;
    log.cues = {early, gap, late};
    const RunMetrics m = compute_metrics(log, {0});
    EXPECT_EQ(*m.cue_accuracy, 1.0);
}

}  // namespace
}  // namespace bmd
