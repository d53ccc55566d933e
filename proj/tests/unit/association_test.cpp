#include "bmdtrack/association.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

namespace bmd {
namespace {

const GeodeticSite kSite{0.5, 0.3, 20.0};

Vec6 target_state(const Vec3& enu_offset, double t = 0.0) {
    Vec6 enu;
    enu << Vec3(1.5e5, 2.5e5, 3.0e5) + enu_offset, -1200.0, -2500.0, 800.0;
    return state_transform(EnuFrame{kSite}, EciFrame{}, t).apply(enu);
}

Mat6 track_cov() {
    Mat6 p = Mat6::Zero();
    p.diagonal() << 400, 400, 400, 25, 25, 25;
    return p;
}

RfMeasurement rf_of(const Vec6& x, double t, int origin = 0, SensorId sensor = 1) {
    RfMeasurement z;
    z.site = kSite;
    z.timestamp = t;
    z.sensor_id = sensor;
    z.origin = origin;
    z.noise_cov = Eigen::Vector3d(25.0, 1e-6, 1e-6).asDiagonal();
    z.z = h_rf(state_transform(EciFrame{}, EnuFrame{kSite}, t).apply_position(x.head<3>()));
    return z;
}

BodyFrame seeker_body(const Vec3& look_at) {
    BodyFrame b;
    b.origin_position = look_at - Vec3(3e4, 1e4, -5e3);
    b.attitude = Attitude::from_boresight(look_at - b.origin_position, -b.origin_position);
    return b;
}

IrMeasurement ir_of(const Vec6& x, double t, const BodyFrame& body, int origin = 0) {
    IrMeasurement z;
    z.timestamp = t;
    z.sensor_id = 100;
    z.origin = origin;
    z.body = body;
    z.noise_cov = Eigen::Vector2d(0.25e-6, 0.25e-6).asDiagonal();
    z.z = h_ir(state_transform(EciFrame{}, body, t).apply_position(x.head<3>()));
    return z;
}

Track make_track(int id, const Vec6& x, double t = 0.0) {
    Track tr;
    tr.id = id;
    tr.estimate = {x, track_cov(), t};
    return tr;
}

// Closed-form chi-square CDFs for 2 and 3 degrees of freedom.
double chi2_cdf2(double x) { return 1.0 - std::exp(-x / 2.0); }
double chi2_cdf3(double x) {
    return std::erf(std::sqrt(x / 2.0)) - std::sqrt(2.0 * x / kPi) * std::exp(-x / 2.0);
}

// Hit increment for zero clutter: ln P_D + ln(c_M gamma^(M/2)) - (M/2) ln(2 pi) - d^2 / 2.
double hit_oracle(int dof, double pd, double gamma, double d2) {
    const double c = dof == 3 ? 4.0 * kPi / 3.0 : kPi;
    return std::log(pd) + std::log(c) + 0.5 * dof * std::log(gamma) - 0.5 * dof * std::log(2 * kPi) -
           0.5 * d2;
}

// ---------------------------------------------------------------------------

TEST(Gate, ThresholdsMatchClosedFormCdf) {
    EXPECT_NEAR(chi2_cdf3(chi2_gate_threshold(3, 0.997)), 0.997, 1e-12);
    EXPECT_NEAR(chi2_cdf2(chi2_gate_threshold(2, 0.997)), 0.997, 1e-12);
    EXPECT_NEAR(chi2_gate_threshold(2, 0.997), -2.0 * std::log(0.003), 1e-9);
    EXPECT_THROW(chi2_gate_threshold(3, 1.0), std::invalid_argument);
}

TEST(Gate, ZeroResidualPasses) {
    Innovation<3> in;
    in.cov = 4.0 * Mat3::Identity();
    const GateResult g = gate(in, chi2_gate_threshold(3, 0.997));
    EXPECT_TRUE(g.pass);
    EXPECT_EQ(g.distance2, 0.0);
    EXPECT_NEAR(g.log_det_s, 3 * std::log(4.0), 1e-12);
}

TEST(Gate, ThreeSigmaScalarBoundary) {
    const double threshold = chi2_gate_threshold(1, std::erf(3.0 / std::sqrt(2.0)));
    EXPECT_NEAR(threshold, 9.0, 1e-9);
    EXPECT_NEAR(chi2_gate_threshold(1, 0.9973), 9.0, 1e-3);
    Innovation<1> in;
    in.residual << 3.0;
    in.cov << 1.0;
    const GateResult g = gate(in, 9.0);
    EXPECT_DOUBLE_EQ(g.distance2, 9.0);
    EXPECT_TRUE(g.pass);
}

TEST(Gate, FarResidualFails) {
    Innovation<3> in;
    in.residual << 10, 10, 10;
    const GateResult g = gate(in, chi2_gate_threshold(3, 0.997));
    EXPECT_DOUBLE_EQ(g.distance2, 300.0);
    EXPECT_FALSE(g.pass);
}

TEST(Gate, SingularCovarianceFailsWithDiagnostic) {
    Innovation<2> in;
    in.cov.setZero();
    const GateResult g = gate(in, 10.0);
    EXPECT_FALSE(g.pass);
    EXPECT_FALSE(g.diagnostic.empty());
}

TEST(AssociationMatrix, SingleTrackOnTopOfMeasurement) {
    const Vec6 x = target_state(Vec3::Zero());
    const std::vector<Track> tracks{make_track(1, x)};
    const auto sp = build_association_matrix(std::vector{rf_of(x, 0.0)}, tracks, {}, {}, true);
    ASSERT_EQ(sp.problem.values.rows(), 1);
    ASSERT_EQ(sp.problem.values.cols(), 2);
    EXPECT_GT(sp.problem.values(0, 0), sp.problem.values(0, 1));
    EXPECT_EQ(sp.problem.values(0, 1), sp.problem.new_track_value[0]);
}

TEST(AssociationMatrix, NoTracks) {
    const auto sp = build_association_matrix(std::vector{rf_of(target_state(Vec3::Zero()), 0.0)},
                                             std::vector<Track>{}, {}, {}, true);
    ASSERT_EQ(sp.problem.values.rows(), 1);
    ASSERT_EQ(sp.problem.values.cols(), 1);
    EXPECT_EQ(sp.problem.values(0, 0), sp.problem.new_track_value[0]);
}

TEST(AssociationMatrix, ShapeAndEntries) {
    std::vector<Track> tracks{make_track(1, target_state(Vec3::Zero())),
                              make_track(2, target_state(Vec3(5e3, 0, 0)))};
    std::vector<RfMeasurement> zs{rf_of(target_state(Vec3(10, -20, 5)), 0.0),
                                  rf_of(target_state(Vec3(5e3 + 30, 0, 0)), 0.0),
                                  rf_of(target_state(Vec3(9e4, 0, 0)), 0.0)};
    AssociationConfig acfg;
    acfg.pd_rf = 0.9;
    const auto sp = build_association_matrix(zs, tracks, {}, acfg, true);
    const auto& v = sp.problem.values;
    ASSERT_EQ(v.rows(), 3);
    ASSERT_EQ(v.cols(), 5);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            if (i == k) EXPECT_EQ(v(i, 2 + k), sp.problem.new_track_value[i]);
            else EXPECT_EQ(v(i, 2 + k), kForbidden);
        }
    // independent value for (0, 0): EKF S = H P H' + R
    const StateTransform t = state_transform(EciFrame{}, EnuFrame{kSite}, 0.0);
    const Vec3 p = t.apply_position(tracks[0].estimate.mean.head<3>());
    const Eigen::Matrix<double, 3, 6> h = h_rf_jacobian(p) * t.matrix();
    const Mat3 s = h * track_cov() * h.transpose() + zs[0].noise_cov;
    Vec3 nu = zs[0].z - h_rf(p);
    nu(1) = wrap_angle(nu(1));
    const double d2 = nu.dot(s.inverse() * nu);
    const double expected = std::log(0.9) - 0.5 * d2 - 0.5 * std::log((2 * kPi * s).determinant());
    EXPECT_NEAR(v(0, 0), expected, 1e-9 * std::abs(expected));
    // the far measurement gates with nothing
    EXPECT_EQ(v(2, 0), kForbidden);
    EXPECT_EQ(v(2, 1), kForbidden);
    EXPECT_FALSE(sp.problem.gate_mask(2, 0));
    EXPECT_TRUE(sp.problem.gate_mask(0, 0));
    // 5 km apart with ~20 m sigma: cross entries are out of gate
    EXPECT_EQ(v(0, 1), kForbidden);
}

TEST(AssociationMatrix, DistantMeasurementPrefersNewTrack) {
    const Vec6 x = target_state(Vec3::Zero());
    const std::vector<Track> tracks{make_track(1, x)};
    // push the measurement ~3.6 sigma along the range axis (S_rr ~ 400 + 25)
    const double sigma = std::sqrt(425.0);
    RfMeasurement near = rf_of(x, 0.0), far = rf_of(x, 0.0);
    near.z(0) += 3.0 * sigma;
    far.z(0) += 3.6 * sigma;
    const auto a = build_association_matrix(std::vector{near}, tracks, {}, {}, true);
    const auto b = build_association_matrix(std::vector{far}, tracks, {}, {}, true);
    ASSERT_TRUE(b.problem.gate_mask(0, 0));
    EXPECT_EQ(solve_association(a.problem).target[0], 0);
    EXPECT_EQ(solve_association(b.problem).target[0], kNewTrack);
}

TEST(AssociationMatrix, ConfiguredNewTrackDensity) {
    AssociationConfig acfg;
    acfg.new_track_density = 1e-9;
    const auto sp = build_association_matrix(std::vector{rf_of(target_state(Vec3::Zero()), 0.0)},
                                             std::vector<Track>{}, {}, acfg, true);
    EXPECT_DOUBLE_EQ(sp.problem.values(0, 0), std::log(1e-9));
}

TEST(InitiateFromRf, PositionAndCovariance) {
    const Vec6 x = target_state(Vec3::Zero(), 12.0);
    const RfMeasurement z = rf_of(x, 12.0);
    const StateEstimate e = initiate_from_rf(z, 3000.0);
    EXPECT_LT((e.mean.head<3>() - x.head<3>()).norm(), 1e-6);
    EXPECT_TRUE(e.mean.tail<3>().isZero(0.0));
    EXPECT_DOUBLE_EQ(e.epoch, 12.0);
    EXPECT_GT(min_eigenvalue(e.cov), 0.0);
    EXPECT_DOUBLE_EQ(e.cov(3, 3), 9e6);
    // range variance maps along the line of sight
    const Vec3 los = (x.head<3>() - state_transform(EnuFrame{kSite}, EciFrame{}, 12.0).apply_position(Vec3::Zero())).normalized();
    EXPECT_NEAR(los.dot(e.cov.topLeftCorner<3, 3>() * los), 25.0, 1e-6);
}

FilterConfig rk4_config() {
    FilterConfig c;
    c.propagation.integrator = Integrator::Rk4;
    return c;
}

TEST(TwoPointInitiate, NoiseFreeArcRecoversState) {
    const FilterConfig cfg = rk4_config();
    const Vec6 x0 = target_state(Vec3::Zero());
    const Vec6 x1 = propagate(x0, 4.0, cfg.propagation, cfg.constants);
    const StateEstimate seed = initiate_from_rf(rf_of(x0, 0.0), 3000.0);
    const StateEstimate e = two_point_initiate(seed, rf_of(x1, 4.0), cfg);
    EXPECT_DOUBLE_EQ(e.epoch, 4.0);
    EXPECT_LT((e.mean.head<3>() - x1.head<3>()).norm(), 1e-6);
    EXPECT_LT((e.mean.tail<3>() - x1.tail<3>()).norm(), 1e-3);  // round-off in both fixes over 4 s
    EXPECT_GT(min_eigenvalue(e.cov), 0.0);
}

TEST(TwoPointInitiate, CovarianceMatchesMonteCarlo) {
    const FilterConfig cfg = rk4_config();
    const Vec6 x0 = target_state(Vec3::Zero());
    const Vec6 x1 = propagate(x0, 4.0, cfg.propagation, cfg.constants);
    const RfMeasurement z0 = rf_of(x0, 0.0), z1 = rf_of(x1, 4.0);
    const Mat3 l = z0.noise_cov.llt().matrixL();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    const int runs = 4000;
    Mat6 sample = Mat6::Zero();
    Mat6 predicted = Mat6::Zero();
    for (int k = 0; k < runs; ++k) {
        RfMeasurement a = z0, b = z1;
        a.z += l * Vec3(n01(rng), n01(rng), n01(rng));
        b.z += l * Vec3(n01(rng), n01(rng), n01(rng));
        const StateEstimate e = two_point_initiate(initiate_from_rf(a, 3000.0), b, cfg);
        const Vec6 d = e.mean - x1;
        sample += d * d.transpose();
        predicted += e.cov;
    }
    sample /= runs;
    predicted /= runs;
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(sample(i, i) / predicted(i, i), 1.0, 0.1) << i;
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

TEST(ScanSingleSensor, EmptyScanDecreasesScores) {
    TrackFile file;
    file.tracks = {make_track(1, target_state(Vec3::Zero())), make_track(2, target_state(Vec3(1e4, 0, 0)))};
    file.tracks[0].score_rf = 8.0;
    file.tracks[1].score_rf = 3.0;
    const auto before = file.tracks;
    scan_single_sensor(file, {}, {}, {});
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(file.tracks[k].score(), before[k].score() + std::log(0.05), 1e-12);
        EXPECT_EQ(file.tracks[k].estimate.mean, before[k].estimate.mean);
        EXPECT_EQ(file.tracks[k].misses, 1);
    }
}

TEST(ScanSingleSensor, ConfirmsAtScoreCrossing) {
    const FilterConfig fcfg;
    const AssociationConfig acfg;
    const double gamma = chi2_gate_threshold(3, acfg.gate_probability);
    TrackFile file;
    Vec6 truth = target_state(Vec3::Zero());
    double expected = 0.0;
    bool confirmed = false;
    for (int scan = 0; scan < 5; ++scan) {
        const double t = scan;
        if (scan > 0) truth = propagate(truth, 1.0, {Integrator::Rk4, 0.1});
        ScanReport pr;
        predict_tracks(file, t, fcfg, pr);
        const ScanReport r = scan_single_sensor(file, {rf_of(truth, t)}, fcfg, acfg);
        ASSERT_EQ(file.tracks.size(), 1u);
        ASSERT_EQ(r.assignments.size(), 1u);
        if (scan == 0) {
            EXPECT_TRUE(r.assignments[0].new_track);
            continue;
        }
        EXPECT_EQ(r.assignments[0].track, file.tracks[0].id);
        expected += hit_oracle(3, acfg.pd_rf, gamma, r.assignments[0].distance2);
        EXPECT_NEAR(file.tracks[0].score(), expected, 1e-9);
        const bool should = expected >= acfg.confirm_score;
        EXPECT_EQ(file.tracks[0].status == TrackStatus::Confirmed, should || confirmed) << "scan " << scan;
        if (should && !confirmed) EXPECT_EQ(r.confirmed, std::vector<int>{file.tracks[0].id});
        confirmed = confirmed || should;
    }
    EXPECT_TRUE(confirmed);
}

TEST(ScanSingleSensor, DeletedAfterMissBudget) {
    AssociationConfig acfg;
    acfg.delete_score = -1e9;  // isolate the miss budget
    TrackFile file;
    file.tracks = {make_track(1, target_state(Vec3::Zero()))};
    file.tracks[0].status = TrackStatus::Confirmed;
    for (int k = 0; k <= acfg.max_consecutive_misses; ++k) {
        EXPECT_TRUE(file.tracks[0].alive()) << k;
        scan_single_sensor(file, {}, {}, acfg);
    }
    EXPECT_EQ(file.tracks[0].status, TrackStatus::Deleted);
}

TEST(ScanSingleSensor, MonotoneScoreWithCloseMeasurements) {
    const FilterConfig fcfg;
    const AssociationConfig acfg;
    TrackFile file;
    file.tracks = {make_track(1, target_state(Vec3::Zero()))};
    double last = file.tracks[0].score();
    for (int scan = 1; scan <= 6 && file.tracks[0].status == TrackStatus::Tentative; ++scan) {
        ScanReport pr;
        predict_tracks(file, scan, fcfg, pr);
        scan_single_sensor(file, {rf_of(file.tracks[0].estimate.mean, scan)}, fcfg, acfg);
        EXPECT_GE(file.tracks[0].score(), last);
        last = file.tracks[0].score();
    }
    EXPECT_EQ(file.tracks[0].status, TrackStatus::Confirmed);
}

TEST(ScanSingleSensor, UniqueAssignments) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 30.0);
    TrackFile file;
    for (int k = 0; k < 4; ++k) file.tracks.push_back(make_track(k + 1, target_state(Vec3(k * 60.0, 0, 0))));
    file.next_id = 5;
    std::vector<RfMeasurement> zs;
    for (int i = 0; i < 6; ++i) zs.push_back(rf_of(target_state(Vec3(i * 50.0 + n(rng), n(rng), n(rng))), 0.0, i));
    const ScanReport r = scan_single_sensor(file, zs, {}, {});
    std::set<int> seen;
    for (const auto& a : r.assignments) {
        ASSERT_NE(a.track, 0);
        EXPECT_TRUE(seen.insert(a.track).second) << "track " << a.track << " used twice";
    }
    EXPECT_EQ(r.assignments.size(), zs.size());
}

TEST(ScanMultiSensor, RfPlusIrShrinksMoreThanRfAlone) {
    const double t = 0.0;
    const Vec6 x = target_state(Vec3::Zero());
    const BodyFrame body = seeker_body(x.head<3>());
    TrackFile rf_only, both;
    rf_only.tracks = both.tracks = {make_track(1, x + Vec6::Constant(5.0))};
    scan_multi_sensor(rf_only, {rf_of(x, t)}, {}, std::nullopt, {}, {});
    scan_multi_sensor(both, {rf_of(x, t)}, {ir_of(x, t, body)}, SeekerView{body}, {}, {});
    EXPECT_LT(both.tracks[0].estimate.cov.trace(), rf_only.tracks[0].estimate.cov.trace());
    EXPECT_GT(both.tracks[0].score_ir, 0.0);
    EXPECT_GT(both.tracks[0].score_rf, 0.0);
}

TEST(ScanMultiSensor, IrOnlyScanDecaysRfScore) {
    const Vec6 x = target_state(Vec3::Zero());
    const BodyFrame body = seeker_body(x.head<3>());
    TrackFile file;
    file.tracks = {make_track(1, x)};
    const ScanReport r = scan_multi_sensor(file, {}, {ir_of(x, 0.0, body)}, SeekerView{body}, {}, {});
    EXPECT_NEAR(file.tracks[0].score_rf, std::log(0.05), 1e-12);
    EXPECT_GT(file.tracks[0].score_ir, 0.0);
    EXPECT_TRUE(r.spawned.empty());
}

TEST(ScanMultiSensor, IrMissOnlyInsideFieldOfView) {
    const Vec6 x = target_state(Vec3::Zero());
    const BodyFrame toward = seeker_body(x.head<3>());
    BodyFrame away = toward;
    away.attitude = Attitude::from_boresight(-(x.head<3>() - toward.origin_position), -toward.origin_position);
    TrackFile a, b;
    a.tracks = b.tracks = {make_track(1, x)};
    scan_multi_sensor(a, {rf_of(x, 0.0)}, {}, SeekerView{toward}, {}, {});
    scan_multi_sensor(b, {rf_of(x, 0.0)}, {}, SeekerView{away}, {}, {});
    EXPECT_NEAR(a.tracks[0].score_ir, std::log(0.05), 1e-12);
    EXPECT_EQ(b.tracks[0].score_ir, 0.0);
}

TEST(ScanMultiSensor, UnassignedRfStartsTrack) {
    TrackFile file;
    file.tracks = {make_track(1, target_state(Vec3::Zero()))};
    file.next_id = 2;
    const ScanReport r = scan_multi_sensor(
        file, {rf_of(target_state(Vec3::Zero()), 0.0), rf_of(target_state(Vec3(5e4, 0, 0)), 0.0, 1)}, {},
        std::nullopt, {}, {});
    ASSERT_EQ(r.spawned, std::vector<int>{2});
    EXPECT_EQ(file.tracks.size(), 2u);
    EXPECT_TRUE(r.assignments[1].new_track);
    EXPECT_EQ(r.assignments[0].track, 1);
}

// Exhaustive per-sensor oracle: most pairs, then largest total value.
std::vector<int> enumerate_best(const Eigen::MatrixXd& v) {
    const int m = static_cast<int>(v.rows()), n = static_cast<int>(v.cols());
    std::vector<int> best, cur(m, kUnassigned);
    int best_count = -1;
    double best_value = 0;
    std::function<void(int, int, double, unsigned)> rec = [&](int i, int count, double value, unsigned used) {
        if (i == m) {
            if (count > best_count || (count == best_count && value > best_value + 1e-9)) {
                best = cur;
                best_count = count;
                best_value = value;
            }
            return;
        }
        for (int j = 0; j < n; ++j) {
            if ((used >> j) & 1u || v(i, j) == kForbidden) continue;
            cur[i] = j;
            rec(i + 1, count + 1, value + v(i, j), used | (1u << j));
        }
        cur[i] = kUnassigned;
        rec(i + 1, count, value, used);
    };
    rec(0, 0, 0.0, 0u);
    return best;
}

TEST(ScanMultiSensor, CrossedGeometryMatchesEnumeration) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0, 1);
    const FilterConfig fcfg;
    const AssociationConfig acfg;
    for (int trial = 0; trial < 500; ++trial) {
        const Vec6 a = target_state(Vec3::Zero()), b = target_state(Vec3(20.0 * n(rng), 40.0, 20.0 * n(rng)));
        TrackFile file;
        file.tracks = {make_track(1, a), make_track(2, b)};
        file.next_id = 3;
        const BodyFrame body = seeker_body(a.head<3>());
        std::vector<RfMeasurement> rf;
        std::vector<IrMeasurement> ir;
        for (int k = 0; k < 2; ++k) {
            const Vec6& x = k == 0 ? a : b;
            RfMeasurement z = rf_of(x, 0.0, k);
            z.z += Vec3(8 * n(rng), 1e-4 * n(rng), 1e-4 * n(rng));
            rf.push_back(z);
            IrMeasurement w = ir_of(x, 0.0, body, k);
            w.z += Vec2(1e-3 * n(rng), 1e-3 * n(rng));
            ir.push_back(w);
        }
        // oracle: RF enumeration on predicted tracks, RF updates, then IR enumeration
        TrackFile copy = file;
        const auto rsp = build_association_matrix(rf, copy.tracks, fcfg, acfg, false);
        const std::vector<int> rbest = enumerate_best(rsp.problem.values);
        for (int i = 0; i < 2; ++i)
            if (rbest[i] != kUnassigned)
                copy.tracks[rbest[i]].estimate =
                    measurement_update(copy.tracks[rbest[i]].estimate, *rsp.innovation(i, rbest[i]), fcfg);
        const auto isp = build_association_matrix(ir, copy.tracks, fcfg, acfg, false);
        const std::vector<int> ibest = enumerate_best(isp.problem.values);

        const ScanReport r = scan_multi_sensor(file, rf, ir, SeekerView{body}, fcfg, acfg);
        ASSERT_EQ(r.assignments.size(), 4u);
        for (int i = 0; i < 2; ++i) {
            const auto& rr = r.assignments[i];
            if (rbest[i] == kUnassigned) EXPECT_TRUE(rr.new_track) << trial;
            else EXPECT_EQ(rr.track, rbest[i] + 1) << trial;
            const auto& ri = r.assignments[2 + i];
            EXPECT_EQ(ri.track, ibest[i] == kUnassigned ? 0 : ibest[i] + 1) << trial;
        }
    }
}

// ---------------------------------------------------------------------------
// Seeker pointing
// ---------------------------------------------------------------------------

TEST(SeekerPoint, CitesGatedMeasurement) {
    const Vec6 x = target_state(Vec3::Zero());
    const BodyFrame body = seeker_body(x.head<3>());
    std::vector<Track> tracks{make_track(1, x)};
    tracks[0].rv_flag = true;
    IrMeasurement z = ir_of(x, 0.0, body);
    z.z += Vec2(2e-4, -1e-4);
    const PointingDirective d = seeker_point(tracks, {z}, SeekerView{body}, 0.0, {}, {});
    EXPECT_FALSE(d.coasted);
    EXPECT_EQ(d.measurement, 0);
    EXPECT_EQ(d.angles, z.z);
    const Vec3 los_body = body.attitude.eci_to_body() * d.line_of_sight;
    EXPECT_LT((h_ir(los_body) - z.z).norm(), 1e-12);
}

TEST(SeekerPoint, CoastsWithoutReturn) {
    const Vec6 x0 = target_state(Vec3::Zero());
    const FilterConfig fcfg;
    std::vector<Track> tracks{make_track(1, x0)};
    tracks[0].rv_flag = true;
    tracks[0].estimate = time_update(tracks[0].estimate, 2.0, fcfg);
    const BodyFrame body = seeker_body(tracks[0].estimate.mean.head<3>());
    const PointingDirective d = seeker_point(tracks, {}, SeekerView{body}, 2.0, fcfg, {});
    EXPECT_TRUE(d.coasted);
    EXPECT_EQ(d.measurement, -1);
    const Vec3 p = state_transform(EciFrame{}, body, 2.0).apply_position(tracks[0].estimate.mean.head<3>());
    EXPECT_LT((d.angles - h_ir(p)).norm(), 1e-12);
    EXPECT_EQ(d.predicted, d.angles);
    EXPECT_GT(d.angle_cov.determinant(), 0.0);
}

TEST(SeekerPoint, PairsRvWithGatedReturnOnly) {
    const Vec6 rv = target_state(Vec3::Zero());
    const Vec6 decoy = target_state(Vec3(3e3, 0, 0));
    const BodyFrame body = seeker_body(rv.head<3>());
    std::vector<Track> tracks{make_track(1, decoy), make_track(2, rv)};
    tracks[1].rv_flag = true;
    // a return far from everything, listed first, then the RV return
    IrMeasurement stray = ir_of(target_state(Vec3(0, 2e4, 0)), 0.0, body, kFalseAlarm);
    IrMeasurement good = ir_of(rv, 0.0, body, 0);
    const PointingDirective d = seeker_point(tracks, {stray, good}, SeekerView{body}, 0.0, {}, {});
    EXPECT_FALSE(d.coasted);
    EXPECT_EQ(d.measurement, 1);
    EXPECT_EQ(d.track_id, 2);
}

TEST(SeekerPoint, RequiresExactlyOneRvTrack) {
    const Vec6 x = target_state(Vec3::Zero());
    const BodyFrame body = seeker_body(x.head<3>());
    std::vector<Track> tracks{make_track(1, x), make_track(2, x)};
    EXPECT_THROW(seeker_point(tracks, {}, SeekerView{body}, 0.0, {}, {}), std::invalid_argument);
    tracks[0].rv_flag = tracks[1].rv_flag = true;
    EXPECT_THROW(seeker_point(tracks, {}, SeekerView{body}, 0.0, {}, {}), std::invalid_argument);
}

}  // namespace
}  // namespace bmd
