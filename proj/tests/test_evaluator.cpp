#include "adatrack/evaluator.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <thread>

namespace adatrack {
namespace {

// A genuinely static scene: one clean rendered frame repeated.
Video static_video(int length) {
    DomainSpec spec = domain_preset("source");
    spec.clutter_density = 0.0;
    spec.noise_std = 0.0;
    const Video base = generate_video(spec, 12, 2);
    Video v;
    v.id = "static";
    v.frames.assign(static_cast<std::size_t>(length), base.frames[0]);
    v.gt.assign(static_cast<std::size_t>(length), base.gt[0]);
    return v;
}

class StayTracker final : public Tracker {
public:
    std::string name() const override { return "stay"; }
    void init(const Video&, const BBox& g0) override { box_ = g0; }
    BBox step(const Frame&, const Frame&, const BBox&, int) override { return box_; }

private:
    BBox box_;
};

class SleepyTracker final : public Tracker {
public:
    explicit SleepyTracker(int millis) : millis_(millis) {}
    std::string name() const override { return "sleepy"; }
    void init(const Video&, const BBox& g0) override { box_ = g0; }
    BBox step(const Frame&, const Frame&, const BBox&, int) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(millis_));
        return box_;
    }

private:
    int millis_;
    BBox box_;
};

TrackRun make_run(const std::vector<BBox>& preds) {
    TrackRun run;
    run.video_id = "synthetic";
    run.preds = preds;
    run.step_seconds.assign(preds.size() - 1, 0.001);
    return run;
}

TEST(RunOpeTest, OracleTrackerReproducesGroundTruth) {
    const Video v = generate_video(domain_preset("source"), 3, 30);
    TeacherTracker oracle(oracle_teacher(), "source", 5);
    const TrackRun run = run_ope(oracle, v);
    ASSERT_EQ(run.preds.size(), v.gt.size());
    for (std::size_t t = 0; t < v.gt.size(); ++t) EXPECT_EQ(run.preds[t], v.gt[t]);
    const Metrics m = evaluate_run(run, v.gt);
    EXPECT_DOUBLE_EQ(m.ss, 1.0);
    EXPECT_DOUBLE_EQ(m.ps, 1.0);
}

TEST(RunOpeTest, StayTrackerIsPerfectOnStaticTargets) {
    const Video v = static_video(20);
    StayTracker stay;
    const TrackRun run = run_ope(stay, v);
    const Metrics m = evaluate_run(run, v.gt);
    EXPECT_DOUBLE_EQ(m.ss, 1.0);
    EXPECT_DOUBLE_EQ(m.ps, 1.0);
}

TEST(RunOpeTest, FreshStudentHoldsInitialBox) {
    Architecture arch;
    arch.patch = 16;
    arch.convs = {{1, 2, 4, 4}, {2, 4, 2, 2}};
    arch.dense = {12, 8};
    const StudentParams params = init_params(arch, 7);
    const Video v = generate_video(domain_preset("source"), 4, 10);
    StudentTracker tracker(params, 2.0);
    const TrackRun run = run_ope(tracker, v);
    for (const BBox& b : run.preds) EXPECT_EQ(b, v.gt.front());
}

TEST(RunOpeTest, RejectsTooShortVideos) {
    Video v = static_video(5);
    v.frames.resize(1);
    v.gt.resize(1);
    StayTracker stay;
    EXPECT_THROW(run_ope(stay, v), std::invalid_argument);
}

TEST(SuccessScoreTest, ConstantHalfIoUGivesExactlyHalf) {
    // Prediction is the lower half of the box: intersection 50, union 100.
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 12; ++t) {
        gts.emplace_back(10.0 + t, 10.0, 10.0, 10.0);
        preds.emplace_back(10.0 + t, 10.0, 10.0, 5.0);
    }
    const Metrics m = evaluate_run(make_run(preds), gts);
    EXPECT_DOUBLE_EQ(m.ss, 0.5);
}

TEST(SuccessScoreTest, DisjointGivesZero) {
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 8; ++t) {
        gts.emplace_back(10.0, 10.0, 10.0, 10.0);
        preds.emplace_back(500.0, 500.0, 10.0, 10.0);
    }
    const Metrics m = evaluate_run(make_run(preds), gts);
    EXPECT_DOUBLE_EQ(m.ss, 0.0);
    EXPECT_DOUBLE_EQ(m.ps, 0.0);
}

TEST(PrecisionScoreTest, ConstantDistanceCountsThresholds) {
    // 25 px offset: distances <= d pass for d in {25..50}, 26 of 51 points.
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 10; ++t) {
        gts.emplace_back(50.0, 50.0, 10.0, 10.0);
        preds.emplace_back(75.0, 50.0, 10.0, 10.0);
    }
    const Metrics m = evaluate_run(make_run(preds), gts);
    EXPECT_DOUBLE_EQ(m.ps, 26.0 / 51.0);
    // 60 px offset sits beyond the whole grid.
    std::vector<BBox> far;
    for (int t = 0; t < 10; ++t) far.emplace_back(110.0, 50.0, 10.0, 10.0);
    EXPECT_DOUBLE_EQ(evaluate_run(make_run(far), gts).ps, 0.0);
}

TEST(MetricsTest, InitializationFrameExcluded) {
    // Frame 0 disagrees wildly; metrics only see frames >= 1.
    std::vector<BBox> gts = {BBox(0, 0, 10, 10), BBox(5, 5, 10, 10), BBox(6, 5, 10, 10)};
    std::vector<BBox> preds = {BBox(900, 900, 1, 1), gts[1], gts[2]};
    const Metrics m = evaluate_run(make_run(preds), gts);
    EXPECT_DOUBLE_EQ(m.ss, 1.0);
    EXPECT_DOUBLE_EQ(m.ps, 1.0);
}

TEST(MetricsTest, TranslationInvariance) {
    Rng rng(31);
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 20; ++t) {
        gts.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(5, 20),
                         rng.uniform(5, 20));
        preds.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(5, 20),
                           rng.uniform(5, 20));
    }
    const Metrics base = evaluate_run(make_run(preds), gts);
    std::vector<BBox> gts2, preds2;
    for (const BBox& b : gts) gts2.emplace_back(b.x + 37.0, b.y - 11.0, b.w, b.h);
    for (const BBox& b : preds) preds2.emplace_back(b.x + 37.0, b.y - 11.0, b.w, b.h);
    const Metrics moved = evaluate_run(make_run(preds2), gts2);
    EXPECT_DOUBLE_EQ(base.ss, moved.ss);
    EXPECT_DOUBLE_EQ(base.ps, moved.ps);
}

TEST(MetricsTest, PointwiseImprovementNeverDecreasesScores) {
    Rng rng(32);
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 30; ++t) {
        gts.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 10, 10);
        preds.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 10, 10);
    }
    const Metrics base = evaluate_run(make_run(preds), gts);
    // Snapping a subset of predictions onto the ground truth improves the
    // per-frame scores pointwise.
    std::vector<BBox> better = preds;
    for (int t = 1; t < 30; t += 3) better[static_cast<std::size_t>(t)] =
        gts[static_cast<std::size_t>(t)];
    const Metrics improved = evaluate_run(make_run(better), gts);
    EXPECT_GE(improved.ss, base.ss);
    EXPECT_GE(improved.ps, base.ps);
}

TEST(MetricsTest, PureFunctionEvaluatesIdentically) {
    Rng rng(33);
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 15; ++t) {
        gts.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 12, 9);
        preds.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 11, 10);
    }
    const TrackRun run = make_run(preds);
    const Metrics a = evaluate_run(run, gts);
    const Metrics b = evaluate_run(run, gts);
    EXPECT_DOUBLE_EQ(a.ss, b.ss);
    EXPECT_DOUBLE_EQ(a.ps, b.ps);
    ASSERT_EQ(a.success_curve.size(), b.success_curve.size());
    for (std::size_t i = 0; i < a.success_curve.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.success_curve[i].fraction, b.success_curve[i].fraction);
    }
}

TEST(SparseEvalTest, StrideOneEqualsDense) {
    Rng rng(34);
    std::vector<BBox> gts, preds;
    for (int t = 0; t < 25; ++t) {
        gts.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 12, 12);
        preds.emplace_back(rng.uniform(20, 80), rng.uniform(20, 80), 12, 12);
    }
    const TrackRun run = make_run(preds);
    const Metrics dense = evaluate_run(run, gts);
    const Metrics sparse = sparse_eval(run, gts, 1);
    EXPECT_DOUBLE_EQ(dense.ss, sparse.ss);
    EXPECT_DOUBLE_EQ(dense.ps, sparse.ps);
}

TEST(SparseEvalTest, LargeStrideEvaluatesSingleFrame) {
    std::vector<BBox> gts(10, BBox(10, 10, 10, 10));
    std::vector<BBox> preds(10, BBox(500, 500, 10, 10));
    preds[9] = gts[9];  // the one evaluated frame is perfect
    const Metrics m = sparse_eval(make_run(preds), gts, 9);
    EXPECT_DOUBLE_EQ(m.ss, 1.0);
    EXPECT_DOUBLE_EQ(m.ps, 1.0);
}

TEST(SparseEvalTest, ErrorsWhenNoFrameSelected) {
    std::vector<BBox> gts(10, BBox(10, 10, 10, 10));
    EXPECT_THROW(sparse_eval(make_run(gts), gts, 10), std::invalid_argument);
    EXPECT_THROW(sparse_eval(make_run(gts), gts, 0), std::invalid_argument);
}

TEST(SparseEvalTest, PerfectThenDriftFavorsSparseGrid) {
    // Perfect tracking through frame 64, disjoint afterwards; with k=64 the
    // only evaluated frame falls in the perfect prefix.
    std::vector<BBox> gts(100, BBox(10, 10, 10, 10));
    std::vector<BBox> preds = gts;
    for (int t = 65; t < 100; ++t) preds[static_cast<std::size_t>(t)] = BBox(700, 700, 10, 10);
    const TrackRun run = make_run(preds);
    const Metrics dense = sparse_eval(run, gts, 1);
    const Metrics sparse = sparse_eval(run, gts, 64);
    EXPECT_DOUBLE_EQ(sparse.ss, 1.0);
    EXPECT_GE(sparse.ss, dense.ss);
}

TEST(FpsTest, SleepyTrackerMeasuresNearTenFps) {
    const Video v = static_video(14);
    SleepyTracker sleepy(100);
    const double fps = measure_fps(sleepy, v, 2);
    EXPECT_NEAR(fps, 10.0, 1.0);
}

TEST(FpsTest, StableAcrossVideoLengths) {
    SleepyTracker sleepy(10);
    const double a = measure_fps(sleepy, static_video(20), 2);
    const double b = measure_fps(sleepy, static_video(40), 2);
    EXPECT_GT(a, 0.0);
    EXPECT_GT(b, 0.0);
    EXPECT_NEAR(a / b, 1.0, 0.2);
}

TEST(AggregateTest, UnweightedMean) {
    std::vector<VideoResult> rows = {{"a", 0.2, 0.4, 10.0}, {"b", 0.8, 0.6, 30.0}};
    const VideoResult agg = aggregate_results(rows);
    EXPECT_DOUBLE_EQ(agg.ss, 0.5);
    EXPECT_DOUBLE_EQ(agg.ps, 0.5);
    EXPECT_DOUBLE_EQ(agg.fps, 20.0);
    EXPECT_EQ(agg.video, "aggregate");
}

}  // namespace
}  // namespace adatrack
