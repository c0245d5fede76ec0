#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adatrack/geometry.hpp"
#include "adatrack/student.hpp"
#include "adatrack/synthworld.hpp"
#include "adatrack/teachers.hpp"

namespace adatrack {

/// Anything that can be run under the one-pass evaluation protocol.
/// Scripted trackers may read the per-frame ground truth passed to step();
/// learned trackers must ignore it.
class Tracker {
public:
    virtual ~Tracker() = default;
    virtual std::string name() const = 0;
    virtual void init(const Video& v, const BBox& g0) = 0;
    virtual BBox step(const Frame& prev, const Frame& cur, const BBox& gt_t, int t) = 0;
};

/// Deterministic student tracking: action = mu, no sampling.
class StudentTracker final : public Tracker {
public:
    StudentTracker(StudentParams params, double chi);
    std::string name() const override { return "student"; }
    void init(const Video& v, const BBox& g0) override;
    BBox step(const Frame& prev, const Frame& cur, const BBox& gt_t, int t) override;

private:
    StudentParams params_;
    double chi_;
    BBox box_;
    Memory memory_;
};

class TeacherTracker final : public Tracker {
public:
    TeacherTracker(TeacherProfile profile, std::string domain, std::uint64_t seed);
    std::string name() const override { return "teacher:" + profile_.name; }
    void init(const Video& v, const BBox& g0) override;
    BBox step(const Frame& prev, const Frame& cur, const BBox& gt_t, int t) override;

private:
    TeacherProfile profile_;
    std::string domain_;
    std::uint64_t seed_;
    TeacherState state_;
    std::unique_ptr<Rng> rng_;
};

struct TrackRun {
    std::string video_id;
    std::vector<BBox> preds;          // preds[0] = g_0 by protocol
    std::vector<double> step_seconds;  // wall clock per tracked frame (t >= 1)
};

struct CurvePoint {
    double threshold = 0.0;
    double fraction = 0.0;
};

struct Metrics {
    double ss = 0.0;
    double ps = 0.0;
    double fps = 0.0;
    std::vector<CurvePoint> success_curve;
    std::vector<CurvePoint> precision_curve;
};

/// Initialize with g_0, run to the end, never re-initialize.
TrackRun run_ope(Tracker& tracker, const Video& v);

/// Success plot over the IoU threshold grid {0.00, 0.02, ..., 0.98} and its
/// mean (the AUC on a uniform grid). Frame 0 is the initialization frame and
/// is excluded.
Metrics success_score(const TrackRun& run, const std::vector<BBox>& gts);

/// Precision plot over center-distance thresholds {0, 1, ..., 50} px.
Metrics precision_score(const TrackRun& run, const std::vector<BBox>& gts);

/// Both scores at once.
Metrics evaluate_run(const TrackRun& run, const std::vector<BBox>& gts);

/// SS/PS restricted to frames t > 0 with t % k == 0. Errors when the grid
/// selects no frames.
Metrics sparse_eval(const TrackRun& run, const std::vector<BBox>& gts, int k);

/// Wall-clock frames/second over post-warmup frames.
double measure_fps(Tracker& tracker, const Video& v, int warmup);

struct VideoResult {
    std::string video;
    double ss = 0.0;
    double ps = 0.0;
    double fps = 0.0;
};

/// Unweighted mean over per-video results.
VideoResult aggregate_results(const std::vector<VideoResult>& rows);

void write_results_csv(const std::string& path, const std::vector<VideoResult>& rows,
                       std::uint64_t config_hash, std::uint64_t seed);
void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve,
                     std::uint64_t config_hash, std::uint64_t seed);

}  // namespace adatrack
