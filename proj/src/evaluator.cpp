#include "adatrack/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace adatrack {

namespace {

double center_distance(const BBox& a, const BBox& b) {
    return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Per-frame overlap/distance for the evaluated frame set.
struct FrameScores {
    std::vector<double> ious;
    std::vector<double> dists;
};

FrameScores frame_scores(const TrackRun& run, const std::vector<BBox>& gts,
                         const std::vector<int>& frames) {
    FrameScores s;
    s.ious.reserve(frames.size());
    s.dists.reserve(frames.size());
    for (int t : frames) {
        const BBox& p = run.preds[static_cast<std::size_t>(t)];
        const BBox& g = gts[static_cast<std::size_t>(t)];
        s.ious.push_back(iou(p, g));
        s.dists.push_back(center_distance(p, g));
    }
    return s;
}

Metrics metrics_from_scores(const FrameScores& s) {
    Metrics m;
    const double n = static_cast<double>(s.ious.size());
    m.success_curve.reserve(50);
    double ss_sum = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double tau = static_cast<double>(i) / 50.0;
        int pass = 0;
        for (double v : s.ious) {
            if (v > tau) ++pass;
        }
        const double frac = pass / n;
        m.success_curve.push_back({tau, frac});
        ss_sum += frac;
    }
    m.ss = ss_sum / 50.0;

    m.precision_curve.reserve(51);
    double ps_sum = 0.0;
    for (int d = 0; d <= 50; ++d) {
        int pass = 0;
        for (double v : s.dists) {
            if (v <= static_cast<double>(d)) ++pass;
        }
        const double frac = pass / n;
        m.precision_curve.push_back({static_cast<double>(d), frac});
        ps_sum += frac;
    }
    m.ps = ps_sum / 51.0;
    return m;
}

std::vector<int> dense_frames(int length) {
    std::vector<int> frames;
    for (int t = 1; t < length; ++t) frames.push_back(t);
    return frames;
}

void check_lengths(const TrackRun& run, const std::vector<BBox>& gts) {
    if (run.preds.size() != gts.size()) {
        throw std::invalid_argument("evaluator: prediction/ground-truth length mismatch");
    }
    if (run.preds.size() < 2) {
        throw std::invalid_argument("evaluator: need at least two frames");
    }
}

}  // namespace

StudentTracker::StudentTracker(StudentParams params, double chi)
    : params_(std::move(params)), chi_(chi) {}

void StudentTracker::init(const Video& v, const BBox& g0) {
    (void)v;
    box_ = g0;
    memory_ = initial_memory(params_.arch);
}

BBox StudentTracker::step(const Frame& prev, const Frame& cur, const BBox& gt_t, int t) {
    (void)gt_t;
    (void)t;
    const State s = crop_state(prev, cur, box_, chi_, params_.arch.patch);
    StudentOutput out = forward(params_, s, memory_);
    memory_ = std::move(out.memory);
    box_ = apply_action(box_, Action::from_array(out.mu));
    return box_;
}

TeacherTracker::TeacherTracker(TeacherProfile profile, std::string domain, std::uint64_t seed)
    : profile_(std::move(profile)), domain_(std::move(domain)), seed_(seed) {
    profile_.validate();
}

void TeacherTracker::init(const Video& v, const BBox& g0) {
    state_ = TeacherState{};
    state_.stale_box = g0;
    rng_ = std::make_unique<Rng>(derive_seed(seed_, "teacher", fnv1a64(profile_.name),
                                             fnv1a64(v.id)));
}

BBox TeacherTracker::step(const Frame& prev, const Frame& cur, const BBox& gt_t, int t) {
    (void)prev;
    (void)cur;
    (void)t;
    return teacher_predict(profile_, gt_t, domain_, state_, *rng_);
}

TrackRun run_ope(Tracker& tracker, const Video& v) {
    if (v.length() < 2) throw std::invalid_argument("run_ope: video needs at least 2 frames");
    if (v.gt.empty()) throw std::invalid_argument("run_ope: missing initialization box");
    TrackRun run;
    run.video_id = v.id;
    tracker.init(v, v.gt.front());
    run.preds.push_back(v.gt.front());
    run.step_seconds.reserve(static_cast<std::size_t>(v.length()) - 1);
    for (int t = 1; t < v.length(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        BBox b = tracker.step(v.frames[static_cast<std::size_t>(t) - 1],
                              v.frames[static_cast<std::size_t>(t)],
                              v.gt[static_cast<std::size_t>(t)], t);
        const auto stop = std::chrono::steady_clock::now();
        if (!b.valid()) {
            throw std::runtime_error("run_ope: tracker '" + tracker.name() +
                                     "' produced an invalid box at frame " + std::to_string(t) +
                                     " of " + v.id);
        }
        run.preds.push_back(b);
        run.step_seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    return run;
}

Metrics success_score(const TrackRun& run, const std::vector<BBox>& gts) {
    check_lengths(run, gts);
    const FrameScores s = frame_scores(run, gts, dense_frames(static_cast<int>(gts.size())));
    Metrics m = metrics_from_scores(s);
    m.precision_curve.clear();
    m.ps = 0.0;
    return m;
}

Metrics precision_score(const TrackRun& run, const std::vector<BBox>& gts) {
    check_lengths(run, gts);
    const FrameScores s = frame_scores(run, gts, dense_frames(static_cast<int>(gts.size())));
    Metrics m = metrics_from_scores(s);
    m.success_curve.clear();
    m.ss = 0.0;
    return m;
}

Metrics evaluate_run(const TrackRun& run, const std::vector<BBox>& gts) {
    check_lengths(run, gts);
    return metrics_from_scores(
        frame_scores(run, gts, dense_frames(static_cast<int>(gts.size()))));
}

Metrics sparse_eval(const TrackRun& run, const std::vector<BBox>& gts, int k) {
    check_lengths(run, gts);
    if (k < 1) throw std::invalid_argument("sparse_eval: stride must be >= 1");
    std::vector<int> frames;
    for (int t = 1; t < static_cast<int>(gts.size()); ++t) {
        if (t % k == 0) frames.push_back(t);
    }
    if (frames.empty()) {
        throw std::invalid_argument("sparse_eval: stride selects no evaluated frames");
    }
    return metrics_from_scores(frame_scores(run, gts, frames));
}

double measure_fps(Tracker& tracker, const Video& v, int warmup) {
    if (v.length() <= warmup + 1) {
        throw std::invalid_argument("measure_fps: video not longer than warmup");
    }
    const TrackRun run = run_ope(tracker, v);
    double total = 0.0;
    int frames = 0;
    for (std::size_t i = static_cast<std::size_t>(warmup); i < run.step_seconds.size(); ++i) {
        total += run.step_seconds[i];
        frames += 1;
    }
    if (total <= 0.0) total = 1e-9;
    return frames / total;
}

VideoResult aggregate_results(const std::vector<VideoResult>& rows) {
    VideoResult agg;
    agg.video = "aggregate";
    if (rows.empty()) return agg;
    for (const VideoResult& r : rows) {
        agg.ss += r.ss;
        agg.ps += r.ps;
        agg.fps += r.fps;
    }
    const double n = static_cast<double>(rows.size());
    agg.ss /= n;
    agg.ps /= n;
    agg.fps /= n;
    return agg;
}

void write_results_csv(const std::string& path, const std::vector<VideoResult>& rows,
                       std::uint64_t config_hash, std::uint64_t seed) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write results csv: " + path);
    char header[96];
    std::snprintf(header, sizeof(header), "# config_hash=%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    os << header << "video,ss,ps,fps\n";
    for (const VideoResult& r : rows) {
        os << r.video << "," << format_double(r.ss) << "," << format_double(r.ps) << ","
           << format_double(r.fps) << "\n";
    }
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve,
                     std::uint64_t config_hash, std::uint64_t seed) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write curve csv: " + path);
    char header[96];
    std::snprintf(header, sizeof(header), "# config_hash=%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    os << header << "threshold,fraction\n";
    for (const CurvePoint& p : curve) {
        os << format_double(p.threshold) << "," << format_double(p.fraction) << "\n";
    }
}

}  // namespace adatrack
