#include "adatrack/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adatrack {

void TeacherProfile::validate() const {
    if (name.empty()) throw std::invalid_argument("teacher: name must be non-empty");
    if (center_noise_std < 0.0 || scale_noise_std < 0.0) {
        throw std::invalid_argument("teacher: noise must be >= 0");
    }
    if (drift_prob < 0.0 || drift_prob > 1.0 || recapture_prob < 0.0 || recapture_prob > 1.0) {
        throw std::invalid_argument("teacher: probabilities must lie in [0,1]");
    }
    if (drift_len < 0) throw std::invalid_argument("teacher: drift_len must be >= 0");
    for (const auto& [domain, mult] : skill_map) {
        if (mult < 0.0) throw std::invalid_argument("teacher: skill multiplier must be >= 0");
    }
}

double TeacherProfile::skill_for(const std::string& domain) const {
    const auto it = skill_map.find(domain);
    return it == skill_map.end() ? 1.0 : it->second;
}

BBox teacher_predict(const TeacherProfile& profile, const BBox& gt, const std::string& domain,
                     TeacherState& state, Rng& rng) {
    if (!gt.valid()) throw std::invalid_argument("teacher_predict: invalid ground truth box");
    const double skill = profile.skill_for(domain);

    // Drift bookkeeping first so that the rng draw order is fixed per frame.
    const double u_drift = rng.uniform();
    const double u_recapture = rng.uniform();
    const double nx = rng.gaussian();
    const double ny = rng.gaussian();
    const double nw = rng.gaussian();
    const double nh = rng.gaussian();

    if (state.drifting) {
        state.frames_in_drift += 1;
        if (state.frames_in_drift >= profile.drift_len && u_recapture < profile.recapture_prob) {
            state.drifting = false;
        } else {
            return state.stale_box;
        }
    } else if (u_drift < profile.drift_prob) {
        state.drifting = true;
        state.frames_in_drift = 1;
        return state.stale_box;
    }

    const double cs = profile.center_noise_std * skill;
    const double ss = profile.scale_noise_std * skill;
    BBox b;
    b.w = std::max(gt.w * (1.0 + ss * nw), kMinBoxSide);
    b.h = std::max(gt.h * (1.0 + ss * nh), kMinBoxSide);
    b.x = gt.cx() + cs * nx - b.w / 2.0;
    b.y = gt.cy() + cs * ny - b.h / 2.0;
    state.stale_box = b;
    return b;
}

std::vector<BBox> run_teacher(const TeacherProfile& profile, const Video& v,
                              const std::string& domain, std::uint64_t seed) {
    profile.validate();
    if (v.length() == 0) throw std::invalid_argument("run_teacher: empty video");
    Rng rng(derive_seed(seed, "teacher", fnv1a64(profile.name)));
    TeacherState state;
    state.stale_box = v.gt.front();
    std::vector<BBox> preds;
    preds.reserve(static_cast<std::size_t>(v.length()));
    preds.push_back(v.gt.front());  // protocol initialization
    for (int t = 1; t < v.length(); ++t) {
        preds.push_back(
            teacher_predict(profile, v.gt[static_cast<std::size_t>(t)], domain, state, rng));
    }
    return preds;
}

double teacher_quality(const TeacherProfile& profile, const Video& v, const WeakSupFn& w,
                       const std::string& domain, std::uint64_t seed) {
    if (!w.defined_anywhere(v.length())) {
        throw std::invalid_argument("teacher_quality: weak supervision defined nowhere");
    }
    const std::vector<BBox> preds = run_teacher(profile, v, domain, seed);
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < v.length(); ++t) {
        const auto score = w.score(t, preds[static_cast<std::size_t>(t)]);
        if (score.has_value()) {
            sum += *score;
            count += 1;
        }
    }
    return sum / count;
}

int argmax_quality(const std::vector<double>& quality) {
    if (quality.empty()) throw std::invalid_argument("argmax_quality: empty pool");
    int best = 0;
    for (int i = 1; i < static_cast<int>(quality.size()); ++i) {
        if (quality[static_cast<std::size_t>(i)] > quality[static_cast<std::size_t>(best)]) {
            best = i;
        }
    }
    return best;
}

TeacherProfile oracle_teacher(const std::string& name) {
    TeacherProfile t;
    t.name = name;
    return t;
}

TeacherPool default_teacher_pool() {
    TeacherPool pool;
    pool.selection_mode = TeacherSelectionMode::kQualityArgmax;

    TeacherProfile sharp;
    sharp.name = "sharp";
    sharp.center_noise_std = 1.2;
    sharp.scale_noise_std = 0.03;
    sharp.drift_prob = 0.02;
    sharp.drift_len = 6;
    sharp.recapture_prob = 0.5;
    sharp.skill_map = {{"source", 1.0},       {"thermal-like", 1.0},
                       {"drone-like", 1.5},   {"underwater-like", 2.5},
                       {"driving-like", 1.2}, {"manipulation-like", 1.0}};
    pool.teachers.push_back(sharp);

    TeacherProfile steady;
    steady.name = "steady";
    steady.center_noise_std = 2.5;
    steady.scale_noise_std = 0.05;
    steady.drift_prob = 0.0;
    steady.skill_map = {{"source", 1.0},       {"thermal-like", 0.7},
                        {"drone-like", 1.0},   {"underwater-like", 0.8},
                        {"driving-like", 1.0}, {"manipulation-like", 1.0}};
    pool.teachers.push_back(steady);

    TeacherProfile wobbly;
    wobbly.name = "wobbly";
    wobbly.center_noise_std = 5.0;
    wobbly.scale_noise_std = 0.10;
    wobbly.drift_prob = 0.05;
    wobbly.drift_len = 10;
    wobbly.recapture_prob = 0.2;
    wobbly.skill_map = {{"manipulation-like", 0.5}};
    pool.teachers.push_back(wobbly);
    return pool;
}

int select_teacher(const TeacherPool& pool, const Video& v, const WeakSupFn& w,
                   const std::string& domain, std::uint64_t seed) {
    if (pool.teachers.empty()) throw std::invalid_argument("select_teacher: empty pool");
    if (pool.selection_mode == TeacherSelectionMode::kRandom) {
        Rng rng(derive_seed(seed, "teacher-select"));
        return static_cast<int>(rng.uniform_index(pool.teachers.size()));
    }
    std::vector<double> quality;
    quality.reserve(pool.teachers.size());
    for (const TeacherProfile& t : pool.teachers) {
        quality.push_back(teacher_quality(t, v, w, domain, seed));
    }
    return argmax_quality(quality);
}

}  // namespace adatrack
