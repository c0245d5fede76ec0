#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adatrack/geometry.hpp"
#include "adatrack/rlcore.hpp"
#include "adatrack/rng.hpp"
#include "adatrack/synthworld.hpp"

namespace adatrack {

/// A scripted stand-in for a strong tracker. Predictions are the ground
/// truth perturbed by Gaussian center/scale noise, with occasional drift
/// episodes during which the output freezes at a stale box. The skill map
/// scales the noise per domain, so a teacher can be sharp in one domain and
/// sloppy in another.
struct TeacherProfile {
    std::string name;
    double center_noise_std = 0.0;  // pixels
    double scale_noise_std = 0.0;   // fraction of box size
    double drift_prob = 0.0;        // per-frame chance of starting a drift episode
    int drift_len = 8;              // minimum episode length in frames
    double recapture_prob = 1.0;    // per-frame chance of exiting once past drift_len
    std::map<std::string, double> skill_map;  // domain name -> noise multiplier

    void validate() const;
    double skill_for(const std::string& domain) const;
};

enum class TeacherSelectionMode { kRandom, kQualityArgmax };

struct TeacherPool {
    std::vector<TeacherProfile> teachers;
    TeacherSelectionMode selection_mode = TeacherSelectionMode::kQualityArgmax;
};

/// Per-video mutable prediction state (drift bookkeeping). Teachers are
/// open loop: they never see the student.
struct TeacherState {
    bool drifting = false;
    int frames_in_drift = 0;
    BBox stale_box;
};

/// One prediction given this frame's ground truth.
BBox teacher_predict(const TeacherProfile& profile, const BBox& gt, const std::string& domain,
                     TeacherState& state, Rng& rng);

/// Predictions for every frame of `v`; index 0 is the protocol
/// initialization and equals the first ground-truth box.
std::vector<BBox> run_teacher(const TeacherProfile& profile, const Video& v,
                              const std::string& domain, std::uint64_t seed);

/// Mean weak-supervision score of the teacher's predictions over the frames
/// where the weak function is defined. Errors when it is defined nowhere.
double teacher_quality(const TeacherProfile& profile, const Video& v, const WeakSupFn& w,
                       const std::string& domain, std::uint64_t seed);

/// Quality-argmax (first listed wins ties) or uniform random selection.
/// Returns an index into pool.teachers.
int select_teacher(const TeacherPool& pool, const Video& v, const WeakSupFn& w,
                   const std::string& domain, std::uint64_t seed);

/// Argmax with first-wins tie break over precomputed quality values.
int argmax_quality(const std::vector<double>& quality);

/// Three scripted teachers with complementary skill maps over the shipped
/// domain presets, used when the config declares no pool of its own.
TeacherPool default_teacher_pool();

/// Noise-free, drift-free profile: predictions equal the ground truth.
TeacherProfile oracle_teacher(const std::string& name = "oracle");

}  // namespace adatrack
