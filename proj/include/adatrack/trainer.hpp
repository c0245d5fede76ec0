#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adatrack/rlcore.hpp"
#include "adatrack/student.hpp"
#include "adatrack/synthworld.hpp"
#include "adatrack/teachers.hpp"

namespace adatrack {

enum class WorkerMode { kRL, kKD };
enum class WorkerMix { kCombined, kRlOnly, kKdOnly };

struct TrainConfig {
    int workers = 12;  // S; even and >= 2
    double sigma = 0.05;
    double gamma = 0.99;
    std::vector<int> curriculum = {4, 8, 16, 32};
    int chunk_len = 32;
    int n_chunks = 20;  // chunk pool entries per training video
    double reverse_prob = 0.5;
    double lr_main = 7.5e-7;
    double lr_value_head = 1e-5;
    WeakSupKind weak_kind = WeakSupKind::kIoU;
    int weak_delay = 1;  // weak supervision defined at steps t % weak_delay == 0
    bool weak_from_files = false;
    TeacherPool teacher_pool;
    int max_iterations = 4000;
    int eval_every = 250;
    int patience = 8;
    std::uint64_t seed = 1;
    std::string domain = "source";
    double chi = 2.0;
    WorkerMix mix = WorkerMix::kCombined;
    ReturnDirection return_direction = ReturnDirection::kFuture;
    bool deterministic = true;  // single-threaded round-robin scheduling
    int jobs = 1;               // worker threads when deterministic == false
    bool divergence_guard = true;

    void validate() const;
};

struct TrainLogRow {
    int iteration = 0;
    std::optional<double> loss_rl;
    std::optional<double> loss_kd;
    std::optional<double> val_ss;
    std::optional<double> val_ps;
    int t_max = 0;
    std::string teacher_chosen;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    bool diverged = false;

    std::optional<double> final_val_ss() const;
};

struct AdaptResult {
    StudentParams best_params;
    StudentParams final_params;
    AdamState adam;
    TrainLog log;
    double best_val_ss = 0.0;
    int best_iteration = -1;
};

/// Interaction length for the given iteration: a non-decreasing step
/// schedule over cfg.curriculum, advancing every max_iterations/4
/// iterations and capped at chunk_len.
int curriculum_length(int iteration, const TrainConfig& cfg);

/// One student/video interaction: from b_0 = g_0, for t = 1..t_max build the
/// state, run the policy (Gaussian sample in RL mode, mean in KD mode),
/// apply the action, score it with the weak function, and record the
/// teacher's box, inverse action and distillation mask.
InteractionRecord run_interaction(const StudentParams& params, const Video& chunk,
                                  WorkerMode mode, const TeacherProfile& teacher,
                                  const WeakSupFn& weak, const TrainConfig& cfg, int t_max,
                                  std::uint64_t action_seed, std::uint64_t teacher_seed);

/// Full adaptation loop: S/2 RL and S/2 KD workers (per cfg.mix) pulling
/// chunks from the training split, gradients applied serially by the
/// coordinator, validation-based early stopping. Optional per-video weak
/// label files replace the every-k schedule when cfg.weak_from_files is set.
AdaptResult adapt(const StudentParams& initial_params, const std::vector<Video>& train_videos,
                  const std::vector<Video>& val_videos, const TrainConfig& cfg,
                  const std::vector<WeakLabelFile>* train_weak_files = nullptr);

/// Ablation entry points from the trend studies.
AdaptResult rl_only_adapt(const StudentParams& initial_params,
                          const std::vector<Video>& train_videos,
                          const std::vector<Video>& val_videos, TrainConfig cfg,
                          const std::vector<WeakLabelFile>* train_weak_files = nullptr);
AdaptResult kd_only_adapt(const StudentParams& initial_params,
                          const std::vector<Video>& train_videos,
                          const std::vector<Video>& val_videos, TrainConfig cfg,
                          const std::vector<WeakLabelFile>* train_weak_files = nullptr);

/// Mean success/precision score of a parameter set over a list of videos
/// (deterministic tracking, dense ground truth).
std::pair<double, double> validation_scores(const StudentParams& params,
                                            const std::vector<Video>& videos, double chi);

void write_train_log_csv(const std::string& path, const TrainLog& log, std::uint64_t config_hash,
                         std::uint64_t seed);
TrainLog read_train_log_csv(const std::string& path);

}  // namespace adatrack
