#include "adatrack/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "adatrack/evaluator.hpp"
#include "adatrack/rng.hpp"

namespace adatrack {

namespace {

struct ChunkRef {
    int video = 0;
    int start = 0;
};

struct DrawnChunk {
    Video video;
    int video_idx = 0;
    int start = 0;
    bool reversed = false;
};

std::vector<ChunkRef> build_chunk_pool(const std::vector<Video>& videos, int chunk_len,
                                       int n_chunks, std::uint64_t seed) {
    std::vector<ChunkRef> pool;
    for (int i = 0; i < static_cast<int>(videos.size()); ++i) {
        const Video& v = videos[static_cast<std::size_t>(i)];
        if (v.length() < chunk_len) {
            throw std::invalid_argument("adapt: training video '" + v.id +
                                        "' is shorter than chunk_len");
        }
        Rng rng(derive_seed(seed, "chunkpool", static_cast<std::uint64_t>(i)));
        const int max_start = v.length() - chunk_len;
        for (int c = 0; c < n_chunks; ++c) {
            const int start =
                static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_start + 1)));
            pool.push_back({i, start});
        }
    }
    return pool;
}

Video slice_video(const Video& v, int start, int len) {
    Video c;
    c.id = v.id + "#" + std::to_string(start);
    c.frames.assign(v.frames.begin() + start, v.frames.begin() + start + len);
    c.gt.assign(v.gt.begin() + start, v.gt.begin() + start + len);
    return c;
}

WeakSupFn weak_fn_for_chunk(const TrainConfig& cfg, const DrawnChunk& chunk,
                            const std::vector<WeakLabelFile>* weak_files) {
    if (cfg.weak_from_files) {
        if (weak_files == nullptr ||
            chunk.video_idx >= static_cast<int>(weak_files->size())) {
            throw std::invalid_argument("adapt: weak_from_files set but no label files given");
        }
        const WeakLabelFile& file = (*weak_files)[static_cast<std::size_t>(chunk.video_idx)];
        const int len = chunk.video.length();
        std::set<int> local;
        for (int g : file.steps) {
            const int rel = g - chunk.start;
            if (rel < 0 || rel >= len) continue;
            local.insert(chunk.reversed ? len - 1 - rel : rel);
        }
        return WeakSupFn::at_steps(file.kind, std::move(local), chunk.video.gt);
    }
    return WeakSupFn::every_k(cfg.weak_kind, cfg.weak_delay, chunk.video.gt);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Coordinator {
    std::mutex mu;
    StudentParams canonical;
    AdamState adam;
    TrainLog log;
    int applied = 0;
    double best_ss = -std::numeric_limits<double>::infinity();
    int best_iteration = -1;
    StudentParams best_params;
    bool has_best = false;
    int evals_since_improve = 0;
    std::atomic<bool> stop{false};
};

struct WorkerContext {
    int index = 0;
    WorkerMode mode = WorkerMode::kRL;
    Rng stream;

    WorkerContext(int i, WorkerMode m, std::uint64_t seed)
        : index(i), mode(m), stream(seed) {}
};

}  // namespace

void TrainConfig::validate() const {
    if (workers < 2 || workers % 2 != 0) {
        throw std::invalid_argument("TrainConfig: workers must be even and >= 2");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("TrainConfig: sigma must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("TrainConfig: gamma in [0,1]");
    if (curriculum.empty()) throw std::invalid_argument("TrainConfig: empty curriculum");
    for (std::size_t i = 1; i < curriculum.size(); ++i) {
        if (curriculum[i] < curriculum[i - 1]) {
            throw std::invalid_argument("TrainConfig: curriculum must be non-decreasing");
        }
    }
    if (chunk_len < 2) throw std::invalid_argument("TrainConfig: chunk_len must be >= 2");
    if (n_chunks < 1) throw std::invalid_argument("TrainConfig: n_chunks must be >= 1");
    if (!(reverse_prob >= 0.0 && reverse_prob <= 1.0)) {
        throw std::invalid_argument("TrainConfig: reverse_prob in [0,1]");
    }
    if (weak_delay < 1) throw std::invalid_argument("TrainConfig: weak_delay must be >= 1");
    if (max_iterations < 0) throw std::invalid_argument("TrainConfig: negative max_iterations");
    if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (teacher_pool.teachers.empty()) {
        throw std::invalid_argument("TrainConfig: teacher pool must not be empty");
    }
    for (const TeacherProfile& t : teacher_pool.teachers) t.validate();
    if (jobs < 1) throw std::invalid_argument("TrainConfig: jobs must be >= 1");
}

int curriculum_length(int iteration, const TrainConfig& cfg) {
    if (iteration < 0) throw std::invalid_argument("curriculum_length: negative iteration");
    const int stages = static_cast<int>(cfg.curriculum.size());
    int stage = stages - 1;
    if (cfg.max_iterations > 0) {
        const int per_stage = std::max(1, cfg.max_iterations / stages);
        stage = std::min(stages - 1, iteration / per_stage);
    }
    return std::min(cfg.curriculum[static_cast<std::size_t>(stage)], cfg.chunk_len);
}

InteractionRecord run_interaction(const StudentParams& params, const Video& chunk,
                                  WorkerMode mode, const TeacherProfile& teacher,
                                  const WeakSupFn& weak, const TrainConfig& cfg, int t_max,
                                  std::uint64_t action_seed, std::uint64_t teacher_seed) {
    if (chunk.length() < 2) throw std::invalid_argument("run_interaction: chunk too short");
    if (t_max < 1) throw std::invalid_argument("run_interaction: t_max must be >= 1");
    // A chunk of L frames carries L-1 transitions.
    const int steps = std::min(t_max, chunk.length() - 1);

    const std::vector<BBox> teacher_preds = run_teacher(teacher, chunk, cfg.domain, teacher_seed);
    Rng arng(derive_seed(action_seed, "actions"));

    InteractionRecord rec;
    BBox box = chunk.gt.front();
    Memory memory = initial_memory(params.arch);
    for (int t = 1; t <= steps; ++t) {
        const BBox prev_box = box;
        State s = crop_state(chunk.frames[static_cast<std::size_t>(t) - 1],
                             chunk.frames[static_cast<std::size_t>(t)], prev_box, cfg.chi,
                             params.arch.patch);
        StudentOutput out = forward(params, s, memory);
        memory = std::move(out.memory);

        std::array<double, 4> raw = out.mu;
        if (mode == WorkerMode::kRL) raw = sample_action_raw(out.mu, cfg.sigma, arng);
        const Action env = Action::from_array(raw).clamped();
        box = apply_action(prev_box, env);

        const std::optional<double> score = weak.score(t, box);
        const double r = reward(score);

        const BBox& teacher_box = teacher_preds[static_cast<std::size_t>(t)];
        const Action teacher_action = invert_action(prev_box, teacher_box);
        const double r_teacher = reward(weak.score(t, teacher_box));

        rec.states.push_back(std::move(s));
        rec.action_raw.push_back(raw);
        rec.action_env.push_back(env);
        rec.action_mean.push_back(out.mu);
        rec.values.push_back(out.value);
        rec.rewards.push_back(r);
        rec.boxes.push_back(box);
        rec.teacher_boxes.push_back(teacher_box);
        rec.teacher_actions.push_back(teacher_action);
        rec.masks.push_back(static_cast<char>(distill_mask(r_teacher, r)));
        rec.weak_scores.push_back(score);
    }
    return rec;
}

std::pair<double, double> validation_scores(const StudentParams& params,
                                            const std::vector<Video>& videos, double chi) {
    if (videos.empty()) throw std::invalid_argument("validation_scores: empty video list");
    double ss = 0.0;
    double ps = 0.0;
    for (const Video& v : videos) {
        StudentTracker tracker(params, chi);
        const TrackRun run = run_ope(tracker, v);
        const Metrics m = evaluate_run(run, v.gt);
        ss += m.ss;
        ps += m.ps;
    }
    const double n = static_cast<double>(videos.size());
    return {ss / n, ps / n};
}

namespace {

std::vector<WorkerMode> worker_modes(const TrainConfig& cfg) {
    std::vector<WorkerMode> modes(static_cast<std::size_t>(cfg.workers));
    for (int i = 0; i < cfg.workers; ++i) {
        switch (cfg.mix) {
            case WorkerMix::kCombined:
                modes[static_cast<std::size_t>(i)] =
                    (i < cfg.workers / 2) ? WorkerMode::kRL : WorkerMode::kKD;
                break;
            case WorkerMix::kRlOnly:
                modes[static_cast<std::size_t>(i)] = WorkerMode::kRL;
                break;
            case WorkerMix::kKdOnly:
                modes[static_cast<std::size_t>(i)] = WorkerMode::kKD;
                break;
        }
    }
    return modes;
}

struct InteractionResult {
    TrajectoryGradient grad;
    WorkerMode mode = WorkerMode::kRL;
    int t_max = 0;
    std::string teacher;
    bool diverged = false;
    std::string diagnostic;
};

// One worker interaction against a parameter snapshot. Pure apart from the
// worker's own rng stream.
InteractionResult run_one(const TrainConfig& cfg, const std::vector<Video>& train,
                          const std::vector<ChunkRef>& pool,
                          const std::vector<WeakLabelFile>* weak_files,
                          const StudentParams& snapshot, WorkerContext& worker, int ticket) {
    const int t_max = curriculum_length(ticket, cfg);

    // Fixed draw order keeps the stream reproducible.
    const std::uint64_t chunk_pick = worker.stream.uniform_index(pool.size());
    const std::uint64_t reverse_seed = worker.stream.next_u64();
    const std::uint64_t action_seed = worker.stream.next_u64();
    const std::uint64_t select_seed = worker.stream.next_u64();

    const ChunkRef ref = pool[chunk_pick];
    DrawnChunk chunk;
    chunk.video_idx = ref.video;
    chunk.start = ref.start;
    chunk.video = slice_video(train[static_cast<std::size_t>(ref.video)], ref.start,
                              std::min(cfg.chunk_len, train[static_cast<std::size_t>(ref.video)].length()));
    const Video reversed = maybe_reverse(chunk.video, cfg.reverse_prob, reverse_seed);
    chunk.reversed = reversed.id != chunk.video.id;
    chunk.video = reversed;

    const WeakSupFn weak = weak_fn_for_chunk(cfg, chunk, weak_files);

    // Teacher runs are keyed by chunk identity so that selection scoring and
    // the interaction replay the exact same predictions.
    const std::uint64_t chunk_seed =
        derive_seed(cfg.seed, "chunk", static_cast<std::uint64_t>(ref.video),
                    static_cast<std::uint64_t>(ref.start) * 2 + (chunk.reversed ? 1 : 0));

    int teacher_idx = 0;
    if (cfg.teacher_pool.teachers.size() > 1) {
        if (cfg.teacher_pool.selection_mode == TeacherSelectionMode::kRandom) {
            Rng pick(derive_seed(select_seed, "pick"));
            teacher_idx = static_cast<int>(pick.uniform_index(cfg.teacher_pool.teachers.size()));
        } else {
            teacher_idx = select_teacher(cfg.teacher_pool, chunk.video, weak, cfg.domain,
                                         chunk_seed);
        }
    }
    const TeacherProfile& teacher =
        cfg.teacher_pool.teachers[static_cast<std::size_t>(teacher_idx)];

    InteractionResult result;
    result.mode = worker.mode;
    result.t_max = t_max;
    result.teacher = teacher.name;
    try {
        const InteractionRecord rec = run_interaction(snapshot, chunk.video, worker.mode, teacher,
                                                      weak, cfg, t_max, action_seed, chunk_seed);
        const double w_pi = worker.mode == WorkerMode::kRL ? 1.0 : 0.0;
        const double w_v = worker.mode == WorkerMode::kRL ? 1.0 : 0.0;
        const double w_kd = worker.mode == WorkerMode::kKD ? 1.0 : 0.0;
        const TrajectoryLossSpec spec =
            make_loss_spec(rec, cfg.gamma, cfg.sigma, w_pi, w_v, w_kd, cfg.return_direction);
        result.grad = gradient(snapshot, spec);
    } catch (const std::runtime_error& e) {
        result.diverged = true;
        result.diagnostic = e.what();
    }
    return result;
}

}  // namespace

AdaptResult adapt(const StudentParams& initial_params, const std::vector<Video>& train_videos,
                  const std::vector<Video>& val_videos, const TrainConfig& cfg,
                  const std::vector<WeakLabelFile>* train_weak_files) {
    cfg.validate();
    initial_params.arch.validate();
    if (train_videos.empty()) throw std::invalid_argument("adapt: empty training split");
    if (val_videos.empty()) throw std::invalid_argument("adapt: empty validation split");
    if (cfg.weak_from_files &&
        (train_weak_files == nullptr || train_weak_files->size() != train_videos.size())) {
        throw std::invalid_argument("adapt: weak label files must match the training split");
    }

    const std::vector<ChunkRef> pool =
        build_chunk_pool(train_videos, cfg.chunk_len, cfg.n_chunks, cfg.seed);
    const std::vector<WorkerMode> modes = worker_modes(cfg);

    std::vector<WorkerContext> workers;
    workers.reserve(static_cast<std::size_t>(cfg.workers));
    for (int i = 0; i < cfg.workers; ++i) {
        workers.emplace_back(i, modes[static_cast<std::size_t>(i)],
                             derive_seed(cfg.seed, "worker", static_cast<std::uint64_t>(i)));
    }

    Coordinator coord;
    coord.canonical = initial_params;
    coord.adam = init_adam(initial_params);

    auto apply_result = [&](InteractionResult&& result) {
        // Serial application: exactly one optimizer step per submission.
        std::lock_guard<std::mutex> lock(coord.mu);
        if (coord.stop.load()) return;
        const int iteration = coord.applied;

        TrainLogRow row;
        row.iteration = iteration;
        row.t_max = result.t_max;
        row.teacher_chosen = result.teacher;
        if (result.diverged) {
            if (cfg.divergence_guard) {
                throw std::runtime_error("adapt: training diverged at iteration " +
                                         std::to_string(iteration) + ": " + result.diagnostic);
            }
            coord.log.diverged = true;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            if (result.mode == WorkerMode::kRL) {
                row.loss_rl = nan;
            } else {
                row.loss_kd = nan;
            }
        } else {
            if (result.mode == WorkerMode::kRL) {
                row.loss_rl = result.grad.loss;
            } else {
                row.loss_kd = result.grad.loss;
            }
            adam_step(coord.canonical, result.grad.grad, coord.adam, cfg.lr_main,
                      cfg.lr_value_head);
        }
        coord.applied += 1;

        if (coord.applied % cfg.eval_every == 0) {
            const auto [ss, ps] = validation_scores(coord.canonical, val_videos, cfg.chi);
            row.val_ss = ss;
            row.val_ps = ps;
            if (ss > coord.best_ss) {
                coord.best_ss = ss;
                coord.best_iteration = iteration;
                coord.best_params = coord.canonical;
                coord.has_best = true;
                coord.evals_since_improve = 0;
            } else {
                coord.evals_since_improve += 1;
                if (coord.evals_since_improve >= cfg.patience) coord.stop.store(true);
            }
        }
        coord.log.rows.push_back(std::move(row));
    };

    if (cfg.deterministic || cfg.jobs == 1) {
        for (int n = 0; n < cfg.max_iterations && !coord.stop.load(); ++n) {
            WorkerContext& worker = workers[static_cast<std::size_t>(n % cfg.workers)];
            StudentParams snapshot = coord.canonical;
            apply_result(run_one(cfg, train_videos, pool, train_weak_files, snapshot, worker, n));
        }
    } else {
        std::atomic<int> tickets{0};
        const int n_threads = std::min(cfg.jobs, cfg.workers);
        std::vector<std::thread> threads;
        std::mutex error_mu;
        std::string first_error;
        for (int k = 0; k < n_threads; ++k) {
            threads.emplace_back([&, k] {
                // Each thread owns a disjoint set of worker contexts.
                std::vector<int> own;
                for (int i = k; i < cfg.workers; i += n_threads) own.push_back(i);
                std::size_t rr = 0;
                try {
                    while (true) {
                        const int ticket = tickets.fetch_add(1);
                        if (ticket >= cfg.max_iterations || coord.stop.load()) break;
                        WorkerContext& worker =
                            workers[static_cast<std::size_t>(own[rr++ % own.size()])];
                        StudentParams snapshot;
                        {
                            std::lock_guard<std::mutex> lock(coord.mu);
                            snapshot = coord.canonical;
                        }
                        apply_result(run_one(cfg, train_videos, pool, train_weak_files, snapshot,
                                             worker, ticket));
                    }
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (first_error.empty()) first_error = e.what();
                    coord.stop.store(true);
                }
            });
        }
        for (std::thread& t : threads) t.join();
        if (!first_error.empty()) throw std::runtime_error(first_error);
    }

    AdaptResult out;
    out.final_params = coord.canonical;
    out.best_params = coord.has_best ? coord.best_params : coord.canonical;
    out.adam = coord.adam;
    out.log = std::move(coord.log);
    out.best_val_ss = coord.has_best ? coord.best_ss : 0.0;
    out.best_iteration = coord.best_iteration;
    return out;
}

AdaptResult rl_only_adapt(const StudentParams& initial_params,
                          const std::vector<Video>& train_videos,
                          const std::vector<Video>& val_videos, TrainConfig cfg,
                          const std::vector<WeakLabelFile>* train_weak_files) {
    cfg.mix = WorkerMix::kRlOnly;
    cfg.divergence_guard = false;  // divergence is an expected outcome here
    return adapt(initial_params, train_videos, val_videos, cfg, train_weak_files);
}

AdaptResult kd_only_adapt(const StudentParams& initial_params,
                          const std::vector<Video>& train_videos,
                          const std::vector<Video>& val_videos, TrainConfig cfg,
                          const std::vector<WeakLabelFile>* train_weak_files) {
    cfg.mix = WorkerMix::kKdOnly;
    return adapt(initial_params, train_videos, val_videos, cfg, train_weak_files);
}

std::optional<double> TrainLog::final_val_ss() const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        if (it->val_ss.has_value()) return it->val_ss;
    }
    return std::nullopt;
}

void write_train_log_csv(const std::string& path, const TrainLog& log, std::uint64_t config_hash,
                         std::uint64_t seed) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write training log: " + path);
    char header[96];
    std::snprintf(header, sizeof(header), "# config_hash=%016llx seed=%llu\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    os << header << "iteration,loss_rl,loss_kd,val_ss,val_ps,t_max,teacher_chosen\n";
    auto cell = [](const std::optional<double>& v) {
        return v.has_value() ? format_double(*v) : std::string();
    };
    for (const TrainLogRow& r : log.rows) {
        os << r.iteration << "," << cell(r.loss_rl) << "," << cell(r.loss_kd) << ","
           << cell(r.val_ss) << "," << cell(r.val_ps) << "," << r.t_max << ","
           << r.teacher_chosen << "\n";
    }
}

TrainLog read_train_log_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open training log: " + path);
    TrainLog log;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 7) cells.emplace_back();
        if (cells.size() != 7) {
            throw std::runtime_error("training log: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        }
        TrainLogRow row;
        try {
            row.iteration = std::stoi(cells[0]);
            auto opt = [](const std::string& s) -> std::optional<double> {
                if (s.empty()) return std::nullopt;
                return std::stod(s);
            };
            row.loss_rl = opt(cells[1]);
            row.loss_kd = opt(cells[2]);
            row.val_ss = opt(cells[3]);
            row.val_ps = opt(cells[4]);
            row.t_max = std::stoi(cells[5]);
        } catch (const std::exception&) {
            throw std::runtime_error("training log: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        }
        row.teacher_chosen = cells[6];
        log.rows.push_back(std::move(row));
    }
    return log;
}

}  // namespace adatrack
