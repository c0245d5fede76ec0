#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adatrack/config.hpp"
#include "adatrack/evaluator.hpp"
#include "adatrack/plot.hpp"
#include "adatrack/rng.hpp"
#include "adatrack/student.hpp"
#include "adatrack/synthworld.hpp"
#include "adatrack/teachers.hpp"
#include "adatrack/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace adatrack;

struct SplitSpec {
    std::string name;
    int count = 0;
};

int cmd_gen_data(const std::string& out_dir, const std::string& domain, int train, int val,
                 int test, int frames, std::uint64_t seed, int weak_delay,
                 const std::string& weak_kind, bool force) {
    const DomainSpec spec = domain_preset(domain);
    if (frames < 2) throw std::runtime_error("gen-data: --frames must be >= 2");
    if (weak_delay < 1) throw std::runtime_error("gen-data: --weak-delay must be >= 1");
    const WeakSupKind kind = parse_weak_kind(weak_kind);

    const fs::path root(out_dir);
    if (fs::exists(root / "manifest.json") && !force) {
        throw std::runtime_error("gen-data: " + (root / "manifest.json").string() +
                                 " already exists; pass --force to overwrite");
    }
    fs::create_directories(root);

    KvConfig kv;
    kv.set("domain", domain);
    kv.set("seed", std::to_string(seed));
    kv.set("weak_delay", std::to_string(weak_delay));
    kv.set("weak_kind", weak_kind);
    const std::uint64_t config_hash = kv.hash();

    json manifest;
    manifest["domain"] = domain;
    manifest["frame_size"] = spec.frame_size;
    manifest["frames_per_video"] = frames;
    manifest["seed"] = seed;
    manifest["weak_delay"] = weak_delay;
    manifest["weak_kind"] = weak_kind;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    manifest["config_hash"] = hash_hex;

    const SplitSpec splits[] = {{"train", train}, {"val", val}, {"test", test}};
    for (const SplitSpec& split : splits) {
        manifest["splits"][split.name] = split.count;
        for (int i = 0; i < split.count; ++i) {
            char id[64];
            std::snprintf(id, sizeof(id), "%s-%03d", split.name.c_str(), i);
            const std::uint64_t vseed =
                derive_seed(seed, split.name, static_cast<std::uint64_t>(i));
            Video v = generate_video(spec, vseed, frames);
            v.id = id;
            const fs::path dir = root / split.name / id;
            write_video_dir(dir.string(), v);
            WeakLabelFile labels;
            labels.kind = kind;
            for (int t = 0; t < frames; t += weak_delay) labels.steps.insert(t);
            write_weaklabels(dir.string(), labels);
        }
    }
    std::ofstream os(root / "manifest.json");
    os << manifest.dump(2) << "\n";
    std::cout << "wrote " << (train + val + test) << " videos under " << out_dir << "\n";
    return 0;
}

std::vector<WeakLabelFile> load_weak_files(const std::string& root, const std::string& split) {
    std::vector<WeakLabelFile> files;
    for (const std::string& id : list_split(root, split)) {
        files.push_back(read_weaklabels((fs::path(root) / split / id).string()));
    }
    return files;
}

struct AdaptArgs {
    std::string config_path;
    std::string data_root;
    std::string out_dir;
    std::string pretrained;
    bool from_scratch = false;
    bool rl_only = false;
    bool kd_only = false;
    std::optional<int> iterations;
    std::optional<int> weak_delay;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> domain;
    bool nondeterministic = false;
    int runs = 1;
};

int run_one_adaptation(const AdaptArgs& args, bool pretrain_mode);

int run_adaptation(const AdaptArgs& args, bool pretrain_mode) {
    if (args.runs < 1) throw std::runtime_error("adapt: --runs must be >= 1");
    if (args.runs == 1) return run_one_adaptation(args, pretrain_mode);
    // Repeated runs with consecutive seeds; per-run outputs live in run-<i>/
    // and the averaged best validation score is reported at the end.
    double sum_best = 0.0;
    for (int r = 0; r < args.runs; ++r) {
        AdaptArgs one = args;
        const std::uint64_t base = args.seed.value_or(1);
        one.seed = base + static_cast<std::uint64_t>(r);
        one.out_dir = (fs::path(args.out_dir.empty() ? "." : args.out_dir) /
                       ("run-" + std::to_string(r)))
                          .string();
        const int rc = run_one_adaptation(one, pretrain_mode);
        if (rc != 0) return rc;
        const TrainLog log =
            read_train_log_csv((fs::path(one.out_dir) / "train_log.csv").string());
        double best = 0.0;
        for (const TrainLogRow& row : log.rows) {
            if (row.val_ss.has_value()) best = std::max(best, *row.val_ss);
        }
        sum_best += best;
    }
    std::cout << "average best val_ss over " << args.runs << " runs: "
              << sum_best / args.runs << "\n";
    return 0;
}

int run_one_adaptation(const AdaptArgs& args, bool pretrain_mode) {
    KvConfig kv;
    if (!args.config_path.empty()) kv = KvConfig::from_file(args.config_path);
    if (!args.data_root.empty()) kv.set("data_root", args.data_root);
    if (!args.out_dir.empty()) kv.set("out_dir", args.out_dir);
    if (args.iterations.has_value()) kv.set("max_iterations", std::to_string(*args.iterations));
    if (args.weak_delay.has_value()) kv.set("weak_delay", std::to_string(*args.weak_delay));
    if (args.seed.has_value()) kv.set("seed", std::to_string(*args.seed));
    if (args.jobs.has_value()) kv.set("jobs", std::to_string(*args.jobs));
    if (args.domain.has_value()) kv.set("domain", *args.domain);
    if (args.rl_only) kv.set("mix", "rl-only");
    if (args.kd_only) kv.set("mix", "kd-only");
    if (args.nondeterministic) kv.set("deterministic", "0");
    if (pretrain_mode) {
        // Source-domain pretraining: dense IoU supervision against an exact
        // scripted teacher, starting from random parameters.
        if (!kv.has("domain")) kv.set("domain", "source");
        kv.set("weak_kind", "iou");
        kv.set("weak_delay", "1");
        if (!kv.has("teachers")) {
            kv.set("teachers", "oracle");
            kv.set("teacher.oracle.center_noise_std", "0");
        }
    }

    const std::string data_root = kv.get_string("data_root", "");
    const std::string out_dir = kv.get_string("out_dir", "");
    if (data_root.empty()) throw std::runtime_error("adapt: data_root not set (config or --data)");
    if (out_dir.empty()) throw std::runtime_error("adapt: out_dir not set (config or --out)");
    if (!fs::exists(data_root)) throw std::runtime_error("adapt: missing data root " + data_root);

    const TrainConfig cfg = make_train_config(kv);
    const Architecture arch = make_architecture(kv);
    const std::uint64_t config_hash = kv.hash();

    StudentParams initial;
    if (!args.pretrained.empty() && !args.from_scratch && !pretrain_mode) {
        initial = load_checkpoint(args.pretrained).params;
    } else {
        initial = init_params(arch, derive_seed(cfg.seed, "init-params"));
    }

    const std::vector<Video> train_videos = load_split(data_root, "train");
    const std::vector<Video> val_videos = load_split(data_root, "val");
    std::vector<WeakLabelFile> weak_files;
    const std::vector<WeakLabelFile>* weak_ptr = nullptr;
    if (cfg.weak_from_files) {
        weak_files = load_weak_files(data_root, "train");
        weak_ptr = &weak_files;
    }

    AdaptResult result;
    if (cfg.mix == WorkerMix::kRlOnly) {
        result = rl_only_adapt(initial, train_videos, val_videos, cfg, weak_ptr);
    } else if (cfg.mix == WorkerMix::kKdOnly) {
        result = kd_only_adapt(initial, train_videos, val_videos, cfg, weak_ptr);
    } else {
        result = adapt(initial, train_videos, val_videos, cfg, weak_ptr);
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    save_checkpoint((out / "best.ckpt").string(),
                    {result.best_params, result.adam, config_hash, cfg.seed});
    save_checkpoint((out / "final.ckpt").string(),
                    {result.final_params, result.adam, config_hash, cfg.seed});
    write_train_log_csv((out / "train_log.csv").string(), result.log, config_hash, cfg.seed);
    std::cout << "best val_ss " << result.best_val_ss << " at iteration " << result.best_iteration
              << "; checkpoints and log written to " << out_dir << "\n";
    if (result.log.diverged) std::cout << "note: divergence events were logged\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& data_root,
             const std::string& split, const std::string& checkpoint,
             const std::string& tracker_kind, int sparse_k, const std::string& out_dir,
             std::uint64_t seed, int fps_warmup) {
    KvConfig kv;
    if (!config_path.empty()) kv = KvConfig::from_file(config_path);
    if (!data_root.empty()) kv.set("data_root", data_root);
    kv.ensure_known_keys();
    const std::string root = kv.get_string("data_root", "");
    if (root.empty()) throw std::runtime_error("eval: data_root not set (config or --data)");
    const std::string domain = kv.get_string("domain", "source");
    const double chi = kv.get_double("chi", 2.0);

    KvConfig hash_kv = kv;
    hash_kv.set("eval.split", split);
    hash_kv.set("eval.tracker", tracker_kind);
    hash_kv.set("eval.sparse", std::to_string(sparse_k));
    const std::uint64_t config_hash = hash_kv.hash();

    const std::vector<Video> videos = load_split(root, split);
    if (videos.empty()) throw std::runtime_error("eval: split '" + split + "' is empty");

    auto make_tracker = [&]() -> std::unique_ptr<Tracker> {
        if (tracker_kind == "student") {
            if (checkpoint.empty()) throw std::runtime_error("eval: --checkpoint required");
            return std::make_unique<StudentTracker>(load_checkpoint(checkpoint).params, chi);
        }
        if (tracker_kind == "oracle") {
            return std::make_unique<TeacherTracker>(oracle_teacher(), domain, seed);
        }
        const std::string prefix = "teacher:";
        if (tracker_kind.rfind(prefix, 0) == 0) {
            const std::string name = tracker_kind.substr(prefix.size());
            const TeacherPool pool = make_teacher_pool(kv);
            for (const TeacherProfile& t : pool.teachers) {
                if (t.name == name) return std::make_unique<TeacherTracker>(t, domain, seed);
            }
            throw std::runtime_error("eval: unknown teacher '" + name + "'");
        }
        throw std::runtime_error("eval: unknown tracker kind '" + tracker_kind + "'");
    };

    std::vector<VideoResult> rows;
    std::vector<CurvePoint> success_sum, precision_sum;
    for (const Video& v : videos) {
        auto tracker = make_tracker();
        const TrackRun run = run_ope(*tracker, v);
        const Metrics m = sparse_k > 1 ? sparse_eval(run, v.gt, sparse_k)
                                       : evaluate_run(run, v.gt);
        double total = 0.0;
        int counted = 0;
        for (std::size_t i = static_cast<std::size_t>(std::clamp(
                 fps_warmup, 0, static_cast<int>(run.step_seconds.size()) - 1));
             i < run.step_seconds.size(); ++i) {
            total += run.step_seconds[i];
            counted += 1;
        }
        const double fps = total > 0.0 ? counted / total : 0.0;
        rows.push_back({v.id, m.ss, m.ps, fps});
        if (success_sum.empty()) {
            success_sum = m.success_curve;
            precision_sum = m.precision_curve;
        } else {
            for (std::size_t i = 0; i < success_sum.size(); ++i) {
                success_sum[i].fraction += m.success_curve[i].fraction;
            }
            for (std::size_t i = 0; i < precision_sum.size(); ++i) {
                precision_sum[i].fraction += m.precision_curve[i].fraction;
            }
        }
    }
    for (CurvePoint& p : success_sum) p.fraction /= static_cast<double>(videos.size());
    for (CurvePoint& p : precision_sum) p.fraction /= static_cast<double>(videos.size());
    rows.push_back(aggregate_results(rows));

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_results_csv((out / "results.csv").string(), rows, config_hash, seed);
    write_curve_csv((out / "success_curve.csv").string(), success_sum, config_hash, seed);
    write_curve_csv((out / "precision_curve.csv").string(), precision_sum, config_hash, seed);
    const VideoResult& agg = rows.back();
    std::cout << "aggregate ss " << agg.ss << " ps " << agg.ps << " fps " << agg.fps << " over "
              << (rows.size() - 1) << " videos; CSVs in " << out_dir << "\n";
    return 0;
}

int cmd_plot(const std::vector<std::string>& logs, const std::vector<std::string>& curves,
             const std::string& out_path, const std::string& title) {
    if (logs.empty() == curves.empty()) {
        throw std::runtime_error("plot: pass either --log files or --curve files");
    }
    KvConfig kv;
    for (std::size_t i = 0; i < logs.size(); ++i) kv.set("plot.log." + std::to_string(i), logs[i]);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        kv.set("plot.curve." + std::to_string(i), curves[i]);
    }
    std::vector<PlotSeries> series;
    std::string svg;
    if (!logs.empty()) {
        for (const std::string& path : logs) {
            series.push_back(series_from_train_log(path, fs::path(path).stem().string()));
        }
        svg = render_line_plot_svg(series, title.empty() ? "validation success score" : title,
                                   "iteration", "success score", kv.hash(), 0);
    } else {
        for (const std::string& path : curves) {
            series.push_back(series_from_curve_csv(path, fs::path(path).stem().string()));
        }
        svg = render_line_plot_svg(series, title.empty() ? "threshold curve" : title, "threshold",
                                   "fraction of frames", kv.hash(), 0);
    }
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("plot: cannot write " + out_path);
    os << svg;
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adatrack: weakly-supervised domain adaptation for regression trackers"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic tracking dataset");
    std::string gen_out, gen_domain = "source", gen_weak_kind = "iou";
    int gen_train = 8, gen_val = 2, gen_test = 4, gen_frames = 96, gen_weak_delay = 1;
    std::uint64_t gen_seed = 1;
    bool gen_force = false;
    gen->add_option("--out", gen_out, "output dataset root")->required();
    gen->add_option("--domain", gen_domain, "domain preset name");
    gen->add_option("--train", gen_train, "training videos");
    gen->add_option("--val", gen_val, "validation videos");
    gen->add_option("--test", gen_test, "test videos");
    gen->add_option("--frames", gen_frames, "frames per video");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--weak-delay", gen_weak_delay, "weak label stride in weaklabels.txt");
    gen->add_option("--weak-kind", gen_weak_kind, "weak label kind (iou|dist)");
    gen->add_flag("--force", gen_force, "overwrite an existing dataset");

    // shared adapt/pretrain options
    AdaptArgs adapt_args;
    auto add_adapt_options = [&](CLI::App* cmd, bool with_modes) {
        cmd->add_option("--config", adapt_args.config_path, "experiment config file");
        cmd->add_option("--data", adapt_args.data_root, "dataset root");
        cmd->add_option("--out", adapt_args.out_dir, "output directory");
        cmd->add_option("--iterations", adapt_args.iterations, "override max_iterations");
        cmd->add_option("--seed", adapt_args.seed, "override master seed");
        cmd->add_option("--jobs", adapt_args.jobs, "worker threads (nondeterministic mode)");
        cmd->add_option("--domain", adapt_args.domain, "override domain name");
        cmd->add_flag("--nondeterministic", adapt_args.nondeterministic,
                      "concurrent scheduling instead of round-robin");
        if (with_modes) {
            cmd->add_option("--pretrained", adapt_args.pretrained, "source checkpoint");
            cmd->add_option("--weak-delay", adapt_args.weak_delay, "override weak_delay");
            cmd->add_option("--runs", adapt_args.runs,
                            "repeat with consecutive seeds and report the average");
            cmd->add_flag("--from-scratch", adapt_args.from_scratch,
                          "random initialization instead of a checkpoint");
            cmd->add_flag("--rl-only", adapt_args.rl_only, "all workers on the RL loss");
            cmd->add_flag("--kd-only", adapt_args.kd_only, "all workers on the KD loss");
        }
    };
    auto* pretrain = app.add_subcommand("pretrain", "train a student on the source domain");
    add_adapt_options(pretrain, false);
    auto* adapt_cmd = app.add_subcommand("adapt", "adapt a student to a target domain");
    add_adapt_options(adapt_cmd, true);

    // eval
    auto* eval = app.add_subcommand("eval", "one-pass evaluation of a tracker");
    std::string eval_config, eval_data, eval_split = "test", eval_ckpt,
                eval_tracker = "student", eval_out = "eval-out";
    int eval_sparse = 1, eval_warmup = 4;
    std::uint64_t eval_seed = 1;
    eval->add_option("--config", eval_config, "experiment config file");
    eval->add_option("--data", eval_data, "dataset root");
    eval->add_option("--split", eval_split, "dataset split");
    eval->add_option("--checkpoint", eval_ckpt, "student checkpoint");
    eval->add_option("--tracker", eval_tracker, "student | oracle | teacher:<name>");
    eval->add_option("--sparse-gt", eval_sparse, "evaluate only every k-th frame");
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--seed", eval_seed, "seed for scripted trackers");
    eval->add_option("--fps-warmup", eval_warmup, "frames excluded from FPS accounting");

    // plot
    auto* plot = app.add_subcommand("plot", "render CSV logs/curves as SVG");
    std::vector<std::string> plot_logs, plot_curves;
    std::string plot_out = "plot.svg", plot_title;
    plot->add_option("--log", plot_logs, "training log CSV (repeatable)");
    plot->add_option("--curve", plot_curves, "curve CSV (repeatable)");
    plot->add_option("--out", plot_out, "output SVG path");
    plot->add_option("--title", plot_title, "plot title");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen_data(gen_out, gen_domain, gen_train, gen_val, gen_test, gen_frames,
                                gen_seed, gen_weak_delay, gen_weak_kind, gen_force);
        }
        if (pretrain->parsed()) return run_adaptation(adapt_args, true);
        if (adapt_cmd->parsed()) return run_adaptation(adapt_args, false);
        if (eval->parsed()) {
            return cmd_eval(eval_config, eval_data, eval_split, eval_ckpt, eval_tracker,
                            eval_sparse, eval_out, eval_seed, eval_warmup);
        }
        if (plot->parsed()) return cmd_plot(plot_logs, plot_curves, plot_out, plot_title);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
