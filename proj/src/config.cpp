#include "adatrack/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adatrack/rng.hpp"

namespace adatrack {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "domain",         "data_root",      "out_dir",        "seed",
        "workers",        "sigma",          "gamma",          "chunk_len",
        "n_chunks",       "reverse_prob",   "lr_main",        "lr_value_head",
        "weak_kind",      "weak_delay",     "weak_source",    "max_iterations",
        "eval_every",     "patience",       "curriculum",     "mix",
        "return_direction", "deterministic", "jobs",          "divergence_guard",
        "chi",            "arch.patch",     "arch.recurrent", "selection_mode",
        "teachers",
    };
    return keys;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str(), path);
}

KvConfig KvConfig::from_string(const std::string& text, const std::string& source) {
    KvConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: expected key = value at " + source + ":" +
                                     std::to_string(lineno));
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config: empty key at " + source + ":" +
                                     std::to_string(lineno));
        }
        cfg.kv_[key] = value;
    }
    return cfg;
}

void KvConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

bool KvConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::optional<std::string> KvConfig::find(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) const {
    const auto v = find(key);
    return v.has_value() ? *v : def;
}

int KvConfig::get_int(const std::string& key, int def) const {
    const auto v = find(key);
    if (!v.has_value()) return def;
    try {
        return std::stoi(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not an integer: " + *v);
    }
}

double KvConfig::get_double(const std::string& key, double def) const {
    const auto v = find(key);
    if (!v.has_value()) return def;
    try {
        return std::stod(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not a number: " + *v);
    }
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
    const auto v = find(key);
    if (!v.has_value()) return def;
    if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
    if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
    throw std::runtime_error("config: key '" + key + "' is not a boolean: " + *v);
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t def) const {
    const auto v = find(key);
    if (!v.has_value()) return def;
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not an unsigned integer: " + *v);
    }
}

std::string KvConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : kv_) {
        out += k;
        out += "=";
        out += v;
        out += "\n";
    }
    return out;
}

std::uint64_t KvConfig::hash() const { return fnv1a64(canonical()); }

void KvConfig::ensure_known_keys() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : kv_) {
        if (known_keys().count(k) > 0) continue;
        if (k.rfind("teacher.", 0) == 0) continue;
        unknown.push_back(k);
    }
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw std::runtime_error(msg);
    }
}

WeakSupKind parse_weak_kind(const std::string& s) {
    if (s == "iou") return WeakSupKind::kIoU;
    if (s == "dist" || s == "normdist") return WeakSupKind::kNormDist;
    throw std::runtime_error("config: unknown weak supervision kind: " + s);
}

Architecture make_architecture(const KvConfig& cfg) {
    Architecture arch;
    arch.patch = cfg.get_int("arch.patch", arch.patch);
    arch.recurrent = cfg.get_bool("arch.recurrent", arch.recurrent);
    arch.validate();
    return arch;
}

TeacherPool make_teacher_pool(const KvConfig& cfg) {
    const auto names_value = cfg.find("teachers");
    TeacherPool pool;
    if (!names_value.has_value()) {
        pool = default_teacher_pool();
    } else {
        for (const std::string& name : split_csv(*names_value)) {
            const std::string prefix = "teacher." + name + ".";
            TeacherProfile t;
            t.name = name;
            t.center_noise_std = cfg.get_double(prefix + "center_noise_std", 0.0);
            t.scale_noise_std = cfg.get_double(prefix + "scale_noise_std", 0.0);
            t.drift_prob = cfg.get_double(prefix + "drift_prob", 0.0);
            t.drift_len = cfg.get_int(prefix + "drift_len", 8);
            t.recapture_prob = cfg.get_double(prefix + "recapture_prob", 1.0);
            const std::string skill_prefix = prefix + "skill.";
            for (const auto& [k, v] : cfg.entries()) {
                if (k.rfind(skill_prefix, 0) == 0) {
                    t.skill_map[k.substr(skill_prefix.size())] = std::stod(v);
                }
            }
            t.validate();
            pool.teachers.push_back(std::move(t));
        }
        if (pool.teachers.empty()) throw std::runtime_error("config: teachers list is empty");
    }
    const std::string mode = cfg.get_string("selection_mode", "quality-argmax");
    if (mode == "random") {
        pool.selection_mode = TeacherSelectionMode::kRandom;
    } else if (mode == "quality-argmax") {
        pool.selection_mode = TeacherSelectionMode::kQualityArgmax;
    } else {
        throw std::runtime_error("config: unknown selection_mode: " + mode);
    }
    return pool;
}

TrainConfig make_train_config(const KvConfig& cfg) {
    cfg.ensure_known_keys();
    TrainConfig tc;
    tc.workers = cfg.get_int("workers", tc.workers);
    tc.sigma = cfg.get_double("sigma", tc.sigma);
    tc.gamma = cfg.get_double("gamma", tc.gamma);
    tc.chunk_len = cfg.get_int("chunk_len", tc.chunk_len);
    tc.n_chunks = cfg.get_int("n_chunks", tc.n_chunks);
    tc.reverse_prob = cfg.get_double("reverse_prob", tc.reverse_prob);
    tc.lr_main = cfg.get_double("lr_main", tc.lr_main);
    tc.lr_value_head = cfg.get_double("lr_value_head", tc.lr_value_head);
    tc.weak_kind = parse_weak_kind(cfg.get_string("weak_kind", "iou"));
    tc.weak_delay = cfg.get_int("weak_delay", tc.weak_delay);
    const std::string weak_source = cfg.get_string("weak_source", "delay");
    if (weak_source == "file") {
        tc.weak_from_files = true;
    } else if (weak_source != "delay") {
        throw std::runtime_error("config: weak_source must be 'delay' or 'file'");
    }
    tc.max_iterations = cfg.get_int("max_iterations", tc.max_iterations);
    tc.eval_every = cfg.get_int("eval_every", tc.eval_every);
    tc.patience = cfg.get_int("patience", tc.patience);
    tc.seed = cfg.get_u64("seed", tc.seed);
    tc.domain = cfg.get_string("domain", tc.domain);
    tc.chi = cfg.get_double("chi", tc.chi);
    if (const auto cur = cfg.find("curriculum"); cur.has_value()) {
        tc.curriculum.clear();
        for (const std::string& item : split_csv(*cur)) tc.curriculum.push_back(std::stoi(item));
    }
    const std::string mix = cfg.get_string("mix", "combined");
    if (mix == "combined") {
        tc.mix = WorkerMix::kCombined;
    } else if (mix == "rl-only") {
        tc.mix = WorkerMix::kRlOnly;
    } else if (mix == "kd-only") {
        tc.mix = WorkerMix::kKdOnly;
    } else {
        throw std::runtime_error("config: unknown mix: " + mix);
    }
    const std::string dir = cfg.get_string("return_direction", "future");
    if (dir == "future") {
        tc.return_direction = ReturnDirection::kFuture;
    } else if (dir == "past") {
        tc.return_direction = ReturnDirection::kPast;
    } else {
        throw std::runtime_error("config: return_direction must be 'future' or 'past'");
    }
    tc.deterministic = cfg.get_bool("deterministic", tc.deterministic);
    tc.jobs = cfg.get_int("jobs", tc.jobs);
    tc.divergence_guard = cfg.get_bool("divergence_guard", tc.divergence_guard);
    tc.teacher_pool = make_teacher_pool(cfg);
    tc.validate();
    return tc;
}

}  // namespace adatrack
