#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adatrack/student.hpp"
#include "adatrack/teachers.hpp"
#include "adatrack/trainer.hpp"

namespace adatrack {

/// Flat key=value configuration: one `key = value` per line, `#` comments.
/// Command-line flags override file entries. The canonical sorted rendering
/// feeds the config hash embedded in every output artifact.
class KvConfig {
public:
    KvConfig() = default;
    static KvConfig from_file(const std::string& path);
    static KvConfig from_string(const std::string& text, const std::string& source = "<string>");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& def) const;
    int get_int(const std::string& key, int def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;

    std::string canonical() const;
    std::uint64_t hash() const;

    /// Throws when a key is neither a known fixed key nor under a known
    /// dynamic prefix (teacher.*). Typos fail before any work starts.
    void ensure_known_keys() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

TrainConfig make_train_config(const KvConfig& cfg);
Architecture make_architecture(const KvConfig& cfg);

/// Pool from teacher.* keys; falls back to default_teacher_pool() when the
/// config declares none.
TeacherPool make_teacher_pool(const KvConfig& cfg);

WeakSupKind parse_weak_kind(const std::string& s);

}  // namespace adatrack
