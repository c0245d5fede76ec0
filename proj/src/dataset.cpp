#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adatrack/synthworld.hpp"

namespace adatrack {

namespace fs = std::filesystem;

namespace {

std::string frame_filename(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.pgm", index + 1);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int read_pgm_token(std::istream& is) {
    // Skips whitespace and '#' comment lines between header tokens.
    while (true) {
        const int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v = 0;
    is >> v;
    if (!is) throw std::runtime_error("pgm: malformed header");
    return v;
}

}  // namespace

void write_pgm(const std::string& path, const Frame& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pgm: cannot open for writing: " + path);
    os << "P5\n" << f.width << " " << f.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(f.width));
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            const double v = std::clamp(static_cast<double>(f.at(x, y)), 0.0, 1.0);
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        os.write(reinterpret_cast<const char*>(row.data()), f.width);
    }
    if (!os) throw std::runtime_error("pgm: write failed: " + path);
}

Frame read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("pgm: expected binary P5: " + path);
    const int w = read_pgm_token(is);
    const int h = read_pgm_token(is);
    const int maxval = read_pgm_token(is);
    if (maxval != 255) throw std::runtime_error("pgm: only maxval 255 supported: " + path);
    is.get();  // single whitespace after header
    Frame f(w, h);
    std::vector<unsigned char> data(static_cast<std::size_t>(w) * h);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!is) throw std::runtime_error("pgm: truncated pixel data: " + path);
    for (std::size_t i = 0; i < data.size(); ++i) {
        f.pixels[i] = static_cast<float>(data[i]) / 255.0f;
    }
    return f;
}

void write_video_dir(const std::string& dir, const Video& v) {
    fs::create_directories(dir);
    for (int t = 0; t < v.length(); ++t) {
        write_pgm((fs::path(dir) / frame_filename(t)).string(),
                  v.frames[static_cast<std::size_t>(t)]);
    }
    std::ofstream gt((fs::path(dir) / "groundtruth.txt").string());
    if (!gt) throw std::runtime_error("dataset: cannot write groundtruth.txt in " + dir);
    for (const BBox& b : v.gt) {
        gt << format_double(b.x) << "," << format_double(b.y) << "," << format_double(b.w) << ","
           << format_double(b.h) << "\n";
    }
}

Video read_video_dir(const std::string& dir) {
    Video v;
    v.id = fs::path(dir).filename().string();
    std::vector<std::string> frame_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".pgm") frame_files.push_back(entry.path().string());
    }
    std::sort(frame_files.begin(), frame_files.end());
    for (const std::string& p : frame_files) v.frames.push_back(read_pgm(p));

    std::ifstream gt((fs::path(dir) / "groundtruth.txt").string());
    if (!gt) throw std::runtime_error("dataset: missing groundtruth.txt in " + dir);
    std::string line;
    int lineno = 0;
    while (std::getline(gt, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        BBox b;
        if (!(ss >> b.x >> b.y >> b.w >> b.h)) {
            throw std::runtime_error("dataset: malformed groundtruth.txt line " +
                                     std::to_string(lineno) + " in " + dir);
        }
        v.gt.push_back(b);
    }
    if (v.gt.size() != v.frames.size()) {
        throw std::runtime_error("dataset: frame/groundtruth count mismatch in " + dir);
    }
    return v;
}

void write_weaklabels(const std::string& dir, const WeakLabelFile& labels) {
    std::ofstream os((fs::path(dir) / "weaklabels.txt").string());
    if (!os) throw std::runtime_error("dataset: cannot write weaklabels.txt in " + dir);
    const char* kind = labels.kind == WeakSupKind::kIoU ? "iou" : "dist";
    for (int t : labels.steps) os << t << "," << kind << "\n";
}

WeakLabelFile read_weaklabels(const std::string& dir) {
    std::ifstream is((fs::path(dir) / "weaklabels.txt").string());
    if (!is) throw std::runtime_error("dataset: missing weaklabels.txt in " + dir);
    WeakLabelFile out;
    std::string line;
    int lineno = 0;
    bool kind_set = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("dataset: malformed weaklabels.txt line " +
                                     std::to_string(lineno) + " in " + dir);
        }
        const int t = std::stoi(line.substr(0, comma));
        const std::string kind = line.substr(comma + 1);
        WeakSupKind k;
        if (kind == "iou") {
            k = WeakSupKind::kIoU;
        } else if (kind == "dist") {
            k = WeakSupKind::kNormDist;
        } else {
            throw std::runtime_error("dataset: unknown weak label kind '" + kind + "' line " +
                                     std::to_string(lineno) + " in " + dir);
        }
        if (kind_set && k != out.kind) {
            throw std::runtime_error("dataset: mixed weak label kinds in " + dir);
        }
        out.kind = k;
        kind_set = true;
        out.steps.insert(t);
    }
    return out;
}

std::vector<std::string> list_split(const std::string& root, const std::string& split) {
    const fs::path dir = fs::path(root) / split;
    if (!fs::exists(dir)) throw std::runtime_error("dataset: missing split directory " + dir.string());
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<Video> load_split(const std::string& root, const std::string& split) {
    std::vector<Video> videos;
    for (const std::string& id : list_split(root, split)) {
        videos.push_back(read_video_dir((fs::path(root) / split / id).string()));
    }
    return videos;
}

}  // namespace adatrack
