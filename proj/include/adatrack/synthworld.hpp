#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adatrack/geometry.hpp"
#include "adatrack/image.hpp"
#include "adatrack/rlcore.hpp"

namespace adatrack {

enum class MotionModel { kLinearBounce, kSinusoidal, kRandomWalk };
enum class Appearance { kSolidBlob, kTexturedBlob, kInvertedModality };

/// Parameters of one synthetic tracking domain.
struct DomainSpec {
    std::string name = "source";
    int frame_size = 128;
    double target_size_min = 18.0;
    double target_size_max = 30.0;
    MotionModel motion = MotionModel::kLinearBounce;
    double speed_min = 1.0;
    double speed_max = 2.5;
    Appearance appearance = Appearance::kSolidBlob;
    double clutter_density = 0.0;  // expected distractor blobs per frame
    double noise_std = 0.0;

    void validate() const;
};

struct Video {
    std::string id;
    std::vector<Frame> frames;
    std::vector<BBox> gt;

    int length() const { return static_cast<int>(frames.size()); }
};

/// Deterministic synthetic video: the ground truth tracks the rendered
/// target exactly and the same (spec, seed, length) always yields the same
/// pixels.
Video generate_video(const DomainSpec& spec, std::uint64_t seed, int length);

/// n_chunks random subsequences of exactly chunk_len consecutive frames,
/// start indices uniform with replacement.
std::vector<Video> chunk_sequences(const Video& v, int chunk_len, int n_chunks,
                                   std::uint64_t seed);

/// With probability p returns the temporally reversed video (frames and
/// ground truth), otherwise the input unchanged.
Video maybe_reverse(const Video& v, double p, std::uint64_t seed);

Video reverse_video(const Video& v);

/// Shipped presets: the source domain plus several shifted target domains.
const std::map<std::string, DomainSpec>& domain_presets();
std::vector<std::string> domain_preset_names();
DomainSpec domain_preset(const std::string& name);

/// Background intensity used when rendering the given appearance.
double background_intensity(Appearance a);

/// Bounding rectangle of all pixels that differ from the background by more
/// than `tol`; used to verify ground-truth exactness on clean renders.
std::optional<BBox> content_bounding_box(const Frame& f, double background, double tol = 0.02);

// ---------------------------------------------------------------------------
// Dataset directory layout: <root>/<split>/<video-id>/{000001.pgm...,
// groundtruth.txt, weaklabels.txt}
// ---------------------------------------------------------------------------

struct WeakLabelFile {
    WeakSupKind kind = WeakSupKind::kIoU;
    std::set<int> steps;
};

void write_video_dir(const std::string& dir, const Video& v);
Video read_video_dir(const std::string& dir);

void write_weaklabels(const std::string& dir, const WeakLabelFile& labels);
WeakLabelFile read_weaklabels(const std::string& dir);

void write_pgm(const std::string& path, const Frame& f);
Frame read_pgm(const std::string& path);

/// Video ids (directory names) of one split, sorted.
std::vector<std::string> list_split(const std::string& root, const std::string& split);
std::vector<Video> load_split(const std::string& root, const std::string& split);

}  // namespace adatrack
