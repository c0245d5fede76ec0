#include "adatrack/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adatrack/rng.hpp"

namespace adatrack {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct BlobState {
    double cx = 0.0, cy = 0.0;
    double w = 0.0, h = 0.0;
    double vx = 0.0, vy = 0.0;
    double intensity = 0.5;
    // size oscillation
    double size_amp = 0.0, size_period = 60.0, size_phase = 0.0;
    // sinusoidal motion
    double base_x = 0.0, base_y = 0.0, amp_x = 0.0, amp_y = 0.0;
    double omega_x = 0.0, omega_y = 0.0, phase_x = 0.0, phase_y = 0.0;
    double nominal_speed = 1.0;
};

double size_factor(const BlobState& b, int t) {
    return 1.0 + b.size_amp * std::sin(2.0 * kPi * t / b.size_period + b.size_phase);
}

void reflect(double& c, double& v, double lo, double hi) {
    if (lo >= hi) {  // box barely fits; pin to the middle
        c = (lo + hi) / 2.0;
        v = 0.0;
        return;
    }
    while (c < lo || c > hi) {
        if (c < lo) {
            c = 2.0 * lo - c;
            v = -v;
        } else {
            c = 2.0 * hi - c;
            v = -v;
        }
    }
}

void advance(BlobState& b, MotionModel motion, int t, double frame_size, Rng& rng) {
    const double margin_x = b.w * (1.0 + b.size_amp) / 2.0 + 1.0;
    const double margin_y = b.h * (1.0 + b.size_amp) / 2.0 + 1.0;
    switch (motion) {
        case MotionModel::kLinearBounce:
            b.cx += b.vx;
            b.cy += b.vy;
            break;
        case MotionModel::kSinusoidal:
            b.cx = b.base_x + b.amp_x * std::sin(b.omega_x * t + b.phase_x);
            b.cy = b.base_y + b.amp_y * std::sin(b.omega_y * t + b.phase_y);
            break;
        case MotionModel::kRandomWalk: {
            b.vx = 0.9 * b.vx + rng.gaussian(0.0, 0.45 * b.nominal_speed);
            b.vy = 0.9 * b.vy + rng.gaussian(0.0, 0.45 * b.nominal_speed);
            const double vmax = 1.8 * b.nominal_speed;
            b.vx = std::clamp(b.vx, -vmax, vmax);
            b.vy = std::clamp(b.vy, -vmax, vmax);
            b.cx += b.vx;
            b.cy += b.vy;
            break;
        }
    }
    reflect(b.cx, b.vx, margin_x, frame_size - margin_x);
    reflect(b.cy, b.vy, margin_y, frame_size - margin_y);
}

/// Draws a filled ellipse inscribed in the box (cx, cy, w, h). Texture, when
/// enabled, rides in object coordinates so it moves with the blob.
void draw_blob(Frame& f, double cx, double cy, double w, double h, double intensity,
               bool textured) {
    const double rx = w / 2.0;
    const double ry = h / 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(cx + rx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(cy + ry)));
    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            const double dx = (px + 0.5 - cx) / rx;
            const double dy = (py + 0.5 - cy) / ry;
            const double e = dx * dx + dy * dy;
            if (e >= 1.0) continue;
            double v = intensity;
            if (textured) {
                const double xo = (px + 0.5 - cx);
                const double yo = (py + 0.5 - cy);
                v *= 0.55 + 0.45 * (0.5 + 0.5 * std::sin(0.9 * xo) * std::sin(0.9 * yo));
            }
            f.at(px, py) = static_cast<float>(v);
        }
    }
}

struct Palette {
    double background;
    double target;
    double clutter_lo, clutter_hi;
};

Palette palette(Appearance a) {
    switch (a) {
        case Appearance::kInvertedModality:
            // Contrast flip: dark target on a mid-bright background.
            return {0.55, 0.06, 0.3, 0.45};
        case Appearance::kSolidBlob:
        case Appearance::kTexturedBlob:
        default:
            return {0.0, 0.9, 0.35, 0.6};
    }
}

}  // namespace

double background_intensity(Appearance a) { return palette(a).background; }

void DomainSpec::validate() const {
    if (frame_size < 16) throw std::invalid_argument("DomainSpec: frame_size too small");
    if (!(target_size_min > 0.0) || target_size_max < target_size_min) {
        throw std::invalid_argument("DomainSpec: empty target size range");
    }
    if (!(speed_min >= 0.0) || speed_max < speed_min) {
        throw std::invalid_argument("DomainSpec: empty speed range");
    }
    if (speed_max >= frame_size / 4.0) {
        throw std::invalid_argument("DomainSpec: speed must stay below frame_size/4");
    }
    if (clutter_density < 0.0) throw std::invalid_argument("DomainSpec: negative clutter");
    if (noise_std < 0.0) throw std::invalid_argument("DomainSpec: negative noise");
}

Video generate_video(const DomainSpec& spec, std::uint64_t seed, int length) {
    spec.validate();
    if (length < 2) throw std::invalid_argument("generate_video: length must be >= 2");

    Rng rng(derive_seed(seed, "synthvideo"));
    const Palette pal = palette(spec.appearance);
    const double fs = spec.frame_size;

    BlobState target;
    target.w = rng.uniform(spec.target_size_min, spec.target_size_max);
    target.h = rng.uniform(spec.target_size_min, spec.target_size_max);
    target.nominal_speed = rng.uniform(spec.speed_min, spec.speed_max);
    target.intensity = pal.target;
    target.size_amp = 0.08;
    target.size_period = rng.uniform(40.0, 90.0);
    target.size_phase = rng.uniform(0.0, 2.0 * kPi);
    target.cx = rng.uniform(fs * 0.3, fs * 0.7);
    target.cy = rng.uniform(fs * 0.3, fs * 0.7);
    {
        const double dir = rng.uniform(0.0, 2.0 * kPi);
        target.vx = target.nominal_speed * std::cos(dir);
        target.vy = target.nominal_speed * std::sin(dir);
    }
    if (spec.motion == MotionModel::kSinusoidal) {
        target.base_x = target.cx;
        target.base_y = target.cy;
        target.omega_x = rng.uniform(0.06, 0.16);
        target.omega_y = rng.uniform(0.06, 0.16);
        target.phase_x = rng.uniform(0.0, 2.0 * kPi);
        target.phase_y = rng.uniform(0.0, 2.0 * kPi);
        target.amp_x = std::min(target.nominal_speed / target.omega_x, fs / 2.0 - target.w);
        target.amp_y = std::min(target.nominal_speed / target.omega_y, fs / 2.0 - target.h);
    }

    // Clutter blobs move with the plain bounce model whatever the target does.
    int n_clutter = static_cast<int>(std::floor(spec.clutter_density));
    if (rng.uniform() < spec.clutter_density - n_clutter) n_clutter += 1;
    std::vector<BlobState> clutter(static_cast<std::size_t>(n_clutter));
    for (BlobState& c : clutter) {
        c.w = rng.uniform(0.5, 1.2) * target.w;
        c.h = rng.uniform(0.5, 1.2) * target.h;
        c.nominal_speed = rng.uniform(spec.speed_min, spec.speed_max);
        c.intensity = rng.uniform(pal.clutter_lo, pal.clutter_hi);
        c.cx = rng.uniform(c.w, fs - c.w);
        c.cy = rng.uniform(c.h, fs - c.h);
        const double dir = rng.uniform(0.0, 2.0 * kPi);
        c.vx = c.nominal_speed * std::cos(dir);
        c.vy = c.nominal_speed * std::sin(dir);
    }

    Video v;
    v.id = spec.name + "-" + std::to_string(seed);
    v.frames.reserve(static_cast<std::size_t>(length));
    v.gt.reserve(static_cast<std::size_t>(length));

    for (int t = 0; t < length; ++t) {
        if (t > 0) {
            advance(target, spec.motion, t, fs, rng);
            for (BlobState& c : clutter) advance(c, MotionModel::kLinearBounce, t, fs, rng);
        }
        Frame f(spec.frame_size, spec.frame_size, static_cast<float>(pal.background));
        for (const BlobState& c : clutter) {
            draw_blob(f, c.cx, c.cy, c.w, c.h, c.intensity, false);
        }
        const double sf = size_factor(target, t);
        const double tw = target.w * sf;
        const double th = target.h * sf;
        draw_blob(f, target.cx, target.cy, tw, th, target.intensity,
                  spec.appearance == Appearance::kTexturedBlob);
        if (spec.noise_std > 0.0) {
            for (float& px : f.pixels) {
                px = static_cast<float>(
                    std::clamp(px + rng.gaussian(0.0, spec.noise_std), 0.0, 1.0));
            }
        }
        v.frames.push_back(std::move(f));
        v.gt.emplace_back(target.cx - tw / 2.0, target.cy - th / 2.0, tw, th);
    }
    return v;
}

std::vector<Video> chunk_sequences(const Video& v, int chunk_len, int n_chunks,
                                   std::uint64_t seed) {
    if (chunk_len < 2) throw std::invalid_argument("chunk_sequences: chunk_len must be >= 2");
    if (v.length() < chunk_len) {
        throw std::invalid_argument("chunk_sequences: video shorter than chunk_len");
    }
    Rng rng(derive_seed(seed, "chunks"));
    std::vector<Video> out;
    out.reserve(static_cast<std::size_t>(n_chunks));
    const int max_start = v.length() - chunk_len;
    for (int i = 0; i < n_chunks; ++i) {
        const int start = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_start + 1)));
        Video c;
        c.id = v.id + "#" + std::to_string(start);
        c.frames.assign(v.frames.begin() + start, v.frames.begin() + start + chunk_len);
        c.gt.assign(v.gt.begin() + start, v.gt.begin() + start + chunk_len);
        out.push_back(std::move(c));
    }
    return out;
}

Video reverse_video(const Video& v) {
    Video r;
    r.id = v.id + "~rev";
    r.frames.assign(v.frames.rbegin(), v.frames.rend());
    r.gt.assign(v.gt.rbegin(), v.gt.rend());
    return r;
}

Video maybe_reverse(const Video& v, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("maybe_reverse: p in [0,1]");
    Rng rng(derive_seed(seed, "reverse"));
    if (rng.uniform() < p) return reverse_video(v);
    return v;
}

const std::map<std::string, DomainSpec>& domain_presets() {
    static const std::map<std::string, DomainSpec> presets = [] {
        std::map<std::string, DomainSpec> m;
        DomainSpec source;
        source.name = "source";
        source.appearance = Appearance::kSolidBlob;
        source.motion = MotionModel::kLinearBounce;
        source.target_size_min = 18;
        source.target_size_max = 30;
        source.speed_min = 1.0;
        source.speed_max = 2.5;
        source.clutter_density = 0.0;
        source.noise_std = 0.005;
        m[source.name] = source;

        DomainSpec drone;  // small targets seen from above, jittery motion
        drone.name = "drone-like";
        drone.appearance = Appearance::kSolidBlob;
        drone.motion = MotionModel::kRandomWalk;
        drone.target_size_min = 7;
        drone.target_size_max = 13;
        drone.speed_min = 1.0;
        drone.speed_max = 2.5;
        drone.clutter_density = 2.0;
        drone.noise_std = 0.01;
        m[drone.name] = drone;

        DomainSpec thermal;  // same shapes, inverted contrast
        thermal.name = "thermal-like";
        thermal.appearance = Appearance::kInvertedModality;
        thermal.motion = MotionModel::kLinearBounce;
        thermal.target_size_min = 16;
        thermal.target_size_max = 28;
        thermal.speed_min = 1.0;
        thermal.speed_max = 2.5;
        thermal.clutter_density = 1.0;
        thermal.noise_std = 0.02;
        m[thermal.name] = thermal;

        DomainSpec underwater;  // textured target swaying on smooth paths
        underwater.name = "underwater-like";
        underwater.appearance = Appearance::kTexturedBlob;
        underwater.motion = MotionModel::kSinusoidal;
        underwater.target_size_min = 14;
        underwater.target_size_max = 26;
        underwater.speed_min = 0.5;
        underwater.speed_max = 2.0;
        underwater.clutter_density = 1.5;
        underwater.noise_std = 0.03;
        m[underwater.name] = underwater;

        DomainSpec driving;  // fast lateral motion, moderate size
        driving.name = "driving-like";
        driving.appearance = Appearance::kSolidBlob;
        driving.motion = MotionModel::kLinearBounce;
        driving.target_size_min = 10;
        driving.target_size_max = 20;
        driving.speed_min = 2.5;
        driving.speed_max = 4.0;
        driving.clutter_density = 2.0;
        driving.noise_std = 0.01;
        m[driving.name] = driving;

        DomainSpec manipulation;  // large uncommon-looking target, slow drift
        manipulation.name = "manipulation-like";
        manipulation.appearance = Appearance::kTexturedBlob;
        manipulation.motion = MotionModel::kRandomWalk;
        manipulation.target_size_min = 20;
        manipulation.target_size_max = 34;
        manipulation.speed_min = 0.5;
        manipulation.speed_max = 1.5;
        manipulation.clutter_density = 0.5;
        manipulation.noise_std = 0.01;
        m[manipulation.name] = manipulation;
        return m;
    }();
    return presets;
}

std::vector<std::string> domain_preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, spec] : domain_presets()) names.push_back(name);
    return names;
}

DomainSpec domain_preset(const std::string& name) {
    const auto& presets = domain_presets();
    const auto it = presets.find(name);
    if (it == presets.end()) throw std::invalid_argument("unknown domain preset: " + name);
    return it->second;
}

std::optional<BBox> content_bounding_box(const Frame& f, double background, double tol) {
    int min_x = f.width, min_y = f.height, max_x = -1, max_y = -1;
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            if (std::abs(f.at(x, y) - background) > tol) {
                min_x = std::min(min_x, x);
                min_y = std::min(min_y, y);
                max_x = std::max(max_x, x);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0) return std::nullopt;
    return BBox(min_x, min_y, max_x - min_x + 1.0, max_y - min_y + 1.0);
}

}  // namespace adatrack
