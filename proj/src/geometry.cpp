#include "adatrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adatrack {

namespace {

void require_valid(const BBox& b, const char* who) {
    if (!b.valid()) {
        throw std::invalid_argument(std::string(who) + ": box must have positive finite extent");
    }
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

bool BBox::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
           w > 0.0 && h > 0.0;
}

Action Action::clamped() const {
    return {clamp_unit(dx), clamp_unit(dy), clamp_unit(dw), clamp_unit(dh)};
}

double iou(const BBox& b, const BBox& g) {
    require_valid(b, "iou");
    require_valid(g, "iou");
    const double ix = std::max(0.0, std::min(b.x + b.w, g.x + g.w) - std::max(b.x, g.x));
    const double iy = std::max(0.0, std::min(b.y + b.h, g.y + g.h) - std::max(b.y, g.y));
    const double inter = ix * iy;
    if (inter <= 0.0) return 0.0;
    // Rounding in (x+w)-x can push the ratio a few ulp past 1 for
    // coincident boxes; the true value never exceeds 1.
    return std::min(inter / (b.area() + g.area() - inter), 1.0);
}

double norm_dist_score(const BBox& b, const BBox& g) {
    require_valid(b, "norm_dist_score");
    require_valid(g, "norm_dist_score");
    const double d = std::hypot(b.cx() - g.cx(), b.cy() - g.cy());
    return 1.0 - std::min(d, 20.0) / 20.0;
}

BBox apply_action(const BBox& prev, const Action& a) {
    require_valid(prev, "apply_action");
    BBox out;
    out.x = prev.x + a.dx * prev.w;
    out.y = prev.y + a.dy * prev.h;
    out.w = std::max(prev.w * (1.0 + a.dw), kMinBoxSide);
    out.h = std::max(prev.h * (1.0 + a.dh), kMinBoxSide);
    return out;
}

Action invert_action(const BBox& prev, const BBox& target) {
    require_valid(prev, "invert_action");
    require_valid(target, "invert_action");
    Action a;
    a.dx = clamp_unit((target.x - prev.x) / prev.w);
    a.dy = clamp_unit((target.y - prev.y) / prev.h);
    a.dw = clamp_unit(target.w / prev.w - 1.0);
    a.dh = clamp_unit(target.h / prev.h - 1.0);
    return a;
}

double sample_bilinear(const Frame& f, double x, double y) {
    // Pixel (px, py) holds the intensity at center (px + 0.5, py + 0.5).
    const double fx = x - 0.5;
    const double fy = y - 0.5;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0;
    const double ay = fy - y0;

    auto read = [&](int px, int py) -> double {
        if (px < 0 || py < 0 || px >= f.width || py >= f.height) return 0.0;
        return f.at(px, py);
    };

    const double top = read(x0, y0) * (1.0 - ax) + read(x0 + 1, y0) * ax;
    const double bot = read(x0, y0 + 1) * (1.0 - ax) + read(x0 + 1, y0 + 1) * ax;
    return top * (1.0 - ay) + bot * ay;
}

State crop_state(const Frame& frame_prev, const Frame& frame_cur, const BBox& prev, double chi,
                 int res) {
    if (frame_prev.empty() || frame_cur.empty()) {
        throw std::invalid_argument("crop_state: empty frame");
    }
    require_valid(prev, "crop_state");
    if (chi < 1.0) throw std::invalid_argument("crop_state: chi must be >= 1");
    if (res <= 0) throw std::invalid_argument("crop_state: resolution must be positive");

    const double ww = prev.w * chi;
    const double wh = prev.h * chi;
    const double wx = prev.cx() - ww / 2.0;
    const double wy = prev.cy() - wh / 2.0;

    State s;
    s.resolution = res;
    s.patch_prev.resize(static_cast<std::size_t>(res) * res);
    s.patch_cur.resize(static_cast<std::size_t>(res) * res);
    for (int i = 0; i < res; ++i) {
        const double v = wy + (i + 0.5) * wh / res;
        for (int j = 0; j < res; ++j) {
            const double u = wx + (j + 0.5) * ww / res;
            s.patch_prev[static_cast<std::size_t>(i) * res + j] = sample_bilinear(frame_prev, u, v);
            s.patch_cur[static_cast<std::size_t>(i) * res + j] = sample_bilinear(frame_cur, u, v);
        }
    }
    return s;
}

}  // namespace adatrack
