#pragma once

#include <array>
#include <vector>

#include "adatrack/image.hpp"

namespace adatrack {

/// Axis-aligned box in pixel coordinates; (x, y) is the top-left corner.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    BBox() = default;
    BBox(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {}

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    double area() const { return w * h; }
    bool valid() const;

    bool operator==(const BBox&) const = default;
};

/// Relative box motion (Δx, Δy, Δw, Δh), each component in [-1, 1].
/// Translations are expressed in units of the previous box extent and the
/// scale terms are multiplicative.
struct Action {
    double dx = 0.0;
    double dy = 0.0;
    double dw = 0.0;
    double dh = 0.0;

    Action() = default;
    Action(double dx_, double dy_, double dw_, double dh_) : dx(dx_), dy(dy_), dw(dw_), dh(dh_) {}

    std::array<double, 4> to_array() const { return {dx, dy, dw, dh}; }
    static Action from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
    Action clamped() const;

    bool operator==(const Action&) const = default;
};

/// Tracker observation: two context crops of consecutive frames, resampled
/// to resolution x resolution, intensities in [0, 1].
struct State {
    int resolution = 0;
    std::vector<double> patch_prev;
    std::vector<double> patch_cur;
};

/// Minimum box side after applying an action, in pixels.
inline constexpr double kMinBoxSide = 2.0;

/// Intersection-over-union of two valid boxes; 0 when disjoint.
double iou(const BBox& b, const BBox& g);

/// 1 - min(center distance, 20)/20. The 20 px truncation mirrors the
/// standard precision-score threshold.
double norm_dist_score(const BBox& b, const BBox& g);

/// Moves/rescales `prev` by `a`:
///   x' = x + dx*w, y' = y + dy*h, w' = w*(1+dw), h' = h*(1+dh),
/// with the resulting sides clamped to at least kMinBoxSide.
BBox apply_action(const BBox& prev, const Action& a);

/// The action that maps `prev` onto `target` under apply_action, with each
/// component clamped to [-1, 1] when the exact solution falls outside.
Action invert_action(const BBox& prev, const BBox& target);

/// Crops both frames around `prev` scaled by `chi` about its center and
/// resamples each crop to res x res with bilinear interpolation.
/// Regions outside the frame read as zero intensity.
State crop_state(const Frame& frame_prev, const Frame& frame_cur, const BBox& prev, double chi,
                 int res);

/// Bilinear sample of a frame at a continuous point, half-pixel centers,
/// zero outside the frame bounds.
double sample_bilinear(const Frame& f, double x, double y);

}  // namespace adatrack
