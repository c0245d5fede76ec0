#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace adatrack {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

/// Deterministic standalone SVG line plot. The config hash and seed are
/// embedded as an XML comment.
std::string render_line_plot_svg(const std::vector<PlotSeries>& series, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel,
                                 std::uint64_t config_hash, std::uint64_t seed);

/// (iteration, val_ss) points of a training-log CSV; rows without a
/// validation entry are skipped. Errors carry the offending line number.
PlotSeries series_from_train_log(const std::string& path, const std::string& label);

/// (threshold, fraction) points of a curve CSV.
PlotSeries series_from_curve_csv(const std::string& path, const std::string& label);

}  // namespace adatrack
