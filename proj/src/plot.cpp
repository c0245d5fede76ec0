#include "adatrack/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adatrack/trainer.hpp"

namespace adatrack {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

const char* kPalette[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400", "#16a085"};

}  // namespace

std::string render_line_plot_svg(const std::vector<PlotSeries>& series, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel,
                                 std::uint64_t config_hash, std::uint64_t seed) {
    if (series.empty()) throw std::invalid_argument("plot: no series to draw");
    for (const PlotSeries& s : series) {
        if (s.points.empty()) throw std::invalid_argument("plot: series '" + s.label + "' empty");
    }

    double xmin = series[0].points[0].first, xmax = xmin;
    double ymin = series[0].points[0].second, ymax = ymin;
    for (const PlotSeries& s : series) {
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    // A little vertical headroom.
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double width = 640.0, height = 420.0;
    const double ml = 64.0, mr = 18.0, mt = 40.0, mb = 52.0;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    char meta[96];
    std::snprintf(meta, sizeof(meta), "<!-- config_hash=%016llx seed=%llu -->\n",
                  static_cast<unsigned long long>(config_hash),
                  static_cast<unsigned long long>(seed));
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << meta
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // Axes with five ticks per side.
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        svg << "<line x1=\"" << fmt(sx(fx)) << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt(sx(fx))
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(fx)
            << "</text>\n";
        svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\"" << ml
            << "\" y2=\"" << fmt(sy(fy)) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(sy(fy) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(fy)
            << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << xlabel
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << ylabel << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[s].points) {
            svg << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << ml + pw - 6 << "\" y=\"" << mt + 16 + 16 * static_cast<double>(s)
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\""
            << color << "\">" << series[s].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

PlotSeries series_from_train_log(const std::string& path, const std::string& label) {
    const TrainLog log = read_train_log_csv(path);
    PlotSeries s;
    s.label = label;
    for (const TrainLogRow& row : log.rows) {
        if (row.val_ss.has_value()) s.points.emplace_back(row.iteration, *row.val_ss);
    }
    if (s.points.empty()) {
        throw std::runtime_error("plot: no validation entries in " + path);
    }
    return s;
}

PlotSeries series_from_curve_csv(const std::string& path, const std::string& label) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("plot: cannot open " + path);
    PlotSeries s;
    s.label = label;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("plot: malformed CSV line " + std::to_string(lineno) +
                                     " in " + path);
        }
        try {
            s.points.emplace_back(std::stod(line.substr(0, comma)),
                                  std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw std::runtime_error("plot: malformed CSV line " + std::to_string(lineno) +
                                     " in " + path);
        }
    }
    if (s.points.empty()) throw std::runtime_error("plot: no data rows in " + path);
    return s;
}

}  // namespace adatrack
