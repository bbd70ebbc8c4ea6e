#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relu/matrix.hpp"
#include "relu/metrics.hpp"
#include "relu/serialize.hpp"

namespace relu {

// Self-contained SVG output on a fixed canvas. Text is assembled with fixed
// float formatting, so a deterministic input produces identical bytes.

namespace svg {

constexpr int kCanvas = 480;
constexpr int kMargin = 56;
constexpr int kPlot = kCanvas - 2 * kMargin;

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string value_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// Light-to-dark blue ramp; t in [0, 1].
inline std::string blues(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto lerp = [t](double a, double b) { return a + t * (b - a); };
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rgb(%d,%d,%d)", static_cast<int>(lerp(247, 8)),
                  static_cast<int>(lerp(251, 48)), static_cast<int>(lerp(255, 107)));
    return buf;
}

inline const char* series_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % 8];
}

inline std::string document(const std::string& body) {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(kCanvas) + "\" height=\"" + std::to_string(kCanvas) +
                      "\" viewBox=\"0 0 " + std::to_string(kCanvas) + " " + std::to_string(kCanvas) +
                      "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += body;
    out += "</svg>\n";
    return out;
}

inline std::string text(double x, double y, const std::string& s, int size = 12,
                        const std::string& anchor = "start") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

// Square-cell heatmap with the color scale annotated by its min/max.
inline std::string heatmap(const Matrix& m, const std::string& title) {
    double lo = m.data.empty() ? 0.0 : m.data[0];
    double hi = lo;
    for (double v : m.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? (hi - lo) : 1.0;

    std::string body = text(kCanvas / 2.0, kMargin / 2.0, title, 14, "middle");
    const double cell_w = static_cast<double>(kPlot) / static_cast<double>(m.cols);
    const double cell_h = static_cast<double>(kPlot) / static_cast<double>(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double t = (m(r, c) - lo) / span;
            body += "<rect x=\"" + num(kMargin + cell_w * static_cast<double>(c)) + "\" y=\"" +
                    num(kMargin + cell_h * static_cast<double>(r)) + "\" width=\"" + num(cell_w) +
                    "\" height=\"" + num(cell_h) + "\" fill=\"" + blues(t) +
                    "\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
        }
    }
    for (std::size_t r = 0; r < m.rows; ++r)
        body += text(kMargin - 6, kMargin + cell_h * (static_cast<double>(r) + 0.65),
                     std::to_string(r), 11, "end");
    for (std::size_t c = 0; c < m.cols; ++c)
        body += text(kMargin + cell_w * (static_cast<double>(c) + 0.5), kMargin + kPlot + 16,
                     std::to_string(c), 11, "middle");
    body += text(kMargin, kCanvas - 12,
                 "scale: min=" + value_label(lo) + " max=" + value_label(hi), 12);
    return document(body);
}

struct CurveSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; // x, y in [0, 1]
};

// Unit-square curve plot (ROC, risk-coverage).
inline std::string curves(const std::vector<CurveSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          bool diagonal = false) {
    const auto px = [](double x) { return kMargin + x * kPlot; };
    const auto py = [](double y) { return kMargin + (1.0 - y) * kPlot; };

    std::string body = text(kCanvas / 2.0, kMargin / 2.0, title, 14, "middle");
    body += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" +
            std::to_string(kPlot) + "\" height=\"" + std::to_string(kPlot) +
            "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        body += text(px(tick), kMargin + kPlot + 16, num(tick), 10, "middle");
        body += text(kMargin - 6, py(tick) + 4, num(tick), 10, "end");
    }
    body += text(kMargin + kPlot / 2.0, kCanvas - 12, x_label, 12, "middle");
    body += text(14, kMargin + kPlot / 2.0, y_label, 12, "middle");
    if (diagonal)
        body += "<line x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) +
                "\" y2=\"" + num(py(1)) + "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string pts;
        for (const auto& [x, y] : series[s].points)
            pts += num(px(std::clamp(x, 0.0, 1.0))) + "," + num(py(std::clamp(y, 0.0, 1.0))) + " ";
        body += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" +
                series_color(s) + "\" stroke-width=\"1.5\"/>\n";
        body += "<rect x=\"" + num(kMargin + 8) + "\" y=\"" +
                num(kMargin + 10 + 16 * static_cast<double>(s)) +
                "\" width=\"12\" height=\"4\" fill=\"" + series_color(s) + "\"/>\n";
        body += text(kMargin + 26, kMargin + 16 + 16 * static_cast<double>(s), series[s].label, 11);
    }
    return document(body);
}

struct RadarSeries {
    std::string label;
    std::vector<double> values; // aligned with the axis names
};

// Radar plot over named axes; values are scaled by the maximum across series.
inline std::string radar(const std::vector<std::string>& axes,
                         const std::vector<RadarSeries>& series, const std::string& title) {
    const double cx = kCanvas / 2.0, cy = kCanvas / 2.0 + 10;
    const double radius = kPlot / 2.0 - 10;
    const std::size_t n = axes.size();

    double vmax = 0.0;
    for (const auto& s : series)
        for (double v : s.values) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) vmax = 1.0;

    const auto point = [&](std::size_t axis, double value) {
        const double angle = 2.0 * 3.14159265358979312 * static_cast<double>(axis) /
                                 static_cast<double>(n) -
                             3.14159265358979312 / 2.0;
        const double rr = radius * std::clamp(value / vmax, 0.0, 1.0);
        return std::make_pair(cx + rr * std::cos(angle), cy + rr * std::sin(angle));
    };

    std::string body = text(kCanvas / 2.0, kMargin / 2.0, title, 14, "middle");
    for (std::size_t a = 0; a < n; ++a) {
        const auto [x, y] = point(a, vmax);
        body += "<line x1=\"" + num(cx) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(x) + "\" y2=\"" +
                num(y) + "\" stroke=\"#cccccc\"/>\n";
        body += text(x, y - 4, axes[a], 10, "middle");
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string pts;
        for (std::size_t a = 0; a < n; ++a) {
            const auto [x, y] = point(a, series[s].values[a]);
            pts += num(x) + "," + num(y) + " ";
        }
        if (n > 0) {
            const auto [x0, y0] = point(0, series[s].values[0]);
            pts += num(x0) + "," + num(y0);
        }
        body += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + series_color(s) +
                "\" stroke-width=\"1.5\"/>\n";
        body += text(kMargin, kCanvas - 12 - 14 * static_cast<double>(s),
                     series[s].label + " (max " + value_label(vmax) + ")", 11);
    }
    return document(body);
}

} // namespace svg

// What a plotting run may contain; anything absent is skipped with a warning.
struct PlotInputs {
    std::vector<MetricsReport> reports; // one ROC/RC series per report
    std::optional<Matrix> observer;
    std::optional<Matrix> confusion;
    std::vector<std::string> radar_axes;
    std::vector<svg::RadarSeries> radar_series;
};

// Emits the available plots into `dir` and returns the written paths.
inline std::vector<std::string> render_plots(const PlotInputs& inputs, const std::string& dir) {
    std::vector<std::string> written;
    const auto emit = [&](const std::string& name, const std::string& content) {
        const std::string path = dir + "/" + name;
        io::write_text_file(path, content);
        written.push_back(path);
    };

    if (inputs.observer)
        emit("d_matrix.svg", svg::heatmap(*inputs.observer, "learned observer matrix"));
    else
        std::cerr << "plot: no observer matrix, skipping d_matrix.svg\n";

    if (inputs.confusion)
        emit("confusion.svg", svg::heatmap(*inputs.confusion, "confusion matrix"));
    else
        std::cerr << "plot: no confusion matrix, skipping confusion.svg\n";

    std::vector<svg::CurveSeries> roc, rc;
    for (const auto& r : inputs.reports) {
        if (!r.roc_points.empty()) {
            svg::CurveSeries s;
            s.label = r.method + " seed " + std::to_string(r.seed);
            s.points.emplace_back(0.0, 0.0);
            for (const auto& p : r.roc_points) s.points.emplace_back(p.fpr, p.tpr);
            roc.push_back(std::move(s));
        }
        if (!r.rc_points.empty()) {
            svg::CurveSeries s;
            s.label = r.method + " seed " + std::to_string(r.seed);
            for (const auto& p : r.rc_points) s.points.emplace_back(p.coverage, p.risk);
            rc.push_back(std::move(s));
        }
    }
    if (!roc.empty())
        emit("roc.svg", svg::curves(roc, "ROC", "false positive rate", "true positive rate", true));
    else
        std::cerr << "plot: no ROC points, skipping roc.svg\n";
    if (!rc.empty())
        emit("risk_coverage.svg", svg::curves(rc, "risk vs coverage", "coverage", "risk", false));
    else
        std::cerr << "plot: no risk-coverage points, skipping risk_coverage.svg\n";

    if (!inputs.radar_axes.empty() && !inputs.radar_series.empty())
        emit("radar.svg", svg::radar(inputs.radar_axes, inputs.radar_series, "per-axis comparison"));

    return written;
}

} // namespace relu
