#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "structsens/bifurcation.hpp"
#include "structsens/sim.hpp"

namespace structsens {

namespace svg_detail {

struct Series {
    std::string label;
    std::string color;
    bool dashed = false;
    std::vector<std::pair<double, double>> pts;
};

inline const char* palette(int i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % 8];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Minimal static plot: frame, ticks, polylines, legend. Data ranges are
// recorded in a comment so plots stay machine-checkable.
inline void render(const std::vector<Series>& series, const std::string& path,
                   const std::string& x_label, const std::string& y_label,
                   const std::string& provenance,
                   const std::vector<double>& vlines = {}) {
    bool any = false;
    for (const auto& s : series) any = any || !s.pts.empty();
    if (!any) throw config_error("emit_plot: nothing to plot");

    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.pts) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad;
    y1 += ypad;

    const int W = 760, H = 520, ml = 70, mr = 160, mt = 40, mb = 55;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<!-- " << provenance << " -->\n";
    os << "<!-- x-range [" << num(x0) << "," << num(x1) << "] y-range [" << num(y0) << ","
       << num(y1) << "] -->\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x0 + (x1 - x0) * i / 5.0;
        const double yv = y0 + (y1 - y0) * i / 5.0;
        os << "<line x1=\"" << px(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(xv) << "\" y2=\""
           << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 20
           << "\" font-size=\"11\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml << "\" y2=\""
           << py(yv) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
           << "\" font-size=\"11\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
       << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
    os << "<text x=\"18\" y=\"" << mt + ph / 2
       << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << mt + ph / 2 << ")\">" << y_label << "</text>\n";
    for (double v : vlines) {
        if (v < x0 || v > x1) continue;
        os << "<line x1=\"" << px(v) << "\" y1=\"" << mt << "\" x2=\"" << px(v) << "\" y2=\""
           << mt + ph << "\" stroke=\"#444\" stroke-dasharray=\"5,4\"/>\n";
        os << "<text x=\"" << px(v) + 3 << "\" y=\"" << mt + 14 << "\" font-size=\"11\">"
           << num(v) << "</text>\n";
    }
    for (const auto& s : series) {
        if (s.pts.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\""
           << (s.dashed ? " stroke-dasharray=\"4,3\"" : "") << " stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : s.pts) os << num(px(x)) << "," << num(py(y)) << " ";
        os << "\"/>\n";
    }
    int li = 0;
    for (const auto& s : series) {
        const double ly = mt + 16 + 18 * li++;
        os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
           << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\""
           << (s.dashed ? " stroke-dasharray=\"4,3\"" : "") << " stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
           << s.label << "</text>\n";
    }
    os << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write SVG: " + path);
    out << os.str();
    if (!out) throw io_error("failed writing SVG: " + path);
}

}  // namespace svg_detail

// Bifurcation diagram: per initial condition, the prey min and max branches
// against K, with the Hopf location marked when known.
inline void emit_plot(const BifurcationDiagram& diag, const std::string& path,
                      const std::string& title, const std::string& provenance) {
    if (diag.cells.empty()) throw config_error("emit_plot: empty diagram");
    std::vector<svg_detail::Series> series;
    std::vector<std::string> labels;
    for (int j = 0; j < diag.n_ic; ++j) labels.push_back(diag.cell(0, j).ic_label);
    int color = 0;
    for (int j = 0; j < diag.n_ic; ++j) {
        svg_detail::Series lo{labels[j] + " min", svg_detail::palette(color), true, {}};
        svg_detail::Series hi{labels[j] + " max", svg_detail::palette(color), false, {}};
        ++color;
        for (std::size_t k = 0; k < diag.K_grid.size(); ++k) {
            const DiagramCell& c = diag.cell(static_cast<int>(k), j);
            if (c.failed) continue;
            lo.pts.push_back({c.K, c.ext.x_min});
            hi.pts.push_back({c.K, c.ext.x_max});
        }
        series.push_back(hi);
        series.push_back(lo);
    }
    std::vector<double> vlines;
    if (diag.hopf_K) vlines.push_back(*diag.hopf_K);
    if (diag.lc_saddle_K) vlines.push_back(*diag.lc_saddle_K);
    svg_detail::render(series, path, "carrying capacity K (" + title + ")", "prey density",
                       provenance, vlines);
}

// Time series: prey and predator, plus the OU path when the run was
// stochastic.
inline void emit_plot(const Trajectory& tr, const std::string& path, const std::string& title,
                      const std::string& provenance) {
    if (tr.t.empty()) throw config_error("emit_plot: empty trajectory");
    // decimate long runs so files stay viewable
    const std::size_t stride = std::max<std::size_t>(1, tr.t.size() / 4000);
    auto sampled = [&](const std::vector<double>& v) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < v.size(); i += stride) pts.push_back({tr.t[i], v[i]});
        return pts;
    };
    std::vector<svg_detail::Series> series;
    series.push_back({"prey x", svg_detail::palette(0), false, sampled(tr.x)});
    series.push_back({"predator y", svg_detail::palette(1), false, sampled(tr.y)});
    if (!tr.xi.empty()) series.push_back({"noise xi", svg_detail::palette(3), true, sampled(tr.xi)});
    svg_detail::render(series, path, "time (" + title + ")", "density", provenance);
}

}  // namespace structsens
