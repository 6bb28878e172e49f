#ifndef SEGQA_SVG_HPP
#define SEGQA_SVG_HPP

// Self-contained SVG renderings of an evaluation: predicted-vs-actual scatter
// and the tissue x feature |r| heat map. Presentation only; the JSON reports
// carry the numbers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "segqa/features.hpp"
#include "segqa/stats.hpp"

namespace segqa::svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline constexpr std::array<const char*, kScoredTissueCount> kTissueColours = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                                              "#d62728", "#9467bd"};

inline std::string scatter(const EvaluationReport& rep) {
    constexpr double size = 480, margin = 60, plot = size - 2 * margin;
    double lo = 1.0, hi = 0.0;
    for (const auto& te : rep.per_tissue) {
        for (const auto& [a, p] : te.pairs) {
            lo = std::min({lo, a, p});
            hi = std::max({hi, a, p});
        }
    }
    if (!(hi > lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo = std::max(0.0, lo - pad);
    hi = std::min(1.0, hi + pad);
    if (!(hi > lo)) hi = lo + 1e-3;
    auto px = [&](double v) { return margin + (v - lo) / (hi - lo) * plot; };
    auto py = [&](double v) { return size - margin - (v - lo) / (hi - lo) * plot; };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(size) + "\" height=\"" + num(size) +
         "\" viewBox=\"0 0 " + num(size) + " " + num(size) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(size) + "\" height=\"" + num(size) + "\" fill=\"white\"/>\n";
    s += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(plot) + "\" height=\"" +
         num(plot) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(hi)) + "\" y2=\"" +
         num(py(hi)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        for (const auto& [a, p] : rep.per_tissue[t].pairs) {
            s += "<circle cx=\"" + num(px(a)) + "\" cy=\"" + num(py(p)) + "\" r=\"3\" fill=\"" +
                 kTissueColours[t] + "\" fill-opacity=\"0.7\"/>\n";
        }
        const double ly = margin + 14.0 * static_cast<double>(t) + 10.0;
        s += "<circle cx=\"" + num(margin + 10) + "\" cy=\"" + num(ly - 4) + "\" r=\"4\" fill=\"" +
             kTissueColours[t] + "\"/>\n";
        s += "<text x=\"" + num(margin + 20) + "\" y=\"" + num(ly) + "\" font-size=\"11\">" +
             escape(std::string(tissue_name(kScoredTissues[t]))) + "</text>\n";
    }
    std::string caption = "MAE " + num(rep.mean_abs_diff) + " (SD " + num(rep.sd_abs_diff) + ")";
    if (rep.pearson_r) caption += ", r = " + num(*rep.pearson_r);
    if (rep.pearson_p) caption += ", p = " + num(*rep.pearson_p);
    s += "<text x=\"" + num(size / 2) + "\" y=\"" + num(margin / 2) +
         "\" font-size=\"13\" text-anchor=\"middle\">" + escape(caption) + "</text>\n";
    s += "<text x=\"" + num(size / 2) + "\" y=\"" + num(size - margin / 3) +
         "\" font-size=\"12\" text-anchor=\"middle\">actual Dice</text>\n";
    s += "<text x=\"" + num(margin / 3) + "\" y=\"" + num(size / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(margin / 3) + " " +
         num(size / 2) + ")\">predicted Dice</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        s += "<text x=\"" + num(px(v)) + "\" y=\"" + num(size - margin + 14) +
             "\" font-size=\"10\" text-anchor=\"middle\">" + num(std::round(v * 1000) / 1000) + "</text>\n";
        s += "<text x=\"" + num(margin - 6) + "\" y=\"" + num(py(v) + 3) +
             "\" font-size=\"10\" text-anchor=\"end\">" + num(std::round(v * 1000) / 1000) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

// Cells show |r| on a white-to-red ramp; '*' marks p < 0.05; undefined cells are hatched grey.
inline std::string heatmap(const CorrelationMatrix& m) {
    constexpr double cell = 34, left = 60, top = 130;
    const double width = left + cell * kFeatureCount + 20;
    const double height = top + cell * kScoredTissueCount + 20;
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"white\"/>\n";
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const double x = left + cell * (static_cast<double>(f) + 0.5);
        s += "<text x=\"" + num(x) + "\" y=\"" + num(top - 6) + "\" font-size=\"10\" transform=\"rotate(-60 " +
             num(x) + " " + num(top - 6) + ")\">" + escape(feature_names()[f]) + "</text>\n";
    }
    for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
        const double y = top + cell * static_cast<double>(t);
        s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + cell / 2 + 4) +
             "\" font-size=\"11\" text-anchor=\"end\">" + escape(std::string(tissue_name(kScoredTissues[t]))) +
             "</text>\n";
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const double x = left + cell * static_cast<double>(f);
            const auto& c = m.cells[t][f];
            std::string fill = "#cccccc";
            if (c) {
                const double a = std::clamp(std::abs(c->r), 0.0, 1.0);
                const int gb = static_cast<int>(std::lround(255.0 * (1.0 - a)));
                char buf[16];
                std::snprintf(buf, sizeof(buf), "#ff%02x%02x", gb, gb);
                fill = buf;
            }
            s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
                 num(cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
            if (c) {
                std::string label = num(std::round(std::abs(c->r) * 100) / 100);
                if (c->significant) label += "*";
                s += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 3) +
                     "\" font-size=\"9\" text-anchor=\"middle\">" + escape(label) + "</text>\n";
            }
        }
    }
    s += "</svg>\n";
    return s;
}

}  // namespace segqa::svg

#endif  // SEGQA_SVG_HPP
