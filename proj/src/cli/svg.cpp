#include "collapse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace collapse {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    return s == "-0.00" ? "0.00" : s;
}

std::string tick_label(double v) {
    char buf[32];
    if (v == std::round(v) && std::abs(v) < 1e9)
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    std::string s = buf;
    return s == "-0" ? "0" : s;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

// Round step from {1, 2, 5} x 10^k giving about `target` intervals.
std::vector<double> nice_ticks(double lo, double hi, int target) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    return out;
}

bool all_integral(const std::vector<PlotSeries>& series) {
    for (const auto& s : series)
        for (const auto& p : s.points)
            if (p[0] != std::round(p[0])) return false;
    return true;
}

} // namespace

std::string render_svg(const PlotSpec& spec) {
    if (spec.series.empty()) throw ContractError("render_svg: no series");
    Range xr, yr;
    for (const auto& s : spec.series) {
        if (s.points.empty()) throw ContractError("render_svg: series '" + s.label + "' is empty");
        for (const auto& p : s.points) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
                throw ContractError("render_svg: non-finite point in series '" + s.label + "'");
            xr.add(p[0]);
            yr.add(p[1]);
        }
    }
    if (spec.kind == PlotKind::LineTrace) yr.add(0.0);
    xr.pad();
    yr.pad();
    if (spec.kind == PlotKind::DensityHeatmap && spec.heatmap_bins < 1) throw ContractError("render_svg: heatmap_bins must be >= 1");

    using F = PlotFrame;
    const double pw = F::width - F::left - F::right;
    const double ph = F::height - F::top - F::bottom;
    auto mx = [&](double x) { return F::left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto my = [&](double y) { return F::top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(F::width) << "\" height=\"" << num(F::height)
      << "\" viewBox=\"0 0 " << num(F::width) << ' ' << num(F::height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(F::width) << "\" height=\"" << num(F::height) << "\" fill=\"white\"/>\n";
    if (!spec.title.empty())
        o << "<text x=\"" << num(F::left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
          << escape(spec.title) << "</text>\n";

    // Axes, grid and ticks.
    o << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << num(F::left) << "\" y1=\"" << num(F::top + ph) << "\" x2=\"" << num(F::left + pw) << "\" y2=\""
      << num(F::top + ph) << "\"/>\n"
      << "<line x1=\"" << num(F::left) << "\" y1=\"" << num(F::top) << "\" x2=\"" << num(F::left) << "\" y2=\""
      << num(F::top + ph) << "\"/>\n"
      << "</g>\n";

    std::vector<double> xt;
    if (spec.kind == PlotKind::LineTrace && all_integral(spec.series) && xr.hi - xr.lo <= 20.0) {
        for (double v = std::ceil(xr.lo); v <= xr.hi; v += 1.0) xt.push_back(v);
    } else {
        xt = nice_ticks(xr.lo, xr.hi, 6);
    }
    const std::vector<double> yt = nice_ticks(yr.lo, yr.hi, 6);
    o << "<g class=\"ticks\" font-size=\"11\">\n";
    for (double v : xt) {
        const double x = mx(v);
        o << "<line x1=\"" << num(x) << "\" y1=\"" << num(F::top + ph) << "\" x2=\"" << num(x) << "\" y2=\""
          << num(F::top + ph + 5) << "\" stroke=\"black\"/>\n"
          << "<text class=\"xtick\" x=\"" << num(x) << "\" y=\"" << num(F::top + ph + 18)
          << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
    }
    for (double v : yt) {
        const double y = my(v);
        o << "<line x1=\"" << num(F::left - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(F::left) << "\" y2=\""
          << num(y) << "\" stroke=\"black\"/>\n"
          << "<text class=\"ytick\" x=\"" << num(F::left - 8) << "\" y=\"" << num(y + 4)
          << "\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << num(F::left + pw / 2) << "\" y=\"" << num(F::height - 15) << "\" text-anchor=\"middle\">"
      << escape(spec.x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << num(F::top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num(F::top + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

    // Data.
    o << "<g class=\"data\">\n";
    if (spec.kind == PlotKind::DensityHeatmap) {
        const std::size_t nb = spec.heatmap_bins;
        std::vector<std::size_t> counts(nb * nb, 0);
        for (const auto& s : spec.series)
            for (const auto& p : s.points) {
                auto bin = [nb](double v, const Range& r) {
                    const auto b = static_cast<std::size_t>((v - r.lo) / (r.hi - r.lo) * static_cast<double>(nb));
                    return std::min(b, nb - 1);
                };
                ++counts[bin(p[1], yr) * nb + bin(p[0], xr)];
            }
        const double peak = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
        const double cw = pw / static_cast<double>(nb);
        const double ch = ph / static_cast<double>(nb);
        for (std::size_t r = 0; r < nb; ++r)
            for (std::size_t c = 0; c < nb; ++c) {
                const std::size_t n = counts[r * nb + c];
                if (n == 0) continue;
                o << "<rect x=\"" << num(F::left + static_cast<double>(c) * cw) << "\" y=\""
                  << num(F::top + ph - static_cast<double>(r + 1) * ch) << "\" width=\"" << num(cw) << "\" height=\""
                  << num(ch) << "\" fill=\"#08306b\" fill-opacity=\"" << num(static_cast<double>(n) / peak) << "\"/>\n";
            }
    } else {
        for (std::size_t i = 0; i < spec.series.size(); ++i) {
            const auto& s = spec.series[i];
            const char* color = kPalette[i % std::size(kPalette)];
            if (spec.kind == PlotKind::Scatter2D) {
                for (const auto& p : s.points)
                    o << "<circle cx=\"" << num(mx(p[0])) << "\" cy=\"" << num(my(p[1])) << "\" r=\"2\" fill=\"" << color
                      << "\" fill-opacity=\"0.6\"/>\n";
            } else {
                std::vector<std::array<double, 2>> pts = s.points;
                std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
                o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
                for (std::size_t j = 0; j < pts.size(); ++j)
                    o << (j ? " " : "") << num(mx(pts[j][0])) << ',' << num(my(pts[j][1]));
                o << "\"/>\n";
                for (const auto& p : pts)
                    o << "<rect x=\"" << num(mx(p[0]) - 2.5) << "\" y=\"" << num(my(p[1]) - 2.5)
                      << "\" width=\"5\" height=\"5\" fill=\"" << color << "\"/>\n";
            }
        }
    }
    o << "</g>\n";

    // Legend.
    o << "<g class=\"legend\">\n";
    for (std::size_t i = 0; i < spec.series.size(); ++i) {
        const double y = F::top + 10.0 + 18.0 * static_cast<double>(i);
        const char* color = spec.kind == PlotKind::DensityHeatmap ? "#08306b" : kPalette[i % std::size(kPalette)];
        o << "<rect x=\"" << num(F::width - F::right + 15) << "\" y=\"" << num(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << color << "\"/>\n"
          << "<text x=\"" << num(F::width - F::right + 30) << "\" y=\"" << num(y) << "\">" << escape(spec.series[i].label)
          << "</text>\n";
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

void write_svg(const PlotSpec& spec) {
    const std::string doc = render_svg(spec);
    if (spec.output.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(spec.output.parent_path(), ec);
    }
    std::ofstream f(spec.output, std::ios::binary);
    if (!f) throw IoError("cannot open " + spec.output.string() + " for writing");
    f << doc;
    if (!f) throw IoError("write failed: " + spec.output.string());
}

} // namespace collapse
