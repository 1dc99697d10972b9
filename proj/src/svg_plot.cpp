#include "medgrpo/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "medgrpo/errors.hpp"

namespace medgrpo::svg {

namespace {

const char* kPalette[] = {"#1f6feb", "#d1242f", "#2da44e", "#9a6700", "#8250df", "#bf3989"};
constexpr int kPaletteSize = 6;

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
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

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded_range(double lo, double hi) {
  if (lo == hi) {
    return {lo - 0.5, hi + 0.5};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string render_line_plot(const PlotSpec& spec) {
  if (spec.series.empty()) {
    throw ValidationError("plot needs at least one series");
  }
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : spec.series) {
    if (s.xs.size() != s.ys.size() || s.xs.empty()) {
      throw ValidationError("series " + s.label + " needs equal non-empty xs and ys");
    }
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) {
        throw ValidationError("series " + s.label + " contains a non-finite point");
      }
      xmin = std::min(xmin, s.xs[i]);
      xmax = std::max(xmax, s.xs[i]);
      ymin = std::min(ymin, s.ys[i]);
      ymax = std::max(ymax, s.ys[i]);
    }
  }
  const Range xr = padded_range(xmin, xmax);
  const Range yr = padded_range(ymin, ymax);

  const double left = 64.0;
  const double right = static_cast<double>(spec.width) - 20.0;
  const double top = 40.0;
  const double bottom = static_cast<double>(spec.height) - 56.0;

  const auto sx = [&](double x) {
    return left + (x - xr.lo) / (xr.hi - xr.lo) * (right - left);
  };
  const auto sy = [&](double y) {
    return bottom - (y - yr.lo) / (yr.hi - yr.lo) * (bottom - top);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
      << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << (spec.width / 2) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\" fill=\"#24292f\">" << escape(spec.title)
      << "</text>\n";

  // Axes and gridlines with 5 ticks each.
  out << "<g stroke=\"#d0d7de\" stroke-width=\"1\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 5.0;
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << num(right)
        << "\" y2=\"" << num(sy(fy)) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#57606a\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 5.0;
    out << "<text x=\"" << num(left - 6.0) << "\" y=\"" << num(sy(fy) + 4.0)
        << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 5.0;
    out << "<text x=\"" << num(sx(fx)) << "\" y=\"" << num(bottom + 16.0)
        << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
  }
  out << "</g>\n";
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(bottom) << "\" stroke=\"#57606a\"/>\n";
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(right)
      << "\" y2=\"" << num(bottom) << "\" stroke=\"#57606a\"/>\n";

  out << "<text x=\"" << ((left + right) / 2.0) << "\" y=\"" << (bottom + 34.0)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#24292f\">"
      << escape(spec.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << ((top + bottom) / 2.0)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#24292f\" "
      << "transform=\"rotate(-90 16 " << ((top + bottom) / 2.0) << ")\">" << escape(spec.y_label)
      << "</text>\n";

  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const std::string color =
        s.color.empty() ? kPalette[i % kPaletteSize] : s.color;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t p = 0; p < s.xs.size(); ++p) {
      if (p != 0) {
        out << ' ';
      }
      out << num(sx(s.xs[p])) << ',' << num(sy(s.ys[p]));
    }
    out << "\"/>\n";
  }

  // Legend, top right.
  const double legend_x = right - 190.0;
  double legend_y = top + 8.0;
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#24292f\">\n";
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    if (s.label.empty()) {
      continue;  // overlay runs repeat colors; label each color once
    }
    const std::string color =
        s.color.empty() ? kPalette[i % kPaletteSize] : s.color;
    out << "<line x1=\"" << num(legend_x) << "\" y1=\"" << num(legend_y - 3.0) << "\" x2=\""
        << num(legend_x + 22.0) << "\" y2=\"" << num(legend_y - 3.0) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(legend_x + 28.0) << "\" y=\"" << num(legend_y) << "\">"
        << escape(s.label) << "</text>\n";
    legend_y += 16.0;
  }
  out << "</g>\n";

  out << "<text x=\"" << num(left) << "\" y=\"" << (spec.height - 10) << "\" "
      << "font-family=\"monospace\" font-size=\"10\" fill=\"#57606a\">" << escape(spec.footer)
      << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

void write_line_plot(const PlotSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << render_line_plot(spec);
  if (!out) {
    throw IoError("failed writing " + path);
  }
}

}  // namespace medgrpo::svg
