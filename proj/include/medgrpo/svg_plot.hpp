#pragma once

#include <string>
#include <vector>

namespace medgrpo::svg {

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;  // same length as xs
  std::string color;       // empty = palette by index
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string footer;  // config hash and seed land here
  int width = 960;
  int height = 540;
  std::vector<Series> series;
};

// Self-contained SVG line chart: axes, ticks, legend, footer. No external
// assets, so the file opens anywhere.
std::string render_line_plot(const PlotSpec& spec);

void write_line_plot(const PlotSpec& spec, const std::string& path);

}  // namespace medgrpo::svg
