#pragma once

#include <string>
#include <utility>
#include <vector>

namespace adaptdet::plot {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  /// Connect points in order; otherwise draw markers only.
  bool line = true;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 440;
};

/// Standalone SVG document. Output depends only on the chart contents.
std::string render_svg(const Chart& chart);

}  // namespace adaptdet::plot
