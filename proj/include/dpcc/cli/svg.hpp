#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dpcc {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // drawn in the given order
};

struct PlotPanel {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
};

// Panels side by side, each with axes, min/max ticks, a polyline and a marker
// per point. Non-finite points are skipped. Standalone SVG 1.1 document.
std::string render_svg(const std::vector<PlotPanel>& panels);

std::string xml_escape(const std::string& text);

}  // namespace dpcc
