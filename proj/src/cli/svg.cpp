#include "dpcc/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace dpcc {
namespace {

constexpr double kPanelW = 360, kPanelH = 280;
constexpr double kLeft = 70, kRight = 20, kTop = 36, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

struct Range {
  double lo = INFINITY, hi = -INFINITY;
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo <= 0) {
      const double pad = lo == 0 ? 1 : std::fabs(lo) * 0.05;
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string render_svg(const std::vector<PlotPanel>& panels) {
  const double width = kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width)
     << "\" height=\"" << num(kPanelH) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(kPanelH)
     << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(kPanelH)
     << "\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    Range rx, ry;
    for (const auto& s : panel.series)
      for (const auto& [x, y] : s.points)
        if (std::isfinite(x) && std::isfinite(y)) rx.add(x), ry.add(y);
    rx.settle();
    ry.settle();
    const double x0 = kLeft, x1 = kPanelW - kRight, y0 = kPanelH - kBottom, y1 = kTop;
    auto sx = [&](double x) { return x0 + (x - rx.lo) / (rx.hi - rx.lo) * (x1 - x0); };
    auto sy = [&](double y) { return y0 + (y - ry.lo) / (ry.hi - ry.lo) * (y1 - y0); };

    os << "<g transform=\"translate(" << num(kPanelW * static_cast<double>(p)) << ",0)\""
       << " font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">"
       << xml_escape(panel.title) << "</text>\n";
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\""
       << num(y0) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\""
       << num(y1) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(x0) << "\" y=\"" << num(y0 + 14) << "\" text-anchor=\"middle\">"
       << num(rx.lo) << "</text>\n";
    os << "<text x=\"" << num(x1) << "\" y=\"" << num(y0 + 14) << "\" text-anchor=\"middle\">"
       << num(rx.hi) << "</text>\n";
    os << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y0) << "\" text-anchor=\"end\">"
       << num(ry.lo) << "</text>\n";
    os << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(y1 + 4) << "\" text-anchor=\"end\">"
       << num(ry.hi) << "</text>\n";
    os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kPanelH - 12)
       << "\" text-anchor=\"middle\">" << xml_escape(panel.x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << num((y0 + y1) / 2) << ")\">" << xml_escape(panel.y_label) << "</text>\n";

    for (std::size_t i = 0; i < panel.series.size(); ++i) {
      const PlotSeries& s = panel.series[i];
      const char* color = kColors[i % std::size(kColors)];
      std::ostringstream pts;
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        pts << num(sx(x)) << ',' << num(sy(y)) << ' ';
      }
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
         << pts.str() << "\"/>\n";
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        os << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\" fill=\""
           << color << "\"/>\n";
      }
      os << "<text x=\"" << num(x1) << "\" y=\"" << num(y1 + 14 * static_cast<double>(i + 1))
         << "\" text-anchor=\"end\" fill=\"" << color << "\">" << xml_escape(s.label)
         << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dpcc
