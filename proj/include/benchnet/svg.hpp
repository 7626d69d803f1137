#pragma once

#include <algorithm>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace benchnet::svg {

using Series = std::pair<std::string, std::vector<std::pair<double, double>>>;

/// Minimal line/scatter chart: axes box plus one polyline (or point set) per
/// series. Data-first output lives in the CSVs; this is a convenience view.
inline void write_chart(std::ostream& out, const std::vector<Series>& series,
                        bool scatter = false) {
  const double w = 640, h = 480, margin = 48;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& [name, pts] : series)
    for (const auto& [x, y] : pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto py = [&](double y) { return h - margin - (y - ymin) / (ymax - ymin) * (h - 2 * margin); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << w - 2 * margin
      << "\" height=\"" << h - 2 * margin << "\" fill=\"none\" stroke=\"#333\"/>\n";
  std::size_t ci = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[ci++ % 6];
    if (scatter) {
      for (const auto& [x, y] : pts)
        out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
            << "\" r=\"2\" fill=\"" << color << "\"/>\n";
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (const auto& [x, y] : pts) out << px(x) << "," << py(y) << " ";
      out << "\"/>\n";
    }
    out << "<text x=\"" << margin + 8 << "\" y=\"" << margin + 16 + 16 * (ci - 1)
        << "\" fill=\"" << color << "\" font-size=\"12\">" << name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace benchnet::svg
