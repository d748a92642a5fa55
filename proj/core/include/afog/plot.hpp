#pragma once
#include <string>
#include <vector>

namespace afog {

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
};

// Small static line chart (white canvas, axes with numeric ticks, one
// polyline with point markers). Enough for sweep/ablation plot files.
void render_line_chart(const std::string& path, const PlotSeries& series,
                       const std::string& x_label, const std::string& y_label, int width = 640,
                       int height = 420);

}  // namespace afog
