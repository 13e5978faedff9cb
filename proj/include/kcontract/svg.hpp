#pragma once

#include <string>
#include <vector>

namespace kcontract {

// Minimal SVG 1.1 line plots: axes, tick labels, polylines, legend. Enough
// for trajectory and volume-trace figures without an external plotting
// dependency.
struct PlotSeries {
  std::string label;
  std::vector<double> xs, ys;
};

void write_svg_lineplot(const std::string& path, const std::string& title,
                        const std::string& xlabel, const std::string& ylabel,
                        const std::vector<PlotSeries>& series);

}  // namespace kcontract
