#pragma once

#include <string>
#include <vector>

#include "bnsl/forms.hpp"
#include "bnsl/series.hpp"

namespace bnsl::tools {

struct PlotSpec {
  int width = 960;
  int height = 640;
  bool log_x = true;
  bool log_y = true;
  int samples_per_decade = 50;  ///< curve sampling density; >= 2
  std::string title;
};

struct PlotCurve {
  std::string label;
  FunctionalForm form;
  bool dashed = false;
};

/// Self-contained SVG: train points filled, test points hollow, curves
/// sampled across the observed x range and clipped to the plot area.
std::string render_svg(const PlotSpec& spec, const std::vector<SeriesPoint>& points,
                       const std::vector<PlotCurve>& curves);

}  // namespace bnsl::tools
