#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mlcsc/common.hpp"

namespace mlcsc {

struct PlotCurve {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Render curves as a standalone SVG with axes, ticks, one polyline per
/// curve, and a legend. Rejects empty or non-finite input before touching
/// the file. Output is deterministic byte-for-byte for equal input.
void emit_plot_svg(const std::vector<PlotCurve>& series, const std::filesystem::path& path,
                   const std::string& x_label = "", const std::string& y_label = "");

}  // namespace mlcsc
