#include "mlcsc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mlcsc {

namespace {

const char* kColors[] = {"#1f6fb4", "#d1495b", "#3c8d53", "#8c5aa8", "#c77f2e", "#4f6272"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void emit_plot_svg(const std::vector<PlotCurve>& series, const std::filesystem::path& path,
                   const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("emit_plot_svg: empty series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& curve : series) {
    if (curve.points.empty()) throw std::invalid_argument("emit_plot_svg: empty curve");
    for (auto [x, y] : curve.points) {
      if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("emit_plot_svg: non-finite point");
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const double w = 640, h = 420, ml = 70, mr = 160, mt = 20, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  // ticks
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    svg << "<line x1=\"" << sx(xv) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(xv) << "\" y2=\""
        << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx(xv) << "\" y=\"" << mt + ph + 20
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\""
        << sy(yv) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  if (!x_label.empty())
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 10
        << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
  if (!y_label.empty())
    svg << "<text x=\"15\" y=\"" << mt + ph / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 15 " << mt + ph / 2 << ")\">" << y_label << "</text>\n";
  // curves and legend
  for (std::size_t c = 0; c < series.size(); ++c) {
    const char* color = kColors[c % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (auto [x, y] : series[c].points) svg << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    svg << "\"/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(c);
    svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.8\"/>\n";
    svg << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << series[c].label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("emit_plot_svg: cannot open " + path.string());
  out << svg.str();
  if (!out) throw FormatError("emit_plot_svg: short write to " + path.string());
}

}  // namespace mlcsc
