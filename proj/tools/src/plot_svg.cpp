#include "plot_svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace bnsl::tools {

namespace {

constexpr double kMarginLeft = 72, kMarginRight = 24, kMarginTop = 44,
                 kMarginBottom = 56;
constexpr const char* kPalette[] = {"#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                    "#17becf"};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = true;
  double lo = 0, hi = 1;      // data space (already logged when log)
  double pix_lo = 0, pix_hi = 1;
  double to_pix(double v) const {
    const double t = log ? std::log10(v) : v;
    return pix_lo + (t - lo) / (hi - lo) * (pix_hi - pix_lo);
  }
};

std::string tick_label(double v) {
  if (v == 0.0) return "0";
  const double l = std::log10(std::abs(v));
  if (l >= -4.0 && l <= 5.0) return num(v);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%ce%d", v < 0 ? '-' : '1',
                static_cast<int>(std::lround(l)));
  return v < 0 ? ("-1e" + std::to_string(static_cast<int>(std::lround(l)))) : buf;
}

std::vector<double> make_ticks(const Axis& ax) {
  std::vector<double> ticks;
  if (ax.log) {
    const int k_lo = static_cast<int>(std::ceil(ax.lo - 1e-9));
    const int k_hi = static_cast<int>(std::floor(ax.hi + 1e-9));
    for (int k = k_lo; k <= k_hi; ++k) ticks.push_back(std::pow(10.0, k));
  }
  if (ticks.size() < 2) {
    ticks.clear();
    for (int i = 0; i <= 4; ++i) {
      const double t = ax.lo + (ax.hi - ax.lo) * i / 4.0;
      ticks.push_back(ax.log ? std::pow(10.0, t) : t);
    }
  }
  return ticks;
}

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<SeriesPoint>& points,
                       const std::vector<PlotCurve>& curves) {
  if (points.empty()) throw std::invalid_argument("render_svg: no points");
  if (spec.width <= 0 || spec.height <= 0)
    throw std::invalid_argument("render_svg: dimensions must be positive");
  if (spec.samples_per_decade < 2)
    throw std::invalid_argument("render_svg: samples_per_decade must be >= 2");
  double min_x = points[0].x, max_x = points[0].x;
  double min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }

  auto padded = [](bool log, double lo, double hi) {
    if (log) {
      const double pad = std::max(0.05, 0.05 * (std::log10(hi) - std::log10(lo)));
      return std::pair{std::log10(lo) - pad, std::log10(hi) + pad};
    }
    const double pad = std::max(1e-12, 0.05 * (hi - lo));
    return std::pair{lo - pad, hi + pad};
  };

  Axis xax, yax;
  xax.log = spec.log_x;
  std::tie(xax.lo, xax.hi) = padded(spec.log_x, min_x, max_x);
  xax.pix_lo = kMarginLeft;
  xax.pix_hi = spec.width - kMarginRight;
  yax.log = spec.log_y;
  std::tie(yax.lo, yax.hi) = padded(spec.log_y, min_y, max_y);
  yax.pix_lo = spec.height - kMarginBottom;  // y grows downward in SVG
  yax.pix_hi = kMarginTop;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << ' '
      << spec.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<clipPath id=\"plot\"><rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop
      << "\" width=\"" << (spec.width - kMarginLeft - kMarginRight) << "\" height=\""
      << (spec.height - kMarginTop - kMarginBottom) << "\"/></clipPath>\n";
  if (!spec.title.empty())
    svg << "<text x=\"" << spec.width / 2
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << escape(spec.title) << "</text>\n";

  // axes, grid, ticks
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (double t : make_ticks(xax)) {
    const double px = xax.to_pix(t);
    svg << "<line x1=\"" << num(px) << "\" y1=\"" << num(yax.pix_lo) << "\" x2=\""
        << num(px) << "\" y2=\"" << num(yax.pix_hi)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(px) << "\" y=\"" << num(yax.pix_lo + 18)
        << "\" text-anchor=\"middle\">" << escape(tick_label(t)) << "</text>\n";
  }
  for (double t : make_ticks(yax)) {
    const double py = yax.to_pix(t);
    svg << "<line x1=\"" << num(xax.pix_lo) << "\" y1=\"" << num(py) << "\" x2=\""
        << num(xax.pix_hi) << "\" y2=\"" << num(py)
        << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(xax.pix_lo - 6) << "\" y=\"" << num(py + 4)
        << "\" text-anchor=\"end\">" << escape(tick_label(t)) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
      << (spec.width - kMarginLeft - kMarginRight) << "\" height=\""
      << (spec.height - kMarginTop - kMarginBottom)
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

  // fitted curves, sampled over the observed x range
  svg << "<g clip-path=\"url(#plot)\" fill=\"none\" stroke-width=\"2\">\n";
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& curve = curves[ci];
    std::ostringstream d;
    bool open = false;
    const double decades =
        spec.log_x ? std::log10(max_x / min_x) : std::log10(std::max(max_x / min_x, 10.0));
    const int n = std::max(
        2, static_cast<int>(std::lround(spec.samples_per_decade * std::max(decades, 1.0))));
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      const double x = spec.log_x
                           ? std::pow(10.0, std::log10(min_x) +
                                                t * (std::log10(max_x) - std::log10(min_x)))
                           : min_x + t * (max_x - min_x);
      double y;
      try {
        y = curve.form(x);
      } catch (const std::exception&) {
        open = false;
        continue;
      }
      if (!std::isfinite(y) || (spec.log_y && !(y > 0.0))) {
        open = false;
        continue;
      }
      d << (open ? 'L' : 'M') << num(xax.to_pix(x)) << ' ' << num(yax.to_pix(y));
      open = true;
    }
    svg << "<path d=\"" << d.str() << "\" stroke=\""
        << kPalette[ci % std::size(kPalette)] << '"'
        << (curve.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
  }
  svg << "</g>\n";

  // data points
  svg << "<g clip-path=\"url(#plot)\">\n";
  for (const auto& p : points) {
    if (spec.log_y && !(p.y > 0.0)) continue;
    const std::string cx = num(xax.to_pix(p.x)), cy = num(yax.to_pix(p.y));
    if (p.split == Split::train)
      svg << "<circle cx=\"" << cx << "\" cy=\"" << cy
          << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    else
      svg << "<circle cx=\"" << cx << "\" cy=\"" << cy
          << "\" r=\"3.5\" fill=\"white\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  }
  svg << "</g>\n";

  // legend
  double ly = kMarginTop + 16;
  const double lx = spec.width - kMarginRight - 180;
  svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
  svg << "<circle cx=\"" << num(lx) << "\" cy=\"" << num(ly - 4)
      << "\" r=\"3\" fill=\"#1f77b4\"/><text x=\"" << num(lx + 10) << "\" y=\""
      << num(ly) << "\">train</text>\n";
  ly += 18;
  svg << "<circle cx=\"" << num(lx) << "\" cy=\"" << num(ly - 4)
      << "\" r=\"3.5\" fill=\"white\" stroke=\"#d62728\" stroke-width=\"1.5\"/>"
      << "<text x=\"" << num(lx + 10) << "\" y=\"" << num(ly) << "\">test</text>\n";
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    ly += 18;
    svg << "<line x1=\"" << num(lx - 6) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(lx + 6) << "\" y2=\"" << num(ly - 4) << "\" stroke=\""
        << kPalette[ci % std::size(kPalette)] << "\" stroke-width=\"2\""
        << (curves[ci].dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>"
        << "<text x=\"" << num(lx + 10) << "\" y=\"" << num(ly) << "\">"
        << escape(curves[ci].label) << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace bnsl::tools
