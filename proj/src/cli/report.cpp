#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "svda/cli.hpp"
#include "svda/errors.hpp"

namespace svda::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0;
constexpr double kTop = 40.0;
constexpr double kPlotW = 680.0;
constexpr double kPlotH = 360.0;

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Curve {
  const char* name;
  const char* color;
  double ErrorRow::*field;
};

constexpr std::array<Curve, 3> kCurves = {{
    {"bk", "#2ca02c", &ErrorRow::err_bk_L2},
    {"PBDW, true observations", "#ff7f0e", &ErrorRow::err_star_L2},
    {"SVDA", "#1f77b4", &ErrorRow::err_svda_L2},
}};

}  // namespace

std::string render_svg(const std::vector<ErrorRow>& rows, std::string_view title) {
  if (rows.empty()) throw Error(ErrorKind::Io, "no error rows to plot");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& r : rows) {
    for (const auto& c : kCurves) {
      const double v = r.*c.field;
      if (!std::isfinite(v)) throw Error(ErrorKind::Io, "non-finite error value at k = " + std::to_string(r.k));
      if (v > 0.0) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(hi > 0.0)) lo = hi = 1.0;
  const double log_min = std::floor(std::log10(lo));
  double log_max = std::ceil(std::log10(hi));
  if (log_max <= log_min) log_max = log_min + 1.0;
  const double t_min = rows.front().t;
  double t_max = rows.back().t;
  if (t_max <= t_min) t_max = t_min + 1.0;

  auto px = [&](double t) { return kLeft + kPlotW * (t - t_min) / (t_max - t_min); };
  auto py = [&](double v) {
    const double l = v > 0.0 ? std::log10(v) : log_min;
    return kTop + kPlotH * (log_max - l) / (log_max - log_min);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
  svg << "<g id=\"plot\" data-x0=\"" << kLeft << "\" data-y0=\"" << kTop << "\" data-width=\"" << kPlotW
      << "\" data-height=\"" << kPlotH << "\" data-log-min=\"" << log_min << "\" data-log-max=\""
      << log_max << "\" data-t-min=\"" << t_min << "\" data-t-max=\"" << t_max << "\">\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW << "\" height=\"" << kPlotH
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(log_min); d <= static_cast<int>(log_max); ++d) {
    const double y = kTop + kPlotH * (log_max - d) / (log_max - log_min);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(y) << "\" x2=\"" << kLeft + kPlotW << "\" y2=\""
        << fixed(y) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">1e" << d
        << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double t = t_min + (t_max - t_min) * i / 5.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", t);
    svg << "<text x=\"" << fixed(px(t)) << "\" y=\"" << kTop + kPlotH + 16
        << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 20
      << "\" text-anchor=\"middle\">time [s]</text>\n"
      << "<text x=\"18\" y=\"" << kTop + kPlotH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + kPlotH / 2 << ")\">relative L2 error</text>\n";
  for (const auto& c : kCurves) {
    svg << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\" data-series=\""
        << escape(c.name) << "\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      svg << (i ? " " : "") << fixed(px(rows[i].t)) << ',' << fixed(py(rows[i].*c.field));
    }
    svg << "\"/>\n";
  }
  svg << "</g>\n";
  for (std::size_t i = 0; i < kCurves.size(); ++i) {
    const double y = kTop + 16 + 18 * static_cast<double>(i);
    svg << "<line x1=\"" << kLeft + 12 << "\" y1=\"" << y << "\" x2=\"" << kLeft + 40 << "\" y2=\"" << y
        << "\" stroke=\"" << kCurves[i].color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + 46 << "\" y=\"" << y + 4 << "\">" << escape(kCurves[i].name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace svda::cli
