#include "kcontract/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kcontract/errors.hpp"

namespace kcontract {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Round a span to a tick spacing of 1/2/5 x 10^k.
double tick_step(double span) {
  if (span <= 0) return 1;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  if (norm < 1.5) return mag;
  if (norm < 3.5) return 2 * mag;
  if (norm < 7.5) return 5 * mag;
  return 10 * mag;
}

}  // namespace

void write_svg_lineplot(const std::string& path, const std::string& title,
                        const std::string& xlabel, const std::string& ylabel,
                        const std::vector<PlotSeries>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw DimensionError("plot series length mismatch");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
      xmin = std::min(xmin, s.xs[i]);
      xmax = std::max(xmax, s.xs[i]);
      ymin = std::min(ymin, s.ys[i]);
      ymax = std::max(ymax, s.ys[i]);
    }
  }
  if (!(xmin <= xmax)) { xmin = 0; xmax = 1; }
  if (!(ymin <= ymax)) { ymin = 0; ymax = 1; }
  if (xmax == xmin) { xmax += 0.5; xmin -= 0.5; }
  if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }

  const double W = 720, H = 480;
  const double ml = 70, mr = 20, mt = 36, mb = 52;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const auto X = [&](double x) { return ml + pw * (x - xmin) / (xmax - xmin); };
  const auto Y = [&](double y) { return mt + ph * (1 - (y - ymin) / (ymax - ymin)); };

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // frame
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // ticks
  const double xs = tick_step(xmax - xmin), ys = tick_step(ymax - ymin);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << X(t) << "\" y1=\"" << mt + ph << "\" x2=\"" << X(t) << "\" y2=\""
        << mt + ph + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << X(t) << "\" y=\"" << mt + ph + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << Y(t) << "\" x2=\"" << ml << "\" y2=\"" << Y(t)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << Y(t) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }

  // labels and title
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">" << xlabel << "</text>\n"
      << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << ylabel << "</text>\n"
      << "<text x=\"" << ml + pw / 2 << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">"
      << title << "</text>\n";

  // polylines
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\" points=\"";
    bool pen_down = false;
    for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
      const double px = series[s].xs[i], py = series[s].ys[i];
      if (!std::isfinite(px) || !std::isfinite(py)) { pen_down = false; continue; }
      if (!pen_down && i) out << ' ';
      out << fmt(X(px)) << ',' << fmt(Y(py)) << ' ';
      pen_down = true;
    }
    out << "\"/>\n";
    if (!series[s].label.empty()) {
      const double lx = ml + pw - 150, ly = mt + 16 + 16 * static_cast<double>(s);
      out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 22 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << lx + 28 << "\" y=\"" << ly << "\" font-size=\"12\">"
          << series[s].label << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace kcontract
