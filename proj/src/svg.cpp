#include "rpflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "rpflow/mathx.hpp"

namespace rpflow {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

constexpr const char* kColors[] = {"#2266aa", "#aa3322", "#228855",
                                   "#886622", "#663388", "#336677"};

}  // namespace

LinePlot::LinePlot(std::string title, std::string xlabel, std::string ylabel)
    : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

void LinePlot::add_series(std::string name, std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size()) throw ConfigError("plot series: x/y length mismatch");
  series_.push_back({std::move(name), std::move(x), std::move(y)});
}

void LinePlot::add_annotation(std::string text) { notes_.push_back(std::move(text)); }

void LinePlot::write(const std::string& path) const {
  const double W = 720, H = 480;
  const double ml = 70, mr = 160, mt = 50, mb = 60;

  auto tx = [&](double v) { return logx_ ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy_ ? std::log10(v) : v; };

  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series_)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (logx_ && !(s.x[i] > 0)) continue;
      if (logy_ && !(s.y[i] > 0)) continue;
      xlo = std::min(xlo, tx(s.x[i]));
      xhi = std::max(xhi, tx(s.x[i]));
      ylo = std::min(ylo, ty(s.y[i]));
      yhi = std::max(yhi, ty(s.y[i]));
    }
  if (!(xlo <= xhi)) { xlo = 0; xhi = 1; }
  if (!(ylo <= yhi)) { ylo = 0; yhi = 1; }
  if (xhi - xlo < 1e-12) { xlo -= 0.5; xhi += 0.5; }
  if (yhi - ylo < 1e-12) { ylo -= 0.5; yhi += 0.5; }
  const double xpad = 0.05 * (xhi - xlo), ypad = 0.05 * (yhi - ylo);
  xlo -= xpad; xhi += xpad; ylo -= ypad; yhi += ypad;

  auto px = [&](double v) { return ml + (tx(v) - xlo) / (xhi - xlo) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - ylo) / (yhi - ylo) * (H - mt - mb); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("plot: cannot open for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">"
      << escape(title_) << "</text>\n";

  // axes
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (W - ml - mr)
      << "\" height=\"" << (H - mt - mb)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  for (int g = 0; g <= 4; ++g) {
    const double fx = xlo + (xhi - xlo) * g / 4.0;
    const double fy = ylo + (yhi - ylo) * g / 4.0;
    const double gx = ml + (W - ml - mr) * g / 4.0;
    const double gy = H - mb - (H - mt - mb) * g / 4.0;
    out << "<line x1=\"" << gx << "\" y1=\"" << mt << "\" x2=\"" << gx << "\" y2=\""
        << (H - mb) << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << gy << "\" x2=\"" << (W - mr)
        << "\" y2=\"" << gy << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    const double lx = logx_ ? std::pow(10.0, fx) : fx;
    const double ly = logy_ ? std::pow(10.0, fy) : fy;
    out << "<text x=\"" << gx << "\" y=\"" << (H - mb + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt(lx) << "</text>\n";
    out << "<text x=\"" << (ml - 8) << "\" y=\"" << (gy + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << fmt(ly) << "</text>\n";
  }
  out << "<text x=\"" << (ml + (W - ml - mr) / 2) << "\" y=\"" << (H - 16)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << escape(xlabel_) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + (H - mt - mb) / 2)
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 18 "
      << (mt + (H - mt - mb) / 2) << ")\">" << escape(ylabel_) << "</text>\n";

  for (std::size_t si = 0; si < series_.size(); ++si) {
    const auto& s = series_[si];
    const char* color = kColors[si % 6];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (logx_ && !(s.x[i] > 0)) continue;
      if (logy_ && !(s.y[i] > 0)) continue;
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
      out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    out << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    const double lyy = mt + 16 + 18 * double(si);
    out << "<line x1=\"" << (W - mr + 10) << "\" y1=\"" << lyy << "\" x2=\""
        << (W - mr + 34) << "\" y2=\"" << lyy << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << (W - mr + 40) << "\" y=\"" << (lyy + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << escape(s.name)
        << "</text>\n";
  }
  for (std::size_t ni = 0; ni < notes_.size(); ++ni) {
    out << "<text x=\"" << (ml + 8) << "\" y=\"" << (mt + 16 + 14 * double(ni))
        << "\" font-size=\"11\" fill=\"#555555\" font-family=\"sans-serif\">"
        << escape(notes_[ni]) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("plot: write failed: " + path);
}

}  // namespace rpflow
