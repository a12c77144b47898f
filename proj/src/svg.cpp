#include "dqt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dqt/error.hpp"

namespace dqt::svg {

namespace {

constexpr double kWidth = 900, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 40;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::ostringstream begin(double w, double h, const std::string& title) {
  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  return o;
}

// Blue (low) to white to red (high).
std::string colour(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = static_cast<int>(49 + u * (255 - 49));
    g = static_cast<int>(54 + u * (255 - 54));
    b = static_cast<int>(149 + u * (255 - 149));
  } else {
    const double u = (t - 0.5) / 0.5;
    r = static_cast<int>(255 - u * (255 - 165));
    g = static_cast<int>(255 - u * 255);
    b = static_cast<int>(255 - u * (255 - 38));
  }
  std::ostringstream o;
  o << '#' << std::hex << std::setfill('0') << std::setw(2) << r << std::setw(2) << g << std::setw(2) << b;
  return o.str();
}

}  // namespace

std::string line_plot(const std::string& title, const std::vector<LineSeries>& series) {
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.y.size());
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (hi == lo) lo -= 0.5, hi += 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto X = [&](std::size_t i) { return kLeft + (n > 1 ? pw * static_cast<double>(i) / (n - 1) : 0.0); };
  auto Y = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  auto o = begin(kWidth, kHeight, title);
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << Y(v) << "\" y2=\"" << Y(v)
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">step (0.."
    << (n ? n - 1 : 0) << ")</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].y.size(); ++i) {
      if (std::isfinite(series[s].y[i])) o << X(i) << ',' << Y(series[s].y[i]) << ' ';
    }
    o << "\"/>\n";
    const double ly = kTop + 16 * static_cast<double>(s) + 8;
    o << "<line x1=\"" << kWidth - kRight + 12 << "\" x2=\"" << kWidth - kRight + 32 << "\" y1=\"" << ly
      << "\" y2=\"" << ly << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\">" << escape(series[s].label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap(const std::string& title, const std::vector<std::vector<double>>& grid,
                    const std::vector<std::string>& row_labels, const std::vector<std::string>& col_labels) {
  const std::size_t rows = grid.size(), cols = rows ? grid[0].size() : 0;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : grid) {
    if (r.size() != cols) throw std::invalid_argument("heatmap: ragged grid");
    for (double v : r) {
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  const double span = hi > lo ? hi - lo : 1.0;
  const double left = 110, top = 40;
  const double cell = std::clamp(700.0 / std::max<std::size_t>(cols, 1), 2.0, 40.0);
  const double cell_h = std::clamp(500.0 / std::max<std::size_t>(rows, 1), 2.0, 40.0);
  const double w = left + cell * cols + 120, h = top + cell_h * rows + 60;
  auto o = begin(w, h, title);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      o << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell_h << "\" width=\"" << cell
        << "\" height=\"" << cell_h << "\" fill=\"" << colour((grid[r][c] - lo) / span) << "\"/>\n";
    }
    if (r < row_labels.size() && cell_h >= 8) {
      o << "<text x=\"" << left - 6 << "\" y=\"" << top + (r + 0.5) * cell_h + 4 << "\" text-anchor=\"end\">"
        << escape(row_labels[r]) << "</text>\n";
    }
  }
  const std::size_t stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(40.0 / cell)));
  for (std::size_t c = 0; c < cols && c < col_labels.size(); c += stride) {
    o << "<text x=\"" << left + (c + 0.5) * cell << "\" y=\"" << top + rows * cell_h + 16
      << "\" text-anchor=\"middle\">" << escape(col_labels[c]) << "</text>\n";
  }
  const double lx = left + cell * cols + 20;
  for (int k = 0; k <= 10; ++k) {
    o << "<rect x=\"" << lx << "\" y=\"" << top + (10 - k) * 12 << "\" width=\"16\" height=\"12\" fill=\""
      << colour(k / 10.0) << "\"/>\n";
  }
  o << "<text x=\"" << lx + 22 << "\" y=\"" << top + 10 << "\">" << hi << "</text>\n";
  o << "<text x=\"" << lx + 22 << "\" y=\"" << top + 130 << "\">" << lo << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  if (labels.size() != values.size()) throw std::invalid_argument("bar_chart: labels and values differ in length");
  double lo = 0.0, hi = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  const double pw = kWidth - kLeft - 30, ph = kHeight - kTop - 80;
  const double bw = values.empty() ? 0.0 : pw / values.size();
  auto Y = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };
  auto o = begin(kWidth, kHeight, title);
  o << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << Y(0) << "\" y2=\"" << Y(0)
    << "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double y0 = Y(std::max(v, 0.0)), y1 = Y(std::min(v, 0.0));
    o << "<rect x=\"" << kLeft + i * bw + bw * 0.1 << "\" y=\"" << y0 << "\" width=\"" << bw * 0.8
      << "\" height=\"" << y1 - y0 << "\" fill=\"" << kPalette[0] << "\"/>\n";
    const double tx = kLeft + (i + 0.5) * bw, ty = kTop + ph + 14;
    o << "<text x=\"" << tx << "\" y=\"" << ty << "\" text-anchor=\"end\" transform=\"rotate(-45 " << tx << ' '
      << ty << ")\">" << escape(labels[i]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

}  // namespace dqt::svg
