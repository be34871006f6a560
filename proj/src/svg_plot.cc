#include "mcn/svg_plot.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mcn/text_format.h"

namespace mcn {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

void header(std::ostringstream& os, const std::string& title, const std::string& caption) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  if (!caption.empty()) {
    os << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 8 << "\" font-size=\"10\" fill=\"#555\">"
       << escape(caption) << "</text>\n";
  }
}

void axes(std::ostringstream& os, double y_lo, double y_hi, const std::string& y_label) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_lo + (y_hi - y_lo) * i / 4.0;
    const double y = y0 - (y0 - y1) * i / 4.0;
    os << "<line x1=\"" << x0 - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << x0 << "\" y2=\"" << num(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v)
       << "</text>\n";
  }
  os << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<LineSeries>& series,
                          const std::string& caption) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.y.size());
  }
  if (n == 0 || !std::isfinite(lo)) throw std::invalid_argument("line_plot_svg: no finite data");
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  std::ostringstream os;
  header(os, title, caption);
  axes(os, lo, hi, y_label);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto px = [&](std::size_t i) { return n > 1 ? x0 + (x1 - x0) * static_cast<double>(i) / (n - 1) : x0; };
  auto py = [&](double v) { return y0 - (y0 - y1) * (v - lo) / (hi - lo); };
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << y0 + 30 << "\" text-anchor=\"middle\">" << escape(x_label)
     << "</text>\n";
  os << "<text x=\"" << x0 << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">0</text>\n";
  os << "<text x=\"" << x1 << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << n - 1 << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[si].y.size(); ++i) {
      if (!std::isfinite(series[si].y[i])) continue;
      os << num(px(i)) << ',' << num(py(series[si].y[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = kTop + 16 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << x1 + 12 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << x1 + 36 << "\" y=\"" << ly + 4 << "\">" << escape(series[si].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_plot_svg(const std::string& title, const std::string& y_label,
                         const std::vector<Bar>& bars, const std::string& caption) {
  if (bars.empty()) throw std::invalid_argument("bar_plot_svg: no bars");
  double hi = 0.0;
  for (const auto& b : bars) hi = std::max({hi, b.value, b.high});
  if (hi <= 0.0) hi = 1.0;
  hi *= 1.1;
  std::ostringstream os;
  header(os, title, caption);
  axes(os, 0.0, hi, y_label);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (x1 - x0) / static_cast<double>(bars.size());
  auto py = [&](double v) { return y0 - (y0 - y1) * v / hi; };
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    const double w = slot * 0.6;
    os << "<rect x=\"" << num(cx - w / 2) << "\" y=\"" << num(py(b.value)) << "\" width=\"" << num(w)
       << "\" height=\"" << num(y0 - py(b.value)) << "\" fill=\"" << kPalette[i % std::size(kPalette)]
       << "\" fill-opacity=\"0.8\"/>\n";
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(py(b.low)) << "\" x2=\"" << num(cx) << "\" y2=\""
       << num(py(b.high)) << "\" stroke=\"black\"/>\n";
    for (double v : {b.low, b.high}) {
      os << "<line x1=\"" << num(cx - 6) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(cx + 6)
         << "\" y2=\"" << num(py(v)) << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << num(cx) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << escape(b.label)
       << "</text>\n";
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(py(b.value) - 4) << "\" text-anchor=\"middle\" "
       << "font-size=\"10\">" << tick(b.value) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  if (!os) throw std::runtime_error("failed writing: " + path);
}

}  // namespace mcn
