#ifndef MCN_SVG_PLOT_H_
#define MCN_SVG_PLOT_H_

// Minimal static SVG charts: line plots of per-epoch curves and grouped bars
// with min/max whiskers.

#include <string>
#include <vector>

namespace mcn {

struct LineSeries {
  std::string label;
  std::vector<double> y;  // x is the index
};

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<LineSeries>& series,
                          const std::string& caption = "");

struct Bar {
  std::string label;
  double value = 0.0;  // bar height
  double low = 0.0;    // whisker range
  double high = 0.0;
};

std::string bar_plot_svg(const std::string& title, const std::string& y_label,
                         const std::vector<Bar>& bars, const std::string& caption = "");

void write_text_file(const std::string& path, const std::string& content);

}  // namespace mcn

#endif  // MCN_SVG_PLOT_H_
