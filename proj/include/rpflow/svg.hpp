#pragma once
// Minimal static SVG line plots (log or linear axes, legend, annotations).
// Output is deterministic: no timestamps, fixed float formatting.
#include <string>
#include <vector>

namespace rpflow {

class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel);
  void log_x(bool on) { logx_ = on; }
  void log_y(bool on) { logy_ = on; }
  void add_series(std::string name, std::vector<double> x, std::vector<double> y);
  void add_annotation(std::string text);
  void write(const std::string& path) const;

 private:
  std::string title_, xlabel_, ylabel_;
  bool logx_ = false, logy_ = false;
  struct Series {
    std::string name;
    std::vector<double> x, y;
  };
  std::vector<Series> series_;
  std::vector<std::string> notes_;
};

}  // namespace rpflow
