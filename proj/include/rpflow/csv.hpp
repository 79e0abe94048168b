#pragma once
// CSV output with atomic commit: rows accumulate into <path>.tmp and the
// file is renamed into place on close, so a crashed realization never leaves
// a half-written table. Floats are serialized with 17 significant digits.
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace rpflow {

class CsvWriter {
 public:
  CsvWriter(std::string path, const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& cell(double v);
  CsvWriter& cell(int v);
  CsvWriter& cell(std::int64_t v);
  CsvWriter& cell(std::uint64_t v);
  CsvWriter& cell(const std::string& v);
  void end_row();
  void close();  // flush + rename; called by destructor if needed

  const std::string& path() const { return path_; }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  std::size_t n_cols_ = 0, in_row_ = 0;
  bool open_ = false;
};

std::string format_double(double v);  // %.17g

}  // namespace rpflow
