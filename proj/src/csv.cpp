#include "rpflow/csv.hpp"

#include <cstdio>

#include "rpflow/mathx.hpp"

namespace rpflow {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::string path, const std::vector<std::string>& columns)
    : path_(std::move(path)), tmp_(path_ + ".tmp"), n_cols_(columns.size()) {
  if (columns.empty()) throw ConfigError("csv: no columns");
  out_.open(tmp_, std::ios::trunc);
  if (!out_) throw IoError("csv: cannot open for writing: " + tmp_);
  open_ = true;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
    // destructor must not throw; an incomplete .tmp is left behind on purpose
  }
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(std::uint64_t v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
  if (!open_) throw IoError("csv: write after close: " + path_);
  if (in_row_ >= n_cols_) throw IoError("csv: too many cells in a row: " + path_);
  if (in_row_) out_ << ',';
  if (v.find_first_of(",\"\n") != std::string::npos) {
    out_ << '"';
    for (char ch : v) {
      if (ch == '"') out_ << '"';
      out_ << ch;
    }
    out_ << '"';
  } else {
    out_ << v;
  }
  ++in_row_;
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != n_cols_)
    throw IoError("csv: row has " + std::to_string(in_row_) + " of " +
                  std::to_string(n_cols_) + " cells: " + path_);
  out_ << '\n';
  in_row_ = 0;
}

void CsvWriter::close() {
  if (!open_) return;
  if (in_row_ != 0) throw IoError("csv: close inside an unfinished row: " + path_);
  out_.flush();
  if (!out_) throw IoError("csv: write failed: " + tmp_);
  out_.close();
  open_ = false;
  if (std::rename(tmp_.c_str(), path_.c_str()) != 0)
    throw IoError("csv: cannot rename " + tmp_ + " to " + path_);
}

}  // namespace rpflow
