#pragma once

#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eos::csv {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

// A cell is either text or a number; numbers go through format_double.
class Cell {
 public:
  Cell(double v) : text_(format_double(v)) {}
  Cell(long long v) : text_(std::to_string(v)) {}
  Cell(long v) : text_(std::to_string(v)) {}
  Cell(int v) : text_(std::to_string(v)) {}
  Cell(unsigned long v) : text_(std::to_string(v)) {}
  Cell(std::string_view s) : text_(s) {}
  Cell(const char* s) : text_(s) {}
  Cell(const std::string& s) : text_(s) {}
  template <class T>
  Cell(const std::optional<T>& v) : text_(v ? Cell(*v).text() : std::string()) {}

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

// Writes '\n'-terminated rows. Throws EosError(Io) if the file cannot be opened
// or a write fails.
class Writer {
 public:
  Writer(const std::string& path, std::initializer_list<std::string_view> header);
  Writer(const std::string& path, const std::vector<std::string>& header);

  void row(std::initializer_list<Cell> cells);
  void row(const std::vector<Cell>& cells);
  void close();

 private:
  void write_line(const std::vector<std::string>& fields);

  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace eos::csv
