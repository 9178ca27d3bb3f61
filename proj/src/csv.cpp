#include "eos/csv.hpp"

#include <charconv>
#include <cmath>

#include "eos/error.hpp"

namespace eos::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(const std::string& path, std::initializer_list<std::string_view> header)
    : Writer(path, std::vector<std::string>(header.begin(), header.end())) {}

Writer::Writer(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw EosError(ErrorCode::Io, "cannot open " + path + " for writing");
  write_line(header);
}

void Writer::row(std::initializer_list<Cell> cells) {
  row(std::vector<Cell>(cells.begin(), cells.end()));
}

void Writer::row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_) {
    throw EosError(ErrorCode::InvalidArgument, "row width does not match the header of " + path_);
  }
  std::vector<std::string> fields;
  fields.reserve(cells.size());
  for (const auto& c : cells) fields.push_back(c.text());
  write_line(fields);
}

void Writer::write_line(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  if (!out_) throw EosError(ErrorCode::Io, "write failed for " + path_);
}

void Writer::close() {
  out_.close();
  if (out_.fail()) throw EosError(ErrorCode::Io, "closing " + path_ + " failed");
}

}  // namespace eos::csv
