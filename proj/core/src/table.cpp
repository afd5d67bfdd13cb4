#include "imlc/table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "imlc/errors.hpp"

namespace imlc {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw DeserializationError(col, fmt::format("line {}: not a number: '{}'", line_no, s));
  }
  return v;
}

}  // namespace

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    for (std::size_t j = i + 1; j < columns_.size(); ++j) {
      if (columns_[i] == columns_[j]) throw SchemaError("duplicate column: " + columns_[i]);
    }
  }
}

void Table::add_row(std::vector<double> row) {
  if (row.size() != columns_.size()) {
    throw SchemaError(fmt::format("row has {} values, table has {} columns", row.size(),
                                  columns_.size()));
  }
  data_.push_back(std::move(row));
}

std::size_t Table::column_index(const std::string& name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw SchemaError("missing column: " + name);
  return static_cast<std::size_t>(it - columns_.begin());
}

std::vector<double> Table::column(const std::string& name) const {
  const std::size_t c = column_index(name);
  std::vector<double> out;
  out.reserve(rows());
  for (const auto& r : data_) out.push_back(r[c]);
  return out;
}

std::string Table::to_csv(int decimals, const std::vector<std::string>& integer_columns) const {
  std::vector<bool> is_int(columns_.size(), false);
  for (const auto& name : integer_columns) is_int[column_index(name)] = true;

  std::string out;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (c) out += ',';
    out += columns_[c];
  }
  out += '\n';
  for (const auto& r : data_) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out += ',';
      if (is_int[c]) {
        out += fmt::format("{}", static_cast<long long>(r[c]));
      } else {
        out += fmt::format("{:.{}f}", r[c], decimals);
      }
    }
    out += '\n';
  }
  return out;
}

Table Table::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DeserializationError("header", "empty CSV");
  if (line.back() == '\r') line.pop_back();
  Table t(split(line, ','));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != t.cols()) {
      throw DeserializationError(
          "row", fmt::format("line {}: expected {} cells, got {}", line_no, t.cols(), cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      row.push_back(parse_double(cells[c], line_no, t.columns_[c]));
    }
    t.data_.push_back(std::move(row));
  }
  return t;
}

void Table::save_csv(const std::filesystem::path& path, int decimals,
                     const std::vector<std::string>& integer_columns) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_csv(decimals, integer_columns);
}

Table Table::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_csv(ss.str());
}

}  // namespace imlc
