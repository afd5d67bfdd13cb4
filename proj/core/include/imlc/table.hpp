#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace imlc {

/// Column-named numeric table; the in-memory form of every CSV dataset.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  std::size_t rows() const noexcept { return data_.size(); }
  std::size_t cols() const noexcept { return columns_.size(); }

  void add_row(std::vector<double> row);
  std::span<const double> row(std::size_t i) const { return data_.at(i); }
  double at(std::size_t row, std::size_t col) const { return data_.at(row).at(col); }

  /// Index of `name`; throws SchemaError when absent.
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;

  /// CSV with a header line. Values are written with `decimals` fixed
  /// decimals, except columns listed in `integer_columns`.
  std::string to_csv(int decimals = 6,
                     const std::vector<std::string>& integer_columns = {}) const;
  static Table from_csv(const std::string& text);

  void save_csv(const std::filesystem::path& path, int decimals = 6,
                const std::vector<std::string>& integer_columns = {}) const;
  static Table load_csv(const std::filesystem::path& path);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> data_;
};

}  // namespace imlc
