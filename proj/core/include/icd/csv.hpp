#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace icd {

using CsvCell = std::variant<std::string, std::int64_t, double>;

/// In-memory table; doubles are written in the shortest form that parses
/// back to the same value.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;

  void add_row(std::vector<CsvCell> row);
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::string text(std::size_t row, const std::string& name) const;

  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(const std::string& text);
};

std::string format_double(double value);

}  // namespace icd
