#include "icd/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace icd {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header.size()) {
    throw std::invalid_argument("CsvTable: row has " + std::to_string(row.size()) +
                                " cells, header has " + std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("CsvTable: no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const CsvCell& cell = rows.at(row).at(column(name));
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  const std::string& s = std::get<std::string>(cell);
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("CsvTable: '" + s + "' in column " + name + " is not a number");
  }
  return out;
}

std::string CsvTable::text(std::size_t row, const std::string& name) const {
  const CsvCell& cell = rows.at(row).at(column(name));
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return format_double(std::get<double>(cell));
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out << format_double(v);
            } else {
              out << v;
            }
          },
          row[i]);
    }
    out << '\n';
  }
  return out.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << to_string();
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) return table;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<CsvCell> row;
    for (auto& cell : split(line)) row.emplace_back(std::move(cell));
    table.add_row(std::move(row));
  }
  return table;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse(buf.str());
}

}  // namespace icd
