#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtdtl/core/error.hpp"

namespace mtdtl::io {

/// Fixed, locale-independent formatting so CSV output is byte-stable.
inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError("csv column '" + name + "' not found");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header = {}) {
  std::ifstream is(path);
  if (!is) throw IoError("missing file: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty csv: " + path.string());
  t.header = split_csv_line(line);
  if (!expected_header.empty() && t.header != expected_header)
    throw IoError("unexpected csv header in " + path.string() + ": '" + line + "'");
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) throw IoError("ragged csv row in " + path.string() + ": '" + line + "'");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << join_csv(t.header) << "\n";
  for (const auto& r : t.rows) os << join_csv(r) << "\n";
}

} // namespace mtdtl::io
