// SPDX-License-Identifier: Apache-2.0
#include "qmimo/table.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qmimo/errors.hpp"

namespace qmimo {

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) {
    throw InternalConsistencyError(
        "result table: row width " + std::to_string(row.size()) +
        " does not match column count " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

void ResultTable::add_metadata(const std::string& key,
                               const std::string& value) {
  metadata.emplace_back(key, value);
}

int ResultTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::string format_csv(const ResultTable& table) {
  std::ostringstream out;
  for (const auto& [key, value] : table.metadata) {
    out << "# " << key << " = " << value << "\n";
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << table.columns[i] << (i + 1 == table.columns.size() ? "\n" : ",");
  }
  char buf[40];
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g", row[i]);
      out << buf << (i + 1 == row.size() ? "\n" : ",");
    }
  }
  return out.str();
}

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot open output path '" + path + "'");
  }
  out << format_csv(table);
  if (!out) {
    throw ConfigError("failed writing CSV to '" + path + "'");
  }
}

std::string content_hash_hex(const std::string& content) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : content) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace qmimo
