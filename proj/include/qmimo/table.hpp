// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace qmimo {

/// Rectangular numeric result table with ordered metadata, rendered as CSV
/// with '#'-prefixed metadata lines before the header.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add_row(std::vector<double> row);
  void add_metadata(const std::string& key, const std::string& value);
  int column_index(const std::string& name) const;  // -1 if absent
};

/// 12 significant digits, '.' decimal separator, one header row.
std::string format_csv(const ResultTable& table);

void emit_csv(const ResultTable& table, const std::string& path);

/// FNV-1a 64-bit content hash, hex-encoded; used to fingerprint configs.
std::string content_hash_hex(const std::string& content);

}  // namespace qmimo
