#pragma once

// Minimal header-row CSV reading: comma separated, no quoting.

#include <string>
#include <vector>

namespace xflex {

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< 1-based source line of each row

  /// Column index by name; throws ValidationError naming the file.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

/// Throws ValidationError on a missing file, empty header or ragged rows.
CsvTable read_csv(const std::string& path);

/// Strict numeric parse; throws ValidationError quoting `context`.
double parse_double(const std::string& text, const std::string& context);
long long parse_int(const std::string& text, const std::string& context);

}  // namespace xflex
