#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace recipeforge {

/// Comma-separated table with a mandatory header row. Fields are trimmed;
/// quoting is not supported. Lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path source;

  /// Column index by name; throws DataError if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Parses a cell as a finite double; throws DataError with row context.
  double number(std::size_t row, std::size_t column) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace recipeforge
