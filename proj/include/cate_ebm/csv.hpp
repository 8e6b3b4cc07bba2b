#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cate_ebm/linalg.hpp"

namespace cate_ebm {

// Numeric table with a header row. Cells are written in shortest
// round-trip form, so write -> read reproduces every double exactly.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
  // Lines written before the header as "# <text>" (e.g. a config fingerprint).
  std::vector<std::string> comments;

  // Column position of `name`, or -1.
  long find(const std::string& name) const;
  // Value of a "key=value" comment, or empty.
  std::string comment_value(const std::string& key) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<memory>");
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string format_csv(const CsvTable& table);

std::string format_double(double v);

std::vector<std::string> numbered_names(const std::string& prefix, std::size_t count);

} // namespace cate_ebm
