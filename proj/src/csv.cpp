#include "cate_ebm/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cate_ebm/error.hpp"

namespace cate_ebm {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

long CsvTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<long>(i);
  return -1;
}

std::string CsvTable::comment_value(const std::string& key) const {
  for (const auto& c : comments)
    if (c.size() > key.size() && c.compare(0, key.size(), key) == 0 && c[key.size()] == '=')
      return c.substr(key.size() + 1);
  return {};
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  std::size_t line_no = 0;
  bool got_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') {
      table.comments.push_back(trim(line.substr(1)));
      continue;
    }
    got_header = !trim(line).empty();
    break;
  }
  if (!got_header) throw csv_error(origin + ": empty file");
  for (const auto& h : split_line(line)) table.header.push_back(trim(h));

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw csv_error(origin + ": row " + std::to_string(rows.size() + 1) + " (line " +
                      std::to_string(line_no) + ") has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(table.header.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(first, last, row[c]);
      if (cell.empty() || ec != std::errc() || ptr != last)
        throw csv_error(origin + ": row " + std::to_string(rows.size() + 1) + ", column '" +
                        table.header[c] + "': non-numeric cell '" + cell + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw csv_error(origin + ": no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw csv_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (const auto& c : table.comments) out += "# " + c + '\n';
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out += ',';
    out += table.header[c];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(table.values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (static_cast<std::size_t>(table.values.cols()) != table.header.size())
    throw dimension_error("write_csv: header does not match column count");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot open " + path.string() + " for writing");
  const std::string text = format_csv(table);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw input_error("failed writing " + path.string());
}

std::vector<std::string> numbered_names(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

} // namespace cate_ebm
