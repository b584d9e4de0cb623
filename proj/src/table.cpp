#include "lindistill/table.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lindistill {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

bool needs_quoting(const std::string& cell) {
  return cell.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& cell) {
  if (!needs_quoting(cell)) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_line(const std::string& text, std::size_t& pos) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (;;) {
    if (pos >= text.size()) {
      cells.push_back(cell);
      return cells;
    }
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cell += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c == '\n') {
      cells.push_back(cell);
      return cells;
    } else if (c != '\r') {
      cell += c;
    }
  }
}

}  // namespace

void ResultTable::append_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size())
    throw std::invalid_argument("ResultTable: row width " +
                                std::to_string(cells.size()) +
                                " does not match schema width " +
                                std::to_string(columns.size()));
  rows.push_back(std::move(cells));
}

std::string ResultTable::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out << ',';
    out << quote(columns[i]);
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << quote(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

ResultTable ResultTable::from_csv(const std::string& text) {
  if (text.empty()) throw format_error("csv: empty document");
  ResultTable table;
  std::size_t pos = 0;
  table.columns = parse_line(text, pos);
  while (pos < text.size()) {
    std::vector<std::string> row = parse_line(text, pos);
    if (row.size() == 1 && row[0].empty() && pos >= text.size()) break;
    if (row.size() != table.columns.size())
      throw format_error("csv: row width " + std::to_string(row.size()) +
                         " does not match header width " +
                         std::to_string(table.columns.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("write: cannot open " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw format_error("write: failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("read: cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace lindistill
