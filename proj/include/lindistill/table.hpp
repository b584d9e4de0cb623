#pragma once

#include <string>
#include <vector>

#include "lindistill/core.hpp"

namespace lindistill {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

// Columnar results with string cells; numbers go through format_double so a
// written table re-parses to the identical in-memory value.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void append_row(std::vector<std::string> cells);
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text);

  bool operator==(const ResultTable& other) const = default;
};

// Writes via a temp file in the same directory plus rename, so readers
// never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace lindistill
