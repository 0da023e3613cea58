#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace subsense::csv {

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. A UTF-8 byte-order mark at the start is skipped.
class Reader {
 public:
  explicit Reader(std::istream& in, char sep = ',');

  // Next record, or nullopt at end of input. Throws SchemaError on an
  // unterminated quoted field.
  std::optional<std::vector<std::string>> next();
  // 1-based physical line where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char sep_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
  bool first_ = true;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;

  // Index of the first header matching any of `names` (case-insensitive).
  std::optional<std::size_t> column(std::initializer_list<std::string_view> names) const;
};

Table read_table(const std::filesystem::path& path, char sep = ',');

std::string escape(std::string_view field, char sep = ',');
void write_row(std::ostream& out, const std::vector<std::string>& fields, char sep = ',');

}  // namespace subsense::csv
