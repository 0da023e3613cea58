#include "subsense/csv.hpp"

#include <algorithm>
#include <fstream>

#include "subsense/error.hpp"

namespace subsense::csv {

Reader::Reader(std::istream& in, char sep) : in_(in), sep_(sep) {}

std::optional<std::vector<std::string>> Reader::next() {
  if (first_) {
    first_ = false;
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF)) {
        in_.seekg(0);
      }
    }
  }
  int ch = in_.get();
  // Skip blank lines between records.
  while (ch == '\n' || ch == '\r') {
    if (ch == '\n') ++line_;
    ch = in_.get();
  }
  if (ch == std::char_traits<char>::eof()) return std::nullopt;

  record_line_ = line_;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  while (true) {
    if (ch == std::char_traits<char>::eof()) {
      if (quoted) {
        throw SchemaError("csv: unterminated quoted field starting at line " +
                          std::to_string(record_line_));
      }
      fields.push_back(std::move(field));
      return fields;
    }
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in_.peek() == '"') {
          field.push_back('"');
          in_.get();
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (c == sep_) {
      fields.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && in_.peek() == '\n') in_.get();
      ++line_;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field.push_back(c);
    }
    ch = in_.get();
  }
}

std::optional<std::size_t> Table::column(std::initializer_list<std::string_view> names) const {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    return out;
  };
  for (auto name : names) {
    const auto want = lower(name);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(header[i]) == want) return i;
    }
  }
  return std::nullopt;
}

Table read_table(const std::filesystem::path& path, char sep) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read csv: " + path.string());
  Reader reader(in, sep);
  Table t;
  auto header = reader.next();
  if (!header) throw SchemaError("csv has no header: " + path.string());
  t.header = std::move(*header);
  while (auto row = reader.next()) {
    t.rows.push_back(std::move(*row));
    t.row_lines.push_back(reader.line());
  }
  return t;
}

std::string escape(std::string_view field, char sep) {
  const bool needs = field.find_first_of(std::string{sep, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char sep) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << sep;
    out << escape(fields[i], sep);
  }
  out << '\n';
}

}  // namespace subsense::csv
