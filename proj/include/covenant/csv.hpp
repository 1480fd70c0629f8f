#pragma once

// Small RFC 4180 reader/writer: quoted fields, doubled quotes, CRLF.

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covenant/error.hpp"

namespace covenant {
namespace csv {

using Row = std::vector<std::string>;

// Returns nullopt at end of input. Quoted fields may span lines.
inline std::optional<Row> read_row(std::istream& in, std::size_t& line_no) {
  Row row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      ++line_no;
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(c);
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "CSV read failed");
  if (in_quotes) throw Error(ErrorCode::kParse, "unterminated quoted CSV field near line " + std::to_string(line_no));
  if (!any) return std::nullopt;
  ++line_no;
  row.push_back(std::move(field));
  return row;
}

inline std::string quote_field(std::string_view f) {
  if (f.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += quote_field(row[i]);
  }
  out.push_back('\n');
  return out;
}

// A parsed table with a required header row; rows are looked up by column name.
class Table {
 public:
  static Table parse(std::istream& in, const std::vector<std::string>& required_columns) {
    Table t;
    std::size_t line_no = 0;
    auto header = read_row(in, line_no);
    if (!header) throw Error(ErrorCode::kParse, "CSV is missing its header row");
    for (std::size_t i = 0; i < header->size(); ++i) {
      std::string name = (*header)[i];
      if (i == 0 && name.size() >= 3 && name.compare(0, 3, "\xEF\xBB\xBF") == 0) name.erase(0, 3);
      t.columns_[name] = i;
    }
    for (const auto& col : required_columns) {
      if (!t.columns_.count(col)) throw Error(ErrorCode::kParse, "CSV header lacks column '" + col + "'");
    }
    while (true) {
      const std::size_t row_line = line_no + 1;
      auto row = read_row(in, line_no);
      if (!row) break;
      if (row->size() == 1 && (*row)[0].empty()) continue;
      if (row->size() > header->size()) {
        throw Error(ErrorCode::kParse, "CSV line " + std::to_string(row_line) + " has too many fields");
      }
      row->resize(header->size());
      t.rows_.push_back(std::move(*row));
      t.lines_.push_back(row_line);
    }
    return t;
  }

  static Table load(const std::string& path, const std::vector<std::string>& required_columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
    return parse(in, required_columns);
  }

  std::size_t size() const { return rows_.size(); }
  std::size_t line(std::size_t row) const { return lines_[row]; }
  bool has_column(const std::string& name) const { return columns_.count(name) > 0; }

  const std::string& get(std::size_t row, const std::string& column) const {
    static const std::string kEmpty;
    auto it = columns_.find(column);
    return it == columns_.end() ? kEmpty : rows_[row][it->second];
  }

 private:
  std::map<std::string, std::size_t> columns_;
  std::vector<Row> rows_;
  std::vector<std::size_t> lines_;
};

}  // namespace csv
}  // namespace covenant
