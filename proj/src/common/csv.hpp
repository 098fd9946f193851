#pragma once

// Minimal comma-separated text reader/writer: double-quoted fields with ""
// escapes, CRLF tolerated, blank lines skipped. Enough for manifests and
// video lists; not a general CSV dialect engine.

#include <string>
#include <string_view>
#include <vector>

#include "keyframe/core.hpp"

namespace keyframe::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

inline Table parse(std::string_view text, std::string_view what) {
  Table table;
  std::size_t line = 1;
  std::size_t i = 0;
  bool have_header = false;
  while (i < text.size()) {
    Row row;
    std::string field;
    bool quoted = false;
    bool row_done = false;
    const std::size_t row_line = line;
    while (i < text.size() && !row_done) {
      const char c = text[i++];
      if (quoted) {
        if (c == '"') {
          if (i < text.size() && text[i] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        ++line;
        row_done = true;
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    if (quoted) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(what) + ": unterminated quote starting on line " + std::to_string(row_line));
    }
    row.push_back(std::move(field));
    if (row.size() == 1 && row.front().empty()) continue;  // blank line
    if (!have_header) {
      table.header = std::move(row);
      have_header = true;
    } else {
      table.rows.push_back(std::move(row));
      table.line_numbers.push_back(row_line);
    }
  }
  return table;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace keyframe::csv
