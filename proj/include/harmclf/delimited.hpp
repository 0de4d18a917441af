#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "harmclf/error.hpp"

// Minimal reader/writer for tab-separated and RFC 4180 comma-separated files.
namespace harmclf::delimited {

enum class Format { tsv, csv };

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::vector<Record> parse_tsv(std::string_view content) {
  std::vector<Record> records;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view row = content.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty()) continue;
    Record record{line, {}};
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = row.find('\t', start);
      if (tab == std::string_view::npos) {
        record.fields.emplace_back(row.substr(start));
        break;
      }
      record.fields.emplace_back(row.substr(start, tab - start));
      start = tab + 1;
    }
    records.push_back(std::move(record));
  }
  return records;
}

inline std::vector<Record> parse_csv(std::string_view content) {
  std::vector<Record> records;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = content.size();
  while (i < n) {
    Record record{line, {}};
    std::string field;
    bool row_done = false;
    bool blank = true;
    while (!row_done) {
      field.clear();
      if (i < n && content[i] == '"') {
        blank = false;
        ++i;
        while (true) {
          if (i >= n) throw ParseError(record.line, "unterminated quoted field");
          const char c = content[i++];
          if (c == '"') {
            if (i < n && content[i] == '"') {
              field.push_back('"');
              ++i;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
        if (i < n && content[i] != ',' && content[i] != '\n' && content[i] != '\r')
          throw ParseError(line, "unexpected character after closing quote");
      } else {
        while (i < n && content[i] != ',' && content[i] != '\n' && content[i] != '\r') {
          if (content[i] == '"') throw ParseError(line, "stray quote in unquoted field");
          field.push_back(content[i++]);
        }
        if (!field.empty()) blank = false;
      }
      record.fields.push_back(field);
      if (i >= n) {
        row_done = true;
      } else if (content[i] == ',') {
        blank = false;
        ++i;
      } else {
        if (content[i] == '\r') ++i;
        if (i < n && content[i] == '\n') ++i;
        ++line;
        row_done = true;
      }
    }
    if (!blank) records.push_back(std::move(record));
  }
  return records;
}

inline std::vector<Record> parse(std::string_view content, Format format) {
  if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
  return format == Format::tsv ? parse_tsv(content) : parse_csv(content);
}

inline std::string quote_csv(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_row(const std::vector<std::string>& fields, Format format) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(format == Format::tsv ? '\t' : ',');
    if (format == Format::csv) {
      out += quote_csv(fields[i]);
    } else {
      if (fields[i].find_first_of("\t\r\n") != std::string::npos)
        throw ShapeError("field contains a tab or newline and cannot be written as TSV");
      out += fields[i];
    }
  }
  out.push_back('\n');
  return out;
}

}  // namespace harmclf::delimited
