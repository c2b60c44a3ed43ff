// Copyright 2026 The grantscreen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "grantscreen/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "grantscreen/errors.hpp"
#include "grantscreen/hash.hpp"

namespace grantscreen {

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

}  // namespace grantscreen

namespace grantscreen::csv {

namespace {

// One pass over the raw text. Records end at an unquoted newline.
Table parse_text(const std::string& text) {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_data = false;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
    record_has_data = true;
  };
  auto end_record = [&] {
    end_field();
    if (table.header.empty()) {
      table.header = std::move(record);
    } else {
      table.rows.push_back(std::move(record));
    }
    record.clear();
    record_has_data = false;
  };

  while (i < n) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else {
      switch (c) {
        case '"':
          if (!field.empty() || field_was_quoted) {
            throw Error("csv_parse", "stray quote inside unquoted field");
          }
          in_quotes = true;
          field_was_quoted = true;
          break;
        case ',':
          end_field();
          break;
        case '\r':
          break;  // swallowed; LF terminates the record
        case '\n':
          end_record();
          break;
        default:
          field.push_back(c);
      }
    }
    ++i;
  }
  if (in_quotes) throw Error("csv_parse", "unterminated quoted field");
  if (!field.empty() || field_was_quoted || record_has_data) end_record();
  return table;
}

bool needs_quoting(const std::string& field) {
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') return true;
  }
  return false;
}

}  // namespace

Table parse(const std::string& text) { return parse_text(text); }

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

std::string escape_field(const std::string& field) {
  if (!needs_quoting(field)) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      out += escape_field(row[i]);
    }
    out.push_back('\n');
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write file: " + path);
  out << format(header, rows);
  if (!out) throw Error("io", "write failed: " + path);
}

void write_file(const std::string& path, const Table& table) {
  write_file(path, table.header, table.rows);
}

std::string format_double(double v) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace grantscreen::csv
