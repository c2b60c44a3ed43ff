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

#ifndef GRANTSCREEN_CSV_HPP_
#define GRANTSCREEN_CSV_HPP_

#include <string>
#include <vector>

namespace grantscreen::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // may be ragged; callers validate
};

// RFC-4180: quoted fields, "" escapes, embedded commas/newlines, CRLF or LF.
// Throws Error("io") on unreadable files, Error("csv_parse") on a dangling
// quote or stray quote inside an unquoted field.
Table read_file(const std::string& path);
Table parse(const std::string& text);

std::string escape_field(const std::string& field);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);
void write_file(const std::string& path, const Table& table);
std::string format(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

}  // namespace grantscreen::csv

#endif  // GRANTSCREEN_CSV_HPP_
