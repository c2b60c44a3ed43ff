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

#include "grantscreen/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"

namespace grantscreen::ingest {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char upper_ascii(char c) {
  return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (is_space(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::optional<std::string> normalize_company_name(const std::string& name,
                                                  const IngestConfig& cfg) {
  std::string cleaned;
  cleaned.reserve(name.size());
  for (char c : name) {
    if (c == '.' || c == ',') continue;
    cleaned.push_back(upper_ascii(c));
  }

  std::vector<std::string> tokens = split_tokens(cleaned);
  if (tokens.empty()) return std::nullopt;

  auto is_suffix = [&cfg](const std::string& tok) {
    return std::find(cfg.legal_suffixes.begin(), cfg.legal_suffixes.end(),
                     tok) != cfg.legal_suffixes.end();
  };
  // Strip one trailing suffix, but never expose another suffix as the new
  // tail: "ACME CO LTD" stays put, so normalize(normalize(x)) == normalize(x).
  if (is_suffix(tokens.back()) &&
      (tokens.size() < 2 || !is_suffix(tokens[tokens.size() - 2]))) {
    tokens.pop_back();
  }
  if (tokens.empty()) return std::nullopt;

  std::string key = tokens[0];
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    key.push_back(' ');
    key += tokens[i];
  }
  return key;
}

std::optional<Phase> parse_phase(const std::string& text) {
  std::string upper;
  upper.reserve(text.size());
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      upper.push_back(upper_ascii(c));
    } else {
      upper.push_back(' ');
    }
  }
  // The first token that is a whole roman numeral or a whole digit run
  // decides; keywords ("PHASE", program names) are skipped. III and beyond
  // are not in the schema, so they fail rather than fall through.
  for (const std::string& tok : split_tokens(upper)) {
    const bool roman = std::all_of(tok.begin(), tok.end(), [](char c) {
      return c == 'I' || c == 'V' || c == 'X';
    });
    const bool digits = std::all_of(tok.begin(), tok.end(), [](char c) {
      return c >= '0' && c <= '9';
    });
    if (roman) {
      if (tok == "I") return Phase::kOne;
      if (tok == "II") return Phase::kTwo;
      return std::nullopt;
    }
    if (digits) {
      if (tok == "1") return Phase::kOne;
      if (tok == "2") return Phase::kTwo;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<std::string> extract_topic_prefix(const std::string& code) {
  std::string prefix;
  for (char c : trim(code)) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      prefix.push_back(upper_ascii(c));
    } else {
      break;
    }
  }
  if (prefix.empty()) return std::nullopt;
  return prefix;
}

std::optional<double> parse_amount(const std::string& text) {
  std::string digits;
  digits.reserve(text.size());
  for (char c : text) {
    if (c == '$' || c == ',' || is_space(c)) continue;
    digits.push_back(c);
  }
  if (digits.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = digits.data();
  const char* end = begin + digits.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  if (!(value >= 0.0) || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<int> parse_year(const std::string& text, const IngestConfig& cfg) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  if (value < cfg.min_year || value > cfg.max_year) return std::nullopt;
  return value;
}

std::pair<std::vector<CleanAward>, IngestReport> clean_records(
    const std::vector<RawAwardRecord>& rows, const IngestConfig& cfg) {
  std::vector<CleanAward> out;
  out.reserve(rows.size());
  IngestReport report;

  auto reject = [&report](const char* reason) {
    ++report.rejected;
    ++report.rejection_reasons[reason];
  };

  for (const RawAwardRecord& row : rows) {
    const auto company = normalize_company_name(row.company_name, cfg);
    if (!company) {
      reject("empty_name");
      continue;
    }
    const auto amount = parse_amount(row.award_amount);
    if (!amount) {
      reject("bad_amount");
      continue;
    }
    const auto year = parse_year(row.award_year, cfg);
    if (!year) {
      reject("bad_year");
      continue;
    }
    const auto phase = parse_phase(row.phase);
    if (!phase) {
      reject("bad_phase");
      continue;
    }
    std::string agency;
    for (char c : trim(row.agency)) agency.push_back(upper_ascii(c));
    if (agency.empty()) {
      reject("bad_agency");
      continue;
    }
    const auto topic = extract_topic_prefix(row.topic_code);
    if (!topic) {
      reject("bad_topic");
      continue;
    }
    ++report.accepted;
    out.push_back(CleanAward{*company, *amount, *year, *phase, agency, *topic,
                             trim(row.topic_code)});
  }
  return {std::move(out), report};
}

const char* phase_name(Phase p) { return p == Phase::kOne ? "I" : "II"; }

namespace {

Phase phase_from_name(const std::string& s) {
  if (s == "I") return Phase::kOne;
  if (s == "II") return Phase::kTwo;
  throw Error("schema", "bad phase value in clean CSV: " + s);
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::vector<RawAwardRecord> read_raw_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::vector<std::string> expect = {"company", "amount", "year",
                                           "phase",   "agency", "topic"};
  if (table.header != expect) {
    throw Error("schema",
                "raw awards CSV must have header company,amount,year,phase,agency,topic");
  }
  std::vector<RawAwardRecord> rows;
  rows.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    RawAwardRecord rec;
    if (r.size() > 0) rec.company_name = r[0];
    if (r.size() > 1) rec.award_amount = r[1];
    if (r.size() > 2) rec.award_year = r[2];
    if (r.size() > 3) rec.phase = r[3];
    if (r.size() > 4) rec.agency = r[4];
    if (r.size() > 5) rec.topic_code = r[5];
    rows.push_back(std::move(rec));
  }
  return rows;
}

void write_clean_csv(const std::string& path,
                     const std::vector<CleanAward>& awards) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(awards.size());
  for (const CleanAward& a : awards) {
    rows.push_back({a.company, format_double(a.amount), std::to_string(a.year),
                    phase_name(a.phase), a.agency, a.topic, a.topic_full});
  }
  csv::write_file(path,
                  {"company", "amount", "year", "phase", "agency", "topic",
                   "topic_full"},
                  rows);
}

std::vector<CleanAward> read_clean_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  const std::vector<std::string> expect = {"company", "amount", "year",
                                           "phase",   "agency", "topic",
                                           "topic_full"};
  if (table.header != expect) {
    throw Error("schema", "not a clean awards CSV: " + path);
  }
  std::vector<CleanAward> awards;
  awards.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    if (r.size() != 7) throw Error("schema", "ragged row in clean CSV");
    CleanAward a;
    a.company = r[0];
    a.amount = std::stod(r[1]);
    a.year = std::stoi(r[2]);
    a.phase = phase_from_name(r[3]);
    a.agency = r[4];
    a.topic = r[5];
    a.topic_full = r[6];
    awards.push_back(std::move(a));
  }
  return awards;
}

void write_report_json(const std::string& path, const IngestReport& report) {
  nlohmann::json j;
  j["accepted"] = report.accepted;
  j["rejected"] = report.rejected;
  j["rejection_reasons"] = report.rejection_reasons;
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace grantscreen::ingest
