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

#ifndef GRANTSCREEN_INGEST_HPP_
#define GRANTSCREEN_INGEST_HPP_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace grantscreen::ingest {

// A raw row as it arrives from the awards CSV; every field may be dirty.
struct RawAwardRecord {
  std::string company_name;
  std::string award_amount;
  std::string award_year;
  std::string phase;
  std::string agency;
  std::string topic_code;
};

enum class Phase { kOne, kTwo };

// A fully resolved record. `company` is a canonical key: uppercase, legal
// suffix stripped, single-spaced, and stable under re-normalization.
struct CleanAward {
  std::string company;
  double amount = 0.0;
  int year = 0;
  Phase phase = Phase::kOne;
  std::string agency;
  std::string topic;       // leading alphabetic prefix of the code
  std::string topic_full;  // original code, kept for audit
};

struct IngestConfig {
  std::vector<std::string> legal_suffixes = {
      "INC",  "LLC",          "LTD",         "CORP",    "CO",
      "LP",   "LLP",          "GMBH",        "PLC",     "INCORPORATED",
      "CORPORATION", "COMPANY", "LIMITED"};
  int min_year = 1980;
  int max_year = 2030;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> rejection_reasons;
};

// Canonicalization: uppercase ASCII, drop '.' and ',', collapse whitespace,
// then strip one trailing legal-suffix token. The strip is skipped when the
// preceding token is itself a suffix, which keeps the map idempotent on
// names like "ACME CO LTD" without iterating.
// Returns nullopt when nothing remains ("empty_name").
std::optional<std::string> normalize_company_name(const std::string& name,
                                                  const IngestConfig& cfg);

// First roman-numeral or single-digit token after an optional "phase"
// keyword; only I/II parse, anything else (including III) is unparseable.
std::optional<Phase> parse_phase(const std::string& text);

// Leading alphabetic run of the code, uppercased.
std::optional<std::string> extract_topic_prefix(const std::string& code);

// Strips '$', ',' and spaces before the numeric parse; rejects negatives.
std::optional<double> parse_amount(const std::string& text);

std::optional<int> parse_year(const std::string& text, const IngestConfig& cfg);

// Per-row failures are tallied in the report, never thrown;
// accepted + rejected always equals rows.size().
std::pair<std::vector<CleanAward>, IngestReport> clean_records(
    const std::vector<RawAwardRecord>& rows, const IngestConfig& cfg);

// CSV adapters. Input header: company,amount,year,phase,agency,topic.
std::vector<RawAwardRecord> read_raw_csv(const std::string& path);
void write_clean_csv(const std::string& path,
                     const std::vector<CleanAward>& awards);
std::vector<CleanAward> read_clean_csv(const std::string& path);
void write_report_json(const std::string& path, const IngestReport& report);

const char* phase_name(Phase p);

}  // namespace grantscreen::ingest

#endif  // GRANTSCREEN_INGEST_HPP_
