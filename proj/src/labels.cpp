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

#include "grantscreen/labels.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"

namespace grantscreen::labels {

int compute_label(const std::vector<ingest::CleanAward>& company_awards,
                  const HorizonConfig& cfg) {
  int first_p1 = std::numeric_limits<int>::max();
  for (const auto& a : company_awards) {
    if (a.phase == ingest::Phase::kOne) first_p1 = std::min(first_p1, a.year);
  }
  if (first_p1 == std::numeric_limits<int>::max()) {
    throw Error("not_an_awardee", "company has no Phase-I award");
  }
  for (const auto& a : company_awards) {
    if (a.phase == ingest::Phase::kTwo &&
        a.year <= first_p1 + cfg.horizon_years) {
      return 1;
    }
  }
  return 0;
}

Split assign_split(int first_p1_year, const HorizonConfig& cfg) {
  if (first_p1_year < cfg.train_end) return Split::kTrain;
  if (first_p1_year < cfg.val_end) return Split::kVal;
  if (first_p1_year < cfg.test_end) return Split::kTest;
  return Split::kExcluded;
}

std::pair<std::vector<LabeledCompany>, SplitSummary> label_table(
    const std::vector<ingest::CleanAward>& awards, const HorizonConfig& cfg) {
  std::map<std::string, std::vector<ingest::CleanAward>> by_company;
  for (const auto& a : awards) by_company[a.company].push_back(a);

  std::vector<LabeledCompany> table;
  SplitSummary summary;
  for (const auto& [company, rows] : by_company) {
    int first_p1 = std::numeric_limits<int>::max();
    for (const auto& a : rows) {
      if (a.phase == ingest::Phase::kOne) first_p1 = std::min(first_p1, a.year);
    }
    if (first_p1 == std::numeric_limits<int>::max()) continue;  // never a Phase-I awardee

    LabeledCompany row;
    row.company = company;
    row.first_p1_year = first_p1;
    row.label = compute_label(rows, cfg);
    row.split = assign_split(first_p1, cfg);
    SplitStat* stat = nullptr;
    switch (row.split) {
      case Split::kTrain: stat = &summary.train; break;
      case Split::kVal: stat = &summary.val; break;
      case Split::kTest: stat = &summary.test; break;
      case Split::kExcluded: stat = &summary.excluded; break;
    }
    ++stat->n;
    stat->n_pos += static_cast<std::size_t>(row.label);
    table.push_back(std::move(row));
  }
  return {std::move(table), summary};
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kExcluded: return "excluded";
  }
  return "excluded";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "excluded") return Split::kExcluded;
  throw Error("schema", "unknown split name: " + s);
}

void write_labels_csv(const std::string& path,
                      const std::vector<LabeledCompany>& table) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.size());
  for (const auto& r : table) {
    rows.push_back({r.company, std::to_string(r.first_p1_year),
                    std::to_string(r.label), split_name(r.split)});
  }
  csv::write_file(path, {"company", "first_p1_year", "label", "split"}, rows);
}

std::vector<LabeledCompany> read_labels_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expect = {"company", "first_p1_year", "label",
                                           "split"};
  if (t.header != expect) throw Error("schema", "not a labels CSV: " + path);
  std::vector<LabeledCompany> table;
  table.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    if (r.size() != 4) throw Error("schema", "ragged row in labels CSV");
    LabeledCompany row;
    row.company = r[0];
    row.first_p1_year = std::stoi(r[1]);
    row.label = std::stoi(r[2]);
    row.split = split_from_name(r[3]);
    table.push_back(std::move(row));
  }
  return table;
}

void write_summary_json(const std::string& path, const SplitSummary& summary) {
  auto stat = [](const SplitStat& s) {
    return nlohmann::json{{"n", s.n}, {"n_pos", s.n_pos}, {"rate", s.rate()}};
  };
  nlohmann::json j{{"train", stat(summary.train)},
                   {"val", stat(summary.val)},
                   {"test", stat(summary.test)},
                   {"excluded", stat(summary.excluded)}};
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace grantscreen::labels
