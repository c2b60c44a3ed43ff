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

#ifndef GRANTSCREEN_LABELS_HPP_
#define GRANTSCREEN_LABELS_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grantscreen/ingest.hpp"

namespace grantscreen::labels {

enum class Split { kTrain, kVal, kTest, kExcluded };

struct HorizonConfig {
  int horizon_years = 5;
  int train_end = 2018;  // first Phase-I year <  train_end -> Train
  int val_end = 2020;    // [train_end, val_end)             -> Val
  int test_end = 2022;   // [val_end, test_end)              -> Test
                         // >= test_end                      -> Excluded
};

struct LabeledCompany {
  std::string company;
  int first_p1_year = 0;
  int label = 0;  // 1 iff a Phase-II award lands within the horizon
  Split split = Split::kExcluded;
};

struct SplitStat {
  std::size_t n = 0;
  std::size_t n_pos = 0;
  double rate() const { return n == 0 ? 0.0 : static_cast<double>(n_pos) / n; }
};

struct SplitSummary {
  SplitStat train, val, test, excluded;
};

// 1 iff any Phase-II award year <= first Phase-I year + horizon (inclusive).
// Throws Error("not_an_awardee") when the company has no Phase-I award.
int compute_label(const std::vector<ingest::CleanAward>& company_awards,
                  const HorizonConfig& cfg);

Split assign_split(int first_p1_year, const HorizonConfig& cfg);

// One row per company holding at least one Phase-I award, sorted by key.
std::pair<std::vector<LabeledCompany>, SplitSummary> label_table(
    const std::vector<ingest::CleanAward>& awards, const HorizonConfig& cfg);

const char* split_name(Split s);
Split split_from_name(const std::string& s);

void write_labels_csv(const std::string& path,
                      const std::vector<LabeledCompany>& table);
std::vector<LabeledCompany> read_labels_csv(const std::string& path);
void write_summary_json(const std::string& path, const SplitSummary& summary);

}  // namespace grantscreen::labels

#endif  // GRANTSCREEN_LABELS_HPP_
