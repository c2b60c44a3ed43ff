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

#ifndef GRANTSCREEN_SYNTH_HPP_
#define GRANTSCREEN_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grantscreen/ingest.hpp"

namespace grantscreen::synth {

struct SynthConfig {
  int n_companies = 2000;
  int n_topics = 20;
  int n_agencies = 5;
  int year_min = 2005;
  int year_max = 2023;
  double awards_poisson_mean = 1.8;  // count = 1 + Poisson(mean)
  double zipf_s = 1.1;
  double sigma_topic = 1.0;
  double sigma_agency = 0.5;
  double lambda = 0.7;  // weight of the same-topic mixing term
  double target_rate = 0.42;
  double amount_median = 120000.0;
  double amount_log_sigma = 0.6;
  // First-award cohort mass; val/test windows are deliberately overweighted
  // relative to a uniform year draw so their cohorts are large enough to
  // evaluate on.
  double w_train = 0.50;
  double w_val = 0.22;
  double w_test = 0.22;
  int train_end = 2018;
  int val_end = 2020;
  int test_end = 2022;
  bool dirty = true;
  std::uint64_t seed = 7;
};

struct TruthRow {
  std::string company;  // canonical key
  std::string topic;
  std::string agency;
  int first_p1_year = 0;
  int label = 0;
  double p_success = 0.0;
};

struct SynthOutput {
  std::vector<ingest::RawAwardRecord> records;
  std::vector<TruthRow> truth;  // sorted by company key
  double intercept = 0.0;
  double realized_rate = 0.0;
};

// Deterministic per seed. Phase-II success probability is
//   sigmoid(intercept + topic_effect + agency_effect + lambda * mix)
// where mix is the mean (topic_effect + agency_effect) over same-topic
// companies; the intercept is bisected so the mean probability hits
// target_rate. Successful companies receive one Phase-II record within five
// years of their first Phase-I award, so labels are recoverable exactly.
// None of the signal enters the tabular features directly.
SynthOutput generate(const SynthConfig& cfg);

void write_raw_csv(const std::filesystem::path& path,
                   const std::vector<ingest::RawAwardRecord>& records);
void write_truth_json(const std::filesystem::path& path, const SynthConfig& cfg,
                      const SynthOutput& out);

}  // namespace grantscreen::synth

#endif  // GRANTSCREEN_SYNTH_HPP_
