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

#ifndef GRANTSCREEN_METRICS_HPP_
#define GRANTSCREEN_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace grantscreen::metrics {

// Parallel lists; score is the class-1 probability. Every ranking below
// sorts by score descending with ties broken by ascending company id, so
// results are independent of input order.
struct ScoredSet {
  std::vector<std::string> company;
  std::vector<double> score;
  std::vector<int> label;

  std::size_t size() const { return company.size(); }
  std::size_t num_positive() const;
};

// Average precision: mean of precision at each positive's rank.
double auprc(const ScoredSet& s);

// Mann-Whitney statistic; ties between a positive and a negative count 1/2.
double auroc(const ScoredSet& s);

// Threshold grid = distinct validation scores, rule score >= threshold.
// Ties on validation F1 resolve to the lowest threshold; the chosen
// threshold is then applied unchanged to the test set.
std::pair<double, double> f1_optimal(const ScoredSet& val,
                                     const ScoredSet& test);

double f1_at_threshold(const ScoredSet& s, double threshold);

double precision_at_k(const ScoredSet& s, int k);

// lift = precision / base_rate; throws "zero_base_rate" when base_rate is 0.
double lift_ratio(double precision, double base_rate);
double lift_at_k(const ScoredSet& s, int k);

struct EvalReport {
  std::string model;
  std::uint64_t seed = 0;
  double auprc = 0.0;
  double auroc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  std::map<int, double> precision_at;
  std::map<int, double> lift_at;
  double base_rate = 0.0;
  std::size_t n = 0;
  std::size_t n_pos = 0;
};

// Full per-run report. Requested k values exceeding n are dropped (the
// strict precision_at_k/lift_at_k entry points still reject them).
EvalReport evaluate(const std::string& model, std::uint64_t seed,
                    const ScoredSet& val, const ScoredSet& test,
                    const std::vector<int>& ks);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n-1); 0 for n=1
};

// Per-model aggregation across seeds, keyed by metric name
// ("auprc", "auroc", "f1", "p_at_100", "lift_at_100", ...).
std::map<std::string, MetricSummary> aggregate(
    const std::vector<EvalReport>& runs);

void write_eval_report_json(const std::filesystem::path& path,
                            const EvalReport& report);
void write_summary_csv(
    const std::filesystem::path& path,
    const std::map<std::string, std::map<std::string, MetricSummary>>&
        by_model);

}  // namespace grantscreen::metrics

#endif  // GRANTSCREEN_METRICS_HPP_
