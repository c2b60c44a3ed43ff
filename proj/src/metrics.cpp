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

#include "grantscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"

namespace grantscreen::metrics {

namespace {

using json = nlohmann::json;

void check_consistent(const ScoredSet& s) {
  if (s.company.size() != s.score.size() ||
      s.company.size() != s.label.size()) {
    throw Error("scored_set", "parallel lists have different lengths");
  }
  if (s.company.empty()) throw Error("scored_set", "empty scored set");
  for (int y : s.label) {
    if (y != 0 && y != 1) throw Error("scored_set", "labels must be 0 or 1");
  }
}

// Indices sorted by score descending, company id ascending.
std::vector<std::size_t> ranking(const ScoredSet& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&s](std::size_t a, std::size_t b) {
    if (s.score[a] != s.score[b]) return s.score[a] > s.score[b];
    return s.company[a] < s.company[b];
  });
  return idx;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0;
};

Confusion confusion_at(const ScoredSet& s, double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred = s.score[i] >= threshold;
    if (pred && s.label[i] == 1) c.tp += 1;
    else if (pred && s.label[i] == 0) c.fp += 1;
    else if (!pred && s.label[i] == 1) c.fn += 1;
  }
  return c;
}

double f1_of(const Confusion& c) {
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

}  // namespace

std::size_t ScoredSet::num_positive() const {
  std::size_t n = 0;
  for (int y : label) n += static_cast<std::size_t>(y == 1);
  return n;
}

double auprc(const ScoredSet& s) {
  check_consistent(s);
  const std::size_t n_pos = s.num_positive();
  if (n_pos == 0) {
    throw Error("undefined_metric", "average precision needs a positive");
  }
  auto idx = ranking(s);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (s.label[idx[k]] == 1) {
      hits += 1;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(n_pos);
}

double auroc(const ScoredSet& s) {
  check_consistent(s);
  const std::size_t n_pos = s.num_positive();
  const std::size_t n_neg = s.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error("undefined_metric", "AUROC needs both classes");
  }
  // Rank-sum over scores ascending; tied scores share their average rank.
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&s](std::size_t a, std::size_t b) {
    return s.score[a] < s.score[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && s.score[idx[j + 1]] == s.score[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (s.label[idx[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double f1_at_threshold(const ScoredSet& s, double threshold) {
  check_consistent(s);
  return f1_of(confusion_at(s, threshold));
}

std::pair<double, double> f1_optimal(const ScoredSet& val,
                                     const ScoredSet& test) {
  check_consistent(val);
  check_consistent(test);
  std::set<double> grid(val.score.begin(), val.score.end());
  double best_threshold = 0.0;
  double best_f1 = -1.0;
  for (double t : grid) {  // ascending, so ties keep the lowest threshold
    const double f1 = f1_of(confusion_at(val, t));
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = t;
    }
  }
  return {best_threshold, f1_of(confusion_at(test, best_threshold))};
}

double precision_at_k(const ScoredSet& s, int k) {
  check_consistent(s);
  if (k < 1 || static_cast<std::size_t>(k) > s.size()) {
    throw Error("k_exceeds_n", "k=" + std::to_string(k) + " with n=" +
                                   std::to_string(s.size()));
  }
  auto idx = ranking(s);
  std::size_t hits = 0;
  for (int i = 0; i < k; ++i) {
    hits += static_cast<std::size_t>(s.label[idx[static_cast<std::size_t>(i)]]);
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

double lift_ratio(double precision, double base_rate) {
  if (base_rate == 0.0) throw Error("zero_base_rate", "base rate is zero");
  return precision / base_rate;
}

double lift_at_k(const ScoredSet& s, int k) {
  const double p = precision_at_k(s, k);
  const double base =
      static_cast<double>(s.num_positive()) / static_cast<double>(s.size());
  return lift_ratio(p, base);
}

EvalReport evaluate(const std::string& model, std::uint64_t seed,
                    const ScoredSet& val, const ScoredSet& test,
                    const std::vector<int>& ks) {
  EvalReport r;
  r.model = model;
  r.seed = seed;
  r.n = test.size();
  r.n_pos = test.num_positive();
  r.base_rate = static_cast<double>(r.n_pos) / static_cast<double>(r.n);
  r.auprc = auprc(test);
  r.auroc = auroc(test);
  std::tie(r.threshold, r.f1) = f1_optimal(val, test);
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > test.size()) continue;
    r.precision_at[k] = precision_at_k(test, k);
    r.lift_at[k] = lift_at_k(test, k);
  }
  return r;
}

std::map<std::string, MetricSummary> aggregate(
    const std::vector<EvalReport>& runs) {
  std::map<std::string, std::vector<double>> series;
  for (const EvalReport& r : runs) {
    series["auprc"].push_back(r.auprc);
    series["auroc"].push_back(r.auroc);
    series["f1"].push_back(r.f1);
    for (const auto& [k, v] : r.precision_at) {
      series["p_at_" + std::to_string(k)].push_back(v);
    }
    for (const auto& [k, v] : r.lift_at) {
      series["lift_at_" + std::to_string(k)].push_back(v);
    }
  }
  std::map<std::string, MetricSummary> out;
  for (const auto& [name, xs] : series) {
    MetricSummary m;
    const double n = static_cast<double>(xs.size());
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - m.mean) * (x - m.mean);
      m.stddev = std::sqrt(ss / (n - 1.0));
    }
    out[name] = m;
  }
  return out;
}

void write_eval_report_json(const std::filesystem::path& path,
                            const EvalReport& report) {
  json j = {{"model", report.model},
            {"seed", report.seed},
            {"auprc", report.auprc},
            {"auroc", report.auroc},
            {"f1", report.f1},
            {"threshold", report.threshold},
            {"base_rate", report.base_rate},
            {"n", report.n},
            {"n_pos", report.n_pos}};
  json p = json::object(), l = json::object();
  for (const auto& [k, v] : report.precision_at) p[std::to_string(k)] = v;
  for (const auto& [k, v] : report.lift_at) l[std::to_string(k)] = v;
  j["precision_at"] = p;
  j["lift_at"] = l;
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_summary_csv(
    const std::filesystem::path& path,
    const std::map<std::string, std::map<std::string, MetricSummary>>&
        by_model) {
  csv::Table t;
  t.header = {"model", "metric", "mean", "std"};
  for (const auto& [model, summary] : by_model) {
    for (const auto& [metric, m] : summary) {
      t.rows.push_back({model, metric, csv::format_double(m.mean),
                        csv::format_double(m.stddev)});
    }
  }
  csv::write_file(path.string(), t);
}

}  // namespace grantscreen::metrics
