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

#include "grantscreen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"
#include "grantscreen/rng.hpp"

namespace grantscreen::synth {

namespace {

using json = nlohmann::json;

const char* kTopicWords[] = {
    "ALPHA", "BRAVO", "CHARLIE", "DELTA",  "ECHO",   "FOXTROT", "GOLF",
    "HOTEL", "INDIA", "JULIET",  "KILO",   "LIMA",   "MIKE",    "NOVEMBER",
    "OSCAR", "PAPA",  "QUEBEC",  "ROMEO",  "SIERRA", "TANGO",   "UNIFORM",
    "VICTOR", "WHISKEY", "XRAY", "YANKEE", "ZULU"};

const char* kAgencyWords[] = {"DOD", "NSF", "DOE", "NASA", "HHS",
                              "USDA", "DOT", "EPA", "ED", "DOC"};

// Name vocabulary deliberately avoids every legal-suffix token so the
// canonical keys survive suffix stripping unchanged.
const char* kNameFirst[] = {"QUANTUM", "APEX",   "NOVA",    "STELLAR",
                            "FUSION",  "VERTEX", "CRYO",    "HELIO",
                            "TERRA",   "AERO",   "BIO",     "NANO",
                            "HYDRO",   "PYRO",   "LUMEN",   "ORBIT"};
const char* kNameSecond[] = {"DYNAMICS", "SYSTEMS",  "LABS",     "ANALYTICS",
                             "ROBOTICS", "PHOTONICS", "MATERIALS", "SENSORS",
                             "THERAPEUTICS", "DIAGNOSTICS", "PROPULSION",
                             "OPTICS",   "GENOMICS", "ENERGETICS", "ACOUSTICS",
                             "INSTRUMENTS"};

const char* kSuffixVariants[] = {", Inc.", " LLC",   " Ltd.",  ", Corp.",
                                 " Inc",   ", LLC",  " L.L.C.", ""};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Random case-mangling plus decorative suffix and stray spaces; the result
// must normalize back to `base` exactly.
std::string dirty_name(const std::string& base, Rng& rng) {
  std::string out;
  const int style = rng.uniform_int(0, 3);
  for (char c : base) {
    switch (style) {
      case 0:  // unchanged
        out.push_back(c);
        break;
      case 1:  // lowercase
        out.push_back(static_cast<char>(std::tolower(c)));
        break;
      case 2:  // title-ish case
        out.push_back((out.empty() || out.back() == ' ')
                          ? c
                          : static_cast<char>(std::tolower(c)));
        break;
      default:  // random per-character case
        out.push_back(rng.bernoulli(0.5)
                          ? c
                          : static_cast<char>(std::tolower(c)));
    }
  }
  out += kSuffixVariants[rng.uniform_index(std::size(kSuffixVariants))];
  if (rng.bernoulli(0.3)) out.insert(0, " ");
  if (rng.bernoulli(0.3)) out.push_back(' ');
  if (rng.bernoulli(0.2)) {
    const std::size_t sp = out.find(' ', 1);
    if (sp != std::string::npos) out.insert(sp, " ");
  }
  return out;
}

std::string dirty_amount(double amount, Rng& rng) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0f", amount);
  std::string digits = buf;
  if (rng.bernoulli(0.5)) {
    // thousands separators
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) {
      digits.insert(static_cast<std::size_t>(i), ",");
    }
  }
  if (rng.bernoulli(0.5)) digits.insert(0, "$");
  if (rng.bernoulli(0.2)) digits.insert(0, " ");
  return digits;
}

std::string phase_string(bool phase_two, Rng& rng) {
  static const char* kOne[] = {"I", "1", "Phase I", "Phase 1", "PHASE I",
                               "SBIR Phase I", "phase 1"};
  static const char* kTwo[] = {"II", "2", "Phase II", "Phase 2", "PHASE II",
                               "SBIR Phase II", "phase 2"};
  return phase_two ? kTwo[rng.uniform_index(std::size(kTwo))]
                   : kOne[rng.uniform_index(std::size(kOne))];
}

std::string dirty_agency(const std::string& agency, Rng& rng) {
  std::string out = agency;
  if (rng.bernoulli(0.3)) {
    for (char& c : out) c = static_cast<char>(std::tolower(c));
  }
  if (rng.bernoulli(0.2)) out.push_back(' ');
  return out;
}

}  // namespace

SynthOutput generate(const SynthConfig& cfg) {
  if (cfg.n_companies < 1 ||
      cfg.n_topics < 1 ||
      cfg.n_topics > static_cast<int>(std::size(kTopicWords)) ||
      cfg.n_agencies < 1 ||
      cfg.n_agencies > static_cast<int>(std::size(kAgencyWords)) ||
      cfg.year_min >= cfg.year_max || cfg.target_rate <= 0.0 ||
      cfg.target_rate >= 1.0 || cfg.w_train + cfg.w_val + cfg.w_test > 1.0) {
    throw Error("synth_config", "invalid generator configuration");
  }
  Rng rng(cfg.seed);

  std::vector<double> topic_effect(cfg.n_topics);
  for (double& e : topic_effect) e = cfg.sigma_topic * rng.normal();
  std::vector<double> agency_effect(cfg.n_agencies);
  for (double& e : agency_effect) e = cfg.sigma_agency * rng.normal();

  // Zipf popularity over topics.
  std::vector<double> zipf_cum(cfg.n_topics);
  double z = 0.0;
  for (int k = 0; k < cfg.n_topics; ++k) {
    z += std::pow(static_cast<double>(k + 1), -cfg.zipf_s);
    zipf_cum[static_cast<std::size_t>(k)] = z;
  }
  for (double& c : zipf_cum) c /= z;
  auto draw_topic = [&rng, &zipf_cum] {
    const double u = rng.uniform();
    return static_cast<int>(std::lower_bound(zipf_cum.begin(), zipf_cum.end(), u) -
                            zipf_cum.begin());
  };

  struct Company {
    std::string name;
    int topic = 0;
    int agency = 0;
    int first_year = 0;
    std::vector<int> p1_years;
    std::vector<double> p1_amounts;
    double propensity = 0.0;
    double p_success = 0.0;
    bool success = false;
  };
  std::vector<Company> companies(static_cast<std::size_t>(cfg.n_companies));

  const double w_excl = 1.0 - cfg.w_train - cfg.w_val - cfg.w_test;
  const double amount_mu = std::log(cfg.amount_median);
  for (int i = 0; i < cfg.n_companies; ++i) {
    Company& c = companies[static_cast<std::size_t>(i)];
    c.name = std::string(kNameFirst[rng.uniform_index(std::size(kNameFirst))]) +
             " " + kNameSecond[rng.uniform_index(std::size(kNameSecond))] +
             " " + zero_pad(i, 4);
    c.topic = draw_topic();
    c.agency = rng.uniform_int(0, cfg.n_agencies - 1);

    const double u = rng.uniform();
    int lo, hi;
    if (u < cfg.w_train) {
      lo = cfg.year_min;
      hi = cfg.train_end - 1;
    } else if (u < cfg.w_train + cfg.w_val) {
      lo = cfg.train_end;
      hi = cfg.val_end - 1;
    } else if (u < cfg.w_train + cfg.w_val + cfg.w_test) {
      lo = cfg.val_end;
      hi = cfg.test_end - 1;
    } else {
      lo = cfg.test_end;
      hi = cfg.year_max;
    }
    (void)w_excl;
    c.first_year = rng.uniform_int(std::min(lo, hi), std::max(lo, hi));

    const int n_awards = 1 + rng.poisson(cfg.awards_poisson_mean);
    c.p1_years.push_back(c.first_year);
    const int span_hi = std::min(c.first_year + 3, cfg.year_max);
    for (int a = 1; a < n_awards; ++a) {
      c.p1_years.push_back(rng.uniform_int(c.first_year, span_hi));
    }
    for (int a = 0; a < n_awards; ++a) {
      c.p1_amounts.push_back(rng.lognormal(amount_mu, cfg.amount_log_sigma));
    }
    c.propensity = topic_effect[static_cast<std::size_t>(c.topic)] +
                   agency_effect[static_cast<std::size_t>(c.agency)];
  }

  // Same-topic mixing: the planted relational signal. A tabular model sees
  // none of this through the engineered features.
  std::vector<double> topic_sum(static_cast<std::size_t>(cfg.n_topics), 0.0);
  std::vector<int> topic_count(static_cast<std::size_t>(cfg.n_topics), 0);
  for (const Company& c : companies) {
    topic_sum[static_cast<std::size_t>(c.topic)] += c.propensity;
    topic_count[static_cast<std::size_t>(c.topic)] += 1;
  }
  std::vector<double> score(companies.size());
  for (std::size_t i = 0; i < companies.size(); ++i) {
    const Company& c = companies[i];
    const double mix = topic_sum[static_cast<std::size_t>(c.topic)] /
                       static_cast<double>(topic_count[static_cast<std::size_t>(c.topic)]);
    score[i] = c.propensity + cfg.lambda * mix;
  }

  // Bisect the intercept so the mean success probability hits target_rate.
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double s : score) mean += sigmoid(mid + s);
    mean /= static_cast<double>(score.size());
    if (mean < cfg.target_rate) lo = mid;
    else hi = mid;
  }
  const double intercept = 0.5 * (lo + hi);

  std::size_t positives = 0;
  for (std::size_t i = 0; i < companies.size(); ++i) {
    Company& c = companies[i];
    c.p_success = sigmoid(intercept + score[i]);
    c.success = rng.bernoulli(c.p_success);
    positives += static_cast<std::size_t>(c.success);
  }

  SynthOutput out;
  out.intercept = intercept;
  out.realized_rate =
      static_cast<double>(positives) / static_cast<double>(companies.size());

  for (const Company& c : companies) {
    const std::string topic_code =
        kTopicWords[static_cast<std::size_t>(c.topic)];
    const std::string agency_code =
        kAgencyWords[static_cast<std::size_t>(c.agency)];
    for (std::size_t a = 0; a < c.p1_years.size(); ++a) {
      ingest::RawAwardRecord r;
      r.company_name = cfg.dirty ? dirty_name(c.name, rng) : c.name;
      r.award_amount = cfg.dirty ? dirty_amount(c.p1_amounts[a], rng)
                                 : std::to_string(c.p1_amounts[a]);
      r.award_year = std::to_string(c.p1_years[a]);
      r.phase = cfg.dirty ? phase_string(false, rng) : "I";
      r.agency = cfg.dirty ? dirty_agency(agency_code, rng) : agency_code;
      r.topic_code = topic_code + zero_pad(rng.uniform_int(0, 99), 2);
      out.records.push_back(std::move(r));
    }
    if (c.success) {
      ingest::RawAwardRecord r;
      r.company_name = cfg.dirty ? dirty_name(c.name, rng) : c.name;
      const double p2_amount =
          rng.lognormal(amount_mu + std::log(5.0), cfg.amount_log_sigma);
      r.award_amount =
          cfg.dirty ? dirty_amount(p2_amount, rng) : std::to_string(p2_amount);
      // Within the five-year horizon by construction.
      r.award_year = std::to_string(c.first_year + rng.uniform_int(1, 5));
      r.phase = cfg.dirty ? phase_string(true, rng) : "II";
      r.agency = cfg.dirty ? dirty_agency(agency_code, rng) : agency_code;
      r.topic_code = topic_code + zero_pad(rng.uniform_int(0, 99), 2);
      out.records.push_back(std::move(r));
    }
  }

  // Shuffle so ingest cannot rely on emission order.
  for (std::size_t i = out.records.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(out.records[i - 1], out.records[j]);
  }

  for (const Company& c : companies) {
    TruthRow t;
    t.company = c.name;
    t.topic = kTopicWords[static_cast<std::size_t>(c.topic)];
    t.agency = kAgencyWords[static_cast<std::size_t>(c.agency)];
    t.first_p1_year = c.first_year;
    t.label = c.success ? 1 : 0;
    t.p_success = c.p_success;
    out.truth.push_back(std::move(t));
  }
  std::sort(out.truth.begin(), out.truth.end(),
            [](const TruthRow& a, const TruthRow& b) {
              return a.company < b.company;
            });
  return out;
}

void write_raw_csv(const std::filesystem::path& path,
                   const std::vector<ingest::RawAwardRecord>& records) {
  csv::Table t;
  t.header = {"company", "amount", "year", "phase", "agency", "topic"};
  for (const auto& r : records) {
    t.rows.push_back({r.company_name, r.award_amount, r.award_year, r.phase,
                      r.agency, r.topic_code});
  }
  csv::write_file(path.string(), t);
}

void write_truth_json(const std::filesystem::path& path, const SynthConfig& cfg,
                      const SynthOutput& out) {
  json rows = json::array();
  for (const TruthRow& t : out.truth) {
    rows.push_back({{"company", t.company},
                    {"topic", t.topic},
                    {"agency", t.agency},
                    {"first_p1_year", t.first_p1_year},
                    {"label", t.label},
                    {"p_success", t.p_success}});
  }
  json j = {{"config",
             {{"n_companies", cfg.n_companies},
              {"n_topics", cfg.n_topics},
              {"n_agencies", cfg.n_agencies},
              {"year_min", cfg.year_min},
              {"year_max", cfg.year_max},
              {"awards_poisson_mean", cfg.awards_poisson_mean},
              {"zipf_s", cfg.zipf_s},
              {"sigma_topic", cfg.sigma_topic},
              {"sigma_agency", cfg.sigma_agency},
              {"lambda", cfg.lambda},
              {"target_rate", cfg.target_rate},
              {"seed", cfg.seed}}},
            {"intercept", out.intercept},
            {"realized_rate", out.realized_rate},
            {"companies", rows}};
  std::ofstream f(path);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace grantscreen::synth
