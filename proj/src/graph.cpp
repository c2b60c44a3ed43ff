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

#include "grantscreen/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"
#include "grantscreen/hash.hpp"
#include "grantscreen/rng.hpp"

namespace grantscreen {

namespace {

using json = nlohmann::json;

double log1p_of(double x) { return std::log1p(x); }

// Modal value over qualifying awards with the shared tie rule: higher count
// wins, then earlier first occurrence year, then smaller id.
std::optional<std::string> modal_value(
    const std::vector<CleanAward>& awards, const FeatureSpec& spec,
    const std::function<const std::string&(const CleanAward&)>& key_of) {
  struct Stat {
    int count = 0;
    int min_year = std::numeric_limits<int>::max();
  };
  std::map<std::string, Stat> stats;
  for (const CleanAward& a : awards) {
    if (!award_qualifies(a, spec)) continue;
    Stat& s = stats[key_of(a)];
    s.count += 1;
    s.min_year = std::min(s.min_year, a.year);
  }
  if (stats.empty()) return std::nullopt;
  const std::string* best = nullptr;
  Stat best_stat;
  for (const auto& [key, s] : stats) {
    if (best == nullptr || s.count > best_stat.count ||
        (s.count == best_stat.count && s.min_year < best_stat.min_year)) {
      best = &key;
      best_stat = s;
    }
    // Equal count and year: the map's lexicographic order keeps the first.
  }
  return *best;
}

void write_feature_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& ids,
                       const Eigen::MatrixXd& x) {
  csv::Table t;
  t.header.push_back("id");
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    t.header.push_back("f" + std::to_string(c));
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::vector<std::string> row;
    row.push_back(ids[r]);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      row.push_back(csv::format_double(x(static_cast<Eigen::Index>(r), c)));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path.string(), t);
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> read_feature_csv(
    const std::filesystem::path& path, int dim) {
  csv::Table t = csv::read_file(path.string());
  if (t.header.size() != static_cast<std::size_t>(dim) + 1) {
    throw Error("graph_load", path.string() + ": unexpected column count");
  }
  std::vector<std::string> ids;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(t.rows.size()), dim);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ids.push_back(t.rows[r][0]);
    for (int c = 0; c < dim; ++c) {
      x(static_cast<Eigen::Index>(r), c) = std::stod(t.rows[r][c + 1]);
    }
  }
  return {std::move(ids), std::move(x)};
}

void write_edge_csv(const std::filesystem::path& path, const EdgeList& e) {
  csv::Table t;
  t.header = {"src", "dst"};
  for (std::size_t i = 0; i < e.src.size(); ++i) {
    t.rows.push_back({std::to_string(e.src[i]), std::to_string(e.dst[i])});
  }
  csv::write_file(path.string(), t);
}

EdgeList read_edge_csv(const std::filesystem::path& path, NodeType src_type,
                       NodeType dst_type) {
  csv::Table t = csv::read_file(path.string());
  if (t.header != std::vector<std::string>{"src", "dst"}) {
    throw Error("graph_load", path.string() + ": expected src,dst header");
  }
  EdgeList e;
  e.src_type = src_type;
  e.dst_type = dst_type;
  for (const auto& row : t.rows) {
    e.src.push_back(static_cast<std::int32_t>(std::stol(row[0])));
    e.dst.push_back(static_cast<std::int32_t>(std::stol(row[1])));
  }
  return e;
}

struct RelationSchema {
  const char* name;
  NodeType src;
  NodeType dst;
};

constexpr RelationSchema kForwardSchema[] = {
    {kOperatesIn, NodeType::kCompany, NodeType::kTopic},
    {kAwardedBy, NodeType::kCompany, NodeType::kAgency},
    {kCoTopic, NodeType::kCompany, NodeType::kCompany},
};
constexpr RelationSchema kReverseSchema[] = {
    {kRevOperatesIn, NodeType::kTopic, NodeType::kCompany},
    {kRevAwardedBy, NodeType::kAgency, NodeType::kCompany},
    {kRevCoTopic, NodeType::kCompany, NodeType::kCompany},
};

}  // namespace

const EdgeList* HeteroGraph::find_edges(const std::string& relation) const {
  for (const auto& [name, list] : edges) {
    if (name == relation) return &list;
  }
  return nullptr;
}

std::size_t HeteroGraph::total_edge_count() const {
  std::size_t n = 0;
  for (const auto& [name, list] : edges) n += list.src.size();
  return n;
}

bool award_qualifies(const CleanAward& a, const FeatureSpec& spec) {
  return a.phase == Phase::kOne && a.year < spec.cutoff_year;
}

Eigen::VectorXd compute_company_features(const std::vector<CleanAward>& awards,
                                         const FeatureSpec& spec) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kCompanyFeatureDim);
  double total = 0.0;
  int count = 0;
  int first = std::numeric_limits<int>::max();
  int last = std::numeric_limits<int>::min();
  std::set<std::string> agencies, topics;
  for (const CleanAward& a : awards) {
    if (!award_qualifies(a, spec)) continue;
    total += a.amount;
    count += 1;
    first = std::min(first, a.year);
    last = std::max(last, a.year);
    agencies.insert(a.agency);
    topics.insert(a.topic);
  }
  if (count == 0) return f;
  f[0] = log1p_of(total);
  f[1] = log1p_of(static_cast<double>(count));
  f[2] = static_cast<double>(agencies.size());
  f[3] = static_cast<double>(last - first + 1);
  f[4] = log1p_of(total / count);
  f[5] = static_cast<double>(topics.size());
  const double denom =
      static_cast<double>(spec.cutoff_year - 1 - spec.dataset_min_year);
  double recency = denom > 0.0
                       ? static_cast<double>(last - spec.dataset_min_year) / denom
                       : 1.0;
  f[6] = std::clamp(recency, 0.0, 1.0);
  return f;
}

Eigen::VectorXd compute_topic_features(const std::vector<CleanAward>& awards,
                                       const FeatureSpec& spec) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kTopicFeatureDim);
  std::set<std::string> companies;
  int count = 0;
  for (const CleanAward& a : awards) {
    if (!award_qualifies(a, spec)) continue;
    companies.insert(a.company);
    count += 1;
  }
  if (count == 0) return f;
  f[0] = log1p_of(static_cast<double>(companies.size()));
  f[1] = log1p_of(static_cast<double>(count));
  return f;
}

Eigen::VectorXd compute_agency_features(const std::vector<CleanAward>& awards,
                                        const FeatureSpec& spec) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kAgencyFeatureDim);
  double total = 0.0;
  int count = 0;
  for (const CleanAward& a : awards) {
    if (!award_qualifies(a, spec)) continue;
    total += a.amount;
    count += 1;
  }
  if (count == 0) return f;
  f[0] = log1p_of(static_cast<double>(count));
  f[1] = log1p_of(total);
  f[2] = log1p_of(total / count);
  return f;
}

Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double lo = m.col(c).minCoeff();
    const double hi = m.col(c).maxCoeff();
    if (hi > lo) {
      out.col(c) = (m.col(c).array() - lo) / (hi - lo);
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

std::optional<std::string> primary_topic(const std::vector<CleanAward>& awards,
                                         const FeatureSpec& spec) {
  return modal_value(awards, spec,
                     [](const CleanAward& a) -> const std::string& {
                       return a.topic;
                     });
}

std::optional<std::string> primary_agency(const std::vector<CleanAward>& awards,
                                          const FeatureSpec& spec) {
  return modal_value(awards, spec,
                     [](const CleanAward& a) -> const std::string& {
                       return a.agency;
                     });
}

std::vector<std::pair<std::int32_t, std::int32_t>> build_co_topic_edges(
    const std::vector<std::pair<std::int32_t, std::string>>& company_topics,
    const CoTopicCaps& caps, std::uint64_t seed) {
  if (caps.per_group_cap < 1 || caps.per_node_cap < 1) {
    throw Error("bad_caps", "co_topic caps must be at least 1");
  }
  std::map<std::string, std::vector<std::int32_t>> groups;
  for (const auto& [company, topic] : company_topics) {
    groups[topic].push_back(company);
  }
  std::unordered_map<std::int32_t, int> degree;
  std::vector<std::pair<std::int32_t, std::int32_t>> chosen;
  for (auto& [topic, members] : groups) {
    std::sort(members.begin(), members.end());
    const std::size_t m = members.size();
    if (m < 2) continue;
    Rng rng(hash_combine(seed, fnv1a64(topic)));
    int taken = 0;
    const std::size_t num_pairs = m * (m - 1) / 2;
    if (num_pairs <= (1u << 23)) {
      // Partial Fisher-Yates over the explicit candidate pool.
      std::vector<std::pair<std::int32_t, std::int32_t>> pool;
      pool.reserve(num_pairs);
      for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
          pool.emplace_back(members[i], members[j]);
        }
      }
      std::size_t remaining = pool.size();
      while (remaining > 0 && taken < caps.per_group_cap) {
        const std::size_t k = rng.uniform_index(remaining);
        auto pair = pool[k];
        pool[k] = pool[remaining - 1];
        --remaining;
        if (degree[pair.first] >= caps.per_node_cap ||
            degree[pair.second] >= caps.per_node_cap) {
          continue;  // discarded, does not count toward the group cap
        }
        degree[pair.first] += 1;
        degree[pair.second] += 1;
        chosen.push_back(pair);
        taken += 1;
      }
    } else {
      // Groups too large to enumerate: rejection-sample with a bounded
      // attempt budget (exhaustion is unreachable at these sizes).
      std::set<std::pair<std::int32_t, std::int32_t>> seen;
      std::size_t attempts = 64u * static_cast<std::size_t>(caps.per_group_cap) + 4096u;
      while (attempts-- > 0 && taken < caps.per_group_cap) {
        std::size_t i = rng.uniform_index(m);
        std::size_t j = rng.uniform_index(m - 1);
        if (j >= i) ++j;
        auto pair = std::minmax(members[i], members[j]);
        if (!seen.insert({pair.first, pair.second}).second) continue;
        if (degree[pair.first] >= caps.per_node_cap ||
            degree[pair.second] >= caps.per_node_cap) {
          continue;
        }
        degree[pair.first] += 1;
        degree[pair.second] += 1;
        chosen.emplace_back(pair.first, pair.second);
        taken += 1;
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

void add_reverse_edges(HeteroGraph& graph) {
  if (graph.reversed) {
    throw Error("already_reversed", "reverse edges were already added");
  }
  for (const RelationSchema& rs : kReverseSchema) {
    std::string forward =
        std::string(rs.name).substr(4);  // strip the "rev_" prefix
    const EdgeList* f = graph.find_edges(forward);
    EdgeList rev;
    rev.src_type = rs.src;
    rev.dst_type = rs.dst;
    if (f != nullptr) {
      rev.src = f->dst;
      rev.dst = f->src;
    }
    graph.edges.emplace_back(rs.name, std::move(rev));
  }
  graph.reversed = true;
}

HeteroGraph build_graph(const std::vector<CleanAward>& awards,
                        const FeatureSpec& spec, const CoTopicCaps& caps,
                        std::uint64_t seed, GraphBuildLog* log) {
  if (spec.cutoff_year <= spec.dataset_min_year) {
    throw Error("bad_feature_spec", "cutoff_year must exceed dataset_min_year");
  }
  // Rosters come from qualifying awards only, so records at or past the
  // cutoff (and all Phase II records) can never alter the graph.
  std::map<std::string, std::vector<CleanAward>> by_company;
  std::map<std::string, std::vector<CleanAward>> by_topic;
  std::map<std::string, std::vector<CleanAward>> by_agency;
  std::size_t qualifying = 0;
  for (const CleanAward& a : awards) {
    if (!award_qualifies(a, spec)) continue;
    qualifying += 1;
    by_company[a.company].push_back(a);
    by_topic[a.topic].push_back(a);
    by_agency[a.agency].push_back(a);
  }
  if (by_company.empty()) {
    throw Error("empty_graph", "no qualifying awards before the cutoff");
  }

  HeteroGraph g;
  g.spec = spec;
  g.caps = caps;
  g.seed = seed;
  for (const auto& [key, unused] : by_company) g.companies.push_back(key);
  for (const auto& [key, unused] : by_topic) g.topics.push_back(key);
  for (const auto& [key, unused] : by_agency) g.agencies.push_back(key);

  g.company_x.resize(static_cast<Eigen::Index>(g.companies.size()),
                     kCompanyFeatureDim);
  for (std::size_t i = 0; i < g.companies.size(); ++i) {
    g.company_x.row(static_cast<Eigen::Index>(i)) =
        compute_company_features(by_company[g.companies[i]], spec).transpose();
  }
  g.topic_x.resize(static_cast<Eigen::Index>(g.topics.size()),
                   kTopicFeatureDim);
  for (std::size_t i = 0; i < g.topics.size(); ++i) {
    g.topic_x.row(static_cast<Eigen::Index>(i)) =
        compute_topic_features(by_topic[g.topics[i]], spec).transpose();
  }
  g.agency_x.resize(static_cast<Eigen::Index>(g.agencies.size()),
                    kAgencyFeatureDim);
  for (std::size_t i = 0; i < g.agencies.size(); ++i) {
    g.agency_x.row(static_cast<Eigen::Index>(i)) =
        compute_agency_features(by_agency[g.agencies[i]], spec).transpose();
  }
  g.company_x = minmax_normalize(g.company_x);
  g.topic_x = minmax_normalize(g.topic_x);
  g.agency_x = minmax_normalize(g.agency_x);

  std::unordered_map<std::string, std::int32_t> topic_index, agency_index;
  for (std::size_t i = 0; i < g.topics.size(); ++i) {
    topic_index[g.topics[i]] = static_cast<std::int32_t>(i);
  }
  for (std::size_t i = 0; i < g.agencies.size(); ++i) {
    agency_index[g.agencies[i]] = static_cast<std::int32_t>(i);
  }

  EdgeList operates{NodeType::kCompany, NodeType::kTopic, {}, {}};
  EdgeList awarded{NodeType::kCompany, NodeType::kAgency, {}, {}};
  std::vector<std::pair<std::int32_t, std::string>> company_topics;
  std::size_t edgeless = 0;
  for (std::size_t i = 0; i < g.companies.size(); ++i) {
    const auto& comp_awards = by_company[g.companies[i]];
    auto t = primary_topic(comp_awards, spec);
    auto a = primary_agency(comp_awards, spec);
    if (!t.has_value() && !a.has_value()) {
      edgeless += 1;
      continue;
    }
    const auto ci = static_cast<std::int32_t>(i);
    if (t.has_value()) {
      operates.src.push_back(ci);
      operates.dst.push_back(topic_index.at(*t));
      company_topics.emplace_back(ci, *t);
    }
    if (a.has_value()) {
      awarded.src.push_back(ci);
      awarded.dst.push_back(agency_index.at(*a));
    }
  }

  EdgeList co{NodeType::kCompany, NodeType::kCompany, {}, {}};
  auto pairs = build_co_topic_edges(company_topics, caps, seed);
  for (const auto& [a, b] : pairs) {
    co.src.push_back(a);
    co.dst.push_back(b);
  }

  g.edges.emplace_back(kOperatesIn, std::move(operates));
  g.edges.emplace_back(kAwardedBy, std::move(awarded));
  g.edges.emplace_back(kCoTopic, std::move(co));
  add_reverse_edges(g);

  if (log != nullptr) {
    log->qualifying_awards = qualifying;
    log->companies_without_edges = edgeless;
    log->co_topic_pairs = pairs.size();
  }
  return g;
}

void save_graph(const std::filesystem::path& dir, const HeteroGraph& graph) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  write_feature_csv(dir / "companies.csv", graph.companies, graph.company_x);
  write_feature_csv(dir / "topics.csv", graph.topics, graph.topic_x);
  write_feature_csv(dir / "agencies.csv", graph.agencies, graph.agency_x);
  json edge_counts = json::object();
  for (const auto& [name, list] : graph.edges) {
    write_edge_csv(dir / (name + ".csv"), list);
    edge_counts[name] = list.src.size();
  }
  json manifest = {
      {"format_version", 1},
      {"nodes",
       {{"company", graph.companies.size()},
        {"topic", graph.topics.size()},
        {"agency", graph.agencies.size()}}},
      {"edges", edge_counts},
      {"cutoff_year", graph.spec.cutoff_year},
      {"dataset_min_year", graph.spec.dataset_min_year},
      {"per_group_cap", graph.caps.per_group_cap},
      {"per_node_cap", graph.caps.per_node_cap},
      {"seed", graph.seed},
      {"reversed", graph.reversed},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("io", "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

HeteroGraph load_graph(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("io", "cannot read " + (dir / "manifest.json").string());
  json manifest = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded()) {
    throw Error("graph_load", "manifest.json is not valid JSON");
  }
  HeteroGraph g;
  g.spec.cutoff_year = manifest.at("cutoff_year").get<int>();
  g.spec.dataset_min_year = manifest.at("dataset_min_year").get<int>();
  g.caps.per_group_cap = manifest.at("per_group_cap").get<int>();
  g.caps.per_node_cap = manifest.at("per_node_cap").get<int>();
  g.seed = manifest.at("seed").get<std::uint64_t>();

  std::tie(g.companies, g.company_x) =
      read_feature_csv(dir / "companies.csv", kCompanyFeatureDim);
  std::tie(g.topics, g.topic_x) =
      read_feature_csv(dir / "topics.csv", kTopicFeatureDim);
  std::tie(g.agencies, g.agency_x) =
      read_feature_csv(dir / "agencies.csv", kAgencyFeatureDim);

  for (const RelationSchema& rs : kForwardSchema) {
    g.edges.emplace_back(
        rs.name, read_edge_csv(dir / (std::string(rs.name) + ".csv"), rs.src,
                               rs.dst));
  }
  const bool reversed = manifest.at("reversed").get<bool>();
  if (reversed) {
    for (const RelationSchema& rs : kReverseSchema) {
      g.edges.emplace_back(
          rs.name, read_edge_csv(dir / (std::string(rs.name) + ".csv"), rs.src,
                                 rs.dst));
    }
  }
  g.reversed = reversed;

  const std::size_t nc = g.companies.size();
  const std::size_t nt = g.topics.size();
  const std::size_t na = g.agencies.size();
  for (const auto& [name, list] : g.edges) {
    auto limit = [&](NodeType t) {
      return t == NodeType::kCompany ? nc : (t == NodeType::kTopic ? nt : na);
    };
    for (std::int32_t s : list.src) {
      if (s < 0 || static_cast<std::size_t>(s) >= limit(list.src_type)) {
        throw Error("graph_load", name + ": src index out of range");
      }
    }
    for (std::int32_t d : list.dst) {
      if (d < 0 || static_cast<std::size_t>(d) >= limit(list.dst_type)) {
        throw Error("graph_load", name + ": dst index out of range");
      }
    }
  }
  return g;
}

}  // namespace grantscreen
