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

#ifndef GRANTSCREEN_GRAPH_HPP_
#define GRANTSCREEN_GRAPH_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grantscreen/ingest.hpp"

namespace grantscreen {

using ingest::CleanAward;
using ingest::Phase;

enum class NodeType { kCompany = 0, kTopic = 1, kAgency = 2 };
inline constexpr int kNumNodeTypes = 3;

// Relation names, forward then reverse twin.
inline constexpr const char* kOperatesIn = "operates_in";
inline constexpr const char* kAwardedBy = "awarded_by";
inline constexpr const char* kCoTopic = "co_topic";
inline constexpr const char* kRevOperatesIn = "rev_operates_in";
inline constexpr const char* kRevAwardedBy = "rev_awarded_by";
inline constexpr const char* kRevCoTopic = "rev_co_topic";

inline constexpr int kCompanyFeatureDim = 7;
inline constexpr int kTopicFeatureDim = 2;
inline constexpr int kAgencyFeatureDim = 3;

// Awards with year < cutoff_year contribute to features; dataset_min_year
// anchors the recency scale.
struct FeatureSpec {
  int cutoff_year = 2018;
  int dataset_min_year = 2005;
};

struct CoTopicCaps {
  int per_group_cap = 50;
  int per_node_cap = 20;
};

struct EdgeList {
  NodeType src_type;
  NodeType dst_type;
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
};

struct HeteroGraph {
  // Sorted node-id tables, one per node type.
  std::vector<std::string> companies;
  std::vector<std::string> topics;
  std::vector<std::string> agencies;
  // Normalized feature matrices, rows aligned with the id tables.
  Eigen::MatrixXd company_x;  // N x 7
  Eigen::MatrixXd topic_x;    // T x 2
  Eigen::MatrixXd agency_x;   // A x 3
  // Keyed by relation name; forward relations only until reversal.
  std::vector<std::pair<std::string, EdgeList>> edges;
  bool reversed = false;

  FeatureSpec spec;
  CoTopicCaps caps;
  std::uint64_t seed = 0;

  const EdgeList* find_edges(const std::string& relation) const;
  std::size_t total_edge_count() const;
};

struct GraphBuildLog {
  std::size_t qualifying_awards = 0;
  std::size_t companies_without_edges = 0;
  std::size_t co_topic_pairs = 0;
};

// True when the award contributes to features under the cutoff rule:
// phase I and strictly pre-cutoff. Phase II rows never qualify.
bool award_qualifies(const CleanAward& a, const FeatureSpec& spec);

// Raw (pre-normalization) feature vectors. Empty input yields zeros.
Eigen::VectorXd compute_company_features(const std::vector<CleanAward>& awards,
                                         const FeatureSpec& spec);
Eigen::VectorXd compute_topic_features(const std::vector<CleanAward>& awards,
                                       const FeatureSpec& spec);
Eigen::VectorXd compute_agency_features(const std::vector<CleanAward>& awards,
                                        const FeatureSpec& spec);

// Per column (x - min) / (max - min); constant columns map to zero.
Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& m);

// Modal topic / agency over qualifying awards. Ties break by earliest award
// year among the tied values, then lexicographically smallest id.
// No qualifying awards -> nullopt (caller skips the edge).
std::optional<std::string> primary_topic(const std::vector<CleanAward>& awards,
                                         const FeatureSpec& spec);
std::optional<std::string> primary_agency(const std::vector<CleanAward>& awards,
                                          const FeatureSpec& spec);

// Seeded sampling of unordered company pairs within primary-topic groups.
// Pairs that would push either endpoint past per_node_cap are discarded from
// the candidate pool without counting toward per_group_cap.
std::vector<std::pair<std::int32_t, std::int32_t>> build_co_topic_edges(
    const std::vector<std::pair<std::int32_t, std::string>>& company_topics,
    const CoTopicCaps& caps, std::uint64_t seed);

// Adds the rev_* twin of every forward relation. Throws "already_reversed"
// on a second call.
void add_reverse_edges(HeteroGraph& graph);

HeteroGraph build_graph(const std::vector<CleanAward>& awards,
                        const FeatureSpec& spec, const CoTopicCaps& caps,
                        std::uint64_t seed, GraphBuildLog* log = nullptr);

void save_graph(const std::filesystem::path& dir, const HeteroGraph& graph);
HeteroGraph load_graph(const std::filesystem::path& dir);

}  // namespace grantscreen

#endif  // GRANTSCREEN_GRAPH_HPP_
