// Copyright 2026 the grantscreen authors
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

#include "grantscreen/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "grantscreen/errors.hpp"
#include "grantscreen/hash.hpp"

namespace grantscreen {

namespace {

using nlohmann::json;

// Rejects keys outside the allowed set so misspelled overrides fail loudly
// instead of silently keeping a default.
void check_keys(const json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return it.key() == k; });
    if (!known) {
      throw Error("config_parse", "unknown config key: " + scope + it.key());
    }
  }
}

template <typename T>
void overlay(const json& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (ingest.min_year >= ingest.max_year) {
    throw Error("bad_config", "ingest year window is empty");
  }
  if (caps.per_group_cap < 1 || caps.per_node_cap < 1) {
    throw Error("bad_config", "co_topic caps must be positive");
  }
  if (!(horizon.train_end < horizon.val_end &&
        horizon.val_end < horizon.test_end)) {
    throw Error("bad_config", "split boundaries must be increasing");
  }
  if (horizon.horizon_years < 0) {
    throw Error("bad_config", "label horizon must be non-negative");
  }
  if (dataset_min_year >= horizon.train_end) {
    throw Error("bad_config",
                "dataset_min_year must precede the first graph cutoff");
  }
  if (ks.empty()) {
    throw Error("bad_config", "at least one ranking depth k is required");
  }
  for (int k : ks) {
    if (k < 1) throw Error("bad_config", "ranking depth k must be positive");
  }
  if (model_list.empty()) {
    throw Error("bad_config", "model list is empty");
  }
  std::set<std::string> seen;
  for (const auto& name : model_list) {
    models::kind_from_name(name);  // throws bad_model on unknown names
    if (!seen.insert(name).second) {
      throw Error("bad_config", "duplicate model in list: " + name);
    }
  }
  std::set<std::uint64_t> seed_set(train.seeds.begin(), train.seeds.end());
  if (seed_set.size() != train.seeds.size()) {
    throw Error("bad_config", "duplicate training seeds");
  }
}

RunConfig default_config() { return RunConfig{}; }

namespace {

void overlay_paths(const json& j, RunConfig& cfg) {
  check_keys(j, "paths.", {"input_csv", "out_dir"});
  overlay(j, "input_csv", cfg.input_csv);
  overlay(j, "out_dir", cfg.out_dir);
}

void overlay_ingest(const json& j, RunConfig& cfg) {
  check_keys(j, "ingest.", {"legal_suffixes", "min_year", "max_year"});
  overlay(j, "legal_suffixes", cfg.ingest.legal_suffixes);
  overlay(j, "min_year", cfg.ingest.min_year);
  overlay(j, "max_year", cfg.ingest.max_year);
}

void overlay_graph(const json& j, RunConfig& cfg) {
  check_keys(j, "graph.",
             {"dataset_min_year", "per_group_cap", "per_node_cap", "seed"});
  overlay(j, "dataset_min_year", cfg.dataset_min_year);
  overlay(j, "per_group_cap", cfg.caps.per_group_cap);
  overlay(j, "per_node_cap", cfg.caps.per_node_cap);
  overlay(j, "seed", cfg.graph_seed);
}

void overlay_labels(const json& j, RunConfig& cfg) {
  check_keys(j, "labels.",
             {"horizon_years", "train_end", "val_end", "test_end"});
  overlay(j, "horizon_years", cfg.horizon.horizon_years);
  overlay(j, "train_end", cfg.horizon.train_end);
  overlay(j, "val_end", cfg.horizon.val_end);
  overlay(j, "test_end", cfg.horizon.test_end);
}

void overlay_model(const json& j, RunConfig& cfg) {
  check_keys(j, "model.",
             {"hidden_dim", "heads", "hgt_layers", "rgcn_layers", "mlp_blocks",
              "dropout", "classifier_hidden"});
  overlay(j, "hidden_dim", cfg.model.hidden_dim);
  overlay(j, "heads", cfg.model.heads);
  overlay(j, "hgt_layers", cfg.model.hgt_layers);
  overlay(j, "rgcn_layers", cfg.model.rgcn_layers);
  overlay(j, "mlp_blocks", cfg.model.mlp_blocks);
  overlay(j, "dropout", cfg.model.dropout);
  overlay(j, "classifier_hidden", cfg.model.classifier_hidden);
}

void overlay_train(const json& j, RunConfig& cfg) {
  check_keys(j, "train.",
             {"lr", "weight_decay", "warmup_epochs", "max_epochs", "patience",
              "clip_norm", "beta1", "beta2", "eps", "seeds"});
  overlay(j, "lr", cfg.train.lr);
  overlay(j, "weight_decay", cfg.train.weight_decay);
  overlay(j, "warmup_epochs", cfg.train.warmup_epochs);
  overlay(j, "max_epochs", cfg.train.max_epochs);
  overlay(j, "patience", cfg.train.patience);
  overlay(j, "clip_norm", cfg.train.clip_norm);
  overlay(j, "beta1", cfg.train.beta1);
  overlay(j, "beta2", cfg.train.beta2);
  overlay(j, "eps", cfg.train.eps);
  overlay(j, "seeds", cfg.train.seeds);
}

void overlay_synth(const json& j, RunConfig& cfg) {
  check_keys(j, "synth.",
             {"n_companies", "n_topics", "n_agencies", "year_min", "year_max",
              "awards_poisson_mean", "zipf_s", "sigma_topic", "sigma_agency",
              "lambda", "target_rate", "amount_median", "amount_log_sigma",
              "w_train", "w_val", "w_test", "train_end", "val_end", "test_end",
              "dirty", "seed"});
  overlay(j, "n_companies", cfg.synth.n_companies);
  overlay(j, "n_topics", cfg.synth.n_topics);
  overlay(j, "n_agencies", cfg.synth.n_agencies);
  overlay(j, "year_min", cfg.synth.year_min);
  overlay(j, "year_max", cfg.synth.year_max);
  overlay(j, "awards_poisson_mean", cfg.synth.awards_poisson_mean);
  overlay(j, "zipf_s", cfg.synth.zipf_s);
  overlay(j, "sigma_topic", cfg.synth.sigma_topic);
  overlay(j, "sigma_agency", cfg.synth.sigma_agency);
  overlay(j, "lambda", cfg.synth.lambda);
  overlay(j, "target_rate", cfg.synth.target_rate);
  overlay(j, "amount_median", cfg.synth.amount_median);
  overlay(j, "amount_log_sigma", cfg.synth.amount_log_sigma);
  overlay(j, "w_train", cfg.synth.w_train);
  overlay(j, "w_val", cfg.synth.w_val);
  overlay(j, "w_test", cfg.synth.w_test);
  overlay(j, "train_end", cfg.synth.train_end);
  overlay(j, "val_end", cfg.synth.val_end);
  overlay(j, "test_end", cfg.synth.test_end);
  overlay(j, "dirty", cfg.synth.dirty);
  overlay(j, "seed", cfg.synth.seed);
}

void overlay_eval(const json& j, RunConfig& cfg) {
  check_keys(j, "eval.", {"ks"});
  overlay(j, "ks", cfg.ks);
}

RunConfig from_json(const json& j) {
  if (!j.is_object()) {
    throw Error("config_parse", "config root must be a JSON object");
  }
  check_keys(j, "",
             {"paths", "ingest", "graph", "labels", "model", "train", "synth",
              "eval", "models"});
  RunConfig cfg;
  if (j.contains("paths")) overlay_paths(j.at("paths"), cfg);
  if (j.contains("ingest")) overlay_ingest(j.at("ingest"), cfg);
  if (j.contains("graph")) overlay_graph(j.at("graph"), cfg);
  if (j.contains("labels")) overlay_labels(j.at("labels"), cfg);
  if (j.contains("model")) overlay_model(j.at("model"), cfg);
  if (j.contains("train")) overlay_train(j.at("train"), cfg);
  if (j.contains("synth")) overlay_synth(j.at("synth"), cfg);
  if (j.contains("eval")) overlay_eval(j.at("eval"), cfg);
  overlay(j, "models", cfg.model_list);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["paths"] = {{"input_csv", cfg.input_csv}, {"out_dir", cfg.out_dir}};
  j["ingest"] = {{"legal_suffixes", cfg.ingest.legal_suffixes},
                 {"min_year", cfg.ingest.min_year},
                 {"max_year", cfg.ingest.max_year}};
  j["graph"] = {{"dataset_min_year", cfg.dataset_min_year},
                {"per_group_cap", cfg.caps.per_group_cap},
                {"per_node_cap", cfg.caps.per_node_cap},
                {"seed", cfg.graph_seed}};
  j["labels"] = {{"horizon_years", cfg.horizon.horizon_years},
                 {"train_end", cfg.horizon.train_end},
                 {"val_end", cfg.horizon.val_end},
                 {"test_end", cfg.horizon.test_end}};
  j["model"] = {{"hidden_dim", cfg.model.hidden_dim},
                {"heads", cfg.model.heads},
                {"hgt_layers", cfg.model.hgt_layers},
                {"rgcn_layers", cfg.model.rgcn_layers},
                {"mlp_blocks", cfg.model.mlp_blocks},
                {"dropout", cfg.model.dropout},
                {"classifier_hidden", cfg.model.classifier_hidden}};
  j["train"] = {{"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay},
                {"warmup_epochs", cfg.train.warmup_epochs},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"clip_norm", cfg.train.clip_norm},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"eps", cfg.train.eps},
                {"seeds", cfg.train.seeds}};
  j["synth"] = {{"n_companies", cfg.synth.n_companies},
                {"n_topics", cfg.synth.n_topics},
                {"n_agencies", cfg.synth.n_agencies},
                {"year_min", cfg.synth.year_min},
                {"year_max", cfg.synth.year_max},
                {"awards_poisson_mean", cfg.synth.awards_poisson_mean},
                {"zipf_s", cfg.synth.zipf_s},
                {"sigma_topic", cfg.synth.sigma_topic},
                {"sigma_agency", cfg.synth.sigma_agency},
                {"lambda", cfg.synth.lambda},
                {"target_rate", cfg.synth.target_rate},
                {"amount_median", cfg.synth.amount_median},
                {"amount_log_sigma", cfg.synth.amount_log_sigma},
                {"w_train", cfg.synth.w_train},
                {"w_val", cfg.synth.w_val},
                {"w_test", cfg.synth.w_test},
                {"train_end", cfg.synth.train_end},
                {"val_end", cfg.synth.val_end},
                {"test_end", cfg.synth.test_end},
                {"dirty", cfg.synth.dirty},
                {"seed", cfg.synth.seed}};
  j["eval"] = {{"ks", cfg.ks}};
  j["models"] = cfg.model_list;
  return j;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error("config_parse", std::string("config is not valid JSON: ") +
                                    e.what());
  }
  RunConfig cfg;
  try {
    cfg = from_json(j);
  } catch (const json::exception& e) {
    throw Error("config_parse",
                std::string("config field has wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_canonical_json(const RunConfig& cfg) {
  // nlohmann::json orders object keys lexicographically, which makes dump()
  // canonical for a given field set.
  return to_json(cfg).dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  return hex64(fnv1a64(config_canonical_json(cfg)));
}

void write_config_json(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path);
  f << config_canonical_json(cfg) << "\n";
}

}  // namespace grantscreen
