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
//
// Operator-facing command surface. Each stage reads and writes plain files
// so any stage can be re-run in isolation; every JSON artifact carries the
// config hash that produced it.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grantscreen/config.hpp"
#include "grantscreen/csv.hpp"
#include "grantscreen/errors.hpp"
#include "grantscreen/graph.hpp"
#include "grantscreen/ingest.hpp"
#include "grantscreen/labels.hpp"
#include "grantscreen/metrics.hpp"
#include "grantscreen/models.hpp"
#include "grantscreen/params.hpp"
#include "grantscreen/synth.hpp"
#include "grantscreen/tape.hpp"
#include "grantscreen/train.hpp"

namespace fs = std::filesystem;
using grantscreen::Error;
using grantscreen::RunConfig;
namespace models = grantscreen::models;
namespace metrics = grantscreen::metrics;
namespace labels = grantscreen::labels;
namespace train = grantscreen::train;

namespace {

// Exit codes: 0 success, 2 missing/unreadable file, 3 input parse or schema
// mismatch, 4 invalid configuration, 5 violated runtime contract, 1 anything
// unexpected.
int exit_code_for(const Error& e) {
  const std::string& c = e.code();
  if (c == "io") return 2;
  if (c == "csv_parse" || c == "csv_schema" || c == "config_parse" ||
      c == "checkpoint" || c == "graph_load") {
    return 3;
  }
  if (c == "bad_config" || c == "bad_model" || c == "bad_model_config" ||
      c == "bad_train_config" || c == "synth_config" || c == "bad_caps" ||
      c == "bad_feature_spec" || c == "bad_clip" || c == "bad_epoch" ||
      c == "bad_dropout") {
    return 4;
  }
  return 5;
}

void print_error_json(const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return grantscreen::load_config(path);
}

void write_stage_meta(const fs::path& out_dir, const std::string& command,
                      const RunConfig& cfg, nlohmann::json extra) {
  extra["command"] = command;
  extra["config_hash"] = grantscreen::config_hash(cfg);
  std::ofstream f(out_dir / (command + "_meta.json"), std::ios::binary);
  if (!f) throw Error("io", "cannot write stage metadata");
  f << extra.dump(2) << "\n";
}

std::vector<models::ModelKind> parse_model_list(const std::string& flag,
                                                const RunConfig& cfg) {
  std::vector<std::string> names;
  if (flag.empty()) {
    names = cfg.model_list;
  } else if (flag == "all") {
    names = {"hgt", "rgcn", "mlp"};
  } else {
    std::string cur;
    for (char ch : flag + ",") {
      if (ch == ',') {
        if (!cur.empty()) names.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  std::vector<models::ModelKind> kinds;
  kinds.reserve(names.size());
  for (const auto& n : names) kinds.push_back(models::kind_from_name(n));
  return kinds;
}

struct LoadedGraph {
  grantscreen::HeteroGraph graph;
  models::GraphTensors tensors;
};

LoadedGraph load_prepared(const fs::path& dir) {
  LoadedGraph out{grantscreen::load_graph(dir), {}};
  out.tensors = models::prepare(out.graph);
  return out;
}

// Positive-class probabilities for the listed company rows.
metrics::ScoredSet score_split(models::ModelKind kind,
                               const models::ModelConfig& mcfg,
                               const grantscreen::ParamStore& store,
                               const LoadedGraph& g,
                               const train::SplitNodes& nodes) {
  grantscreen::ad::Tape tape;
  models::ForwardOut fwd =
      models::eval_forward(kind, mcfg, store, tape, g.tensors);
  Eigen::MatrixXd probs = grantscreen::ad::softmax_rows_value(fwd.logits.value());
  metrics::ScoredSet s;
  s.company = nodes.companies;
  s.label = nodes.labels;
  s.score.reserve(nodes.rows.size());
  for (std::int32_t r : nodes.rows) s.score.push_back(probs(r, 1));
  return s;
}

std::string ckpt_name(models::ModelKind kind, std::uint64_t seed) {
  return std::string("ckpt_") + models::kind_name(kind) + "_" +
         std::to_string(seed) + ".bin";
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir,
              bool seed_set, std::uint64_t seed) {
  grantscreen::synth::SynthConfig scfg = cfg.synth;
  if (seed_set) scfg.seed = seed;
  fs::create_directories(out_dir);
  grantscreen::synth::SynthOutput out = grantscreen::synth::generate(scfg);
  grantscreen::synth::write_raw_csv(fs::path(out_dir) / "raw.csv", out.records);
  grantscreen::synth::write_truth_json(fs::path(out_dir) / "truth.json", scfg,
                                       out);
  write_stage_meta(out_dir, "synth", cfg,
                   {{"seed", scfg.seed},
                    {"records", out.records.size()},
                    {"realized_rate", out.realized_rate}});
  std::cout << "synth: " << out.records.size() << " records, positive rate "
            << out.realized_rate << "\n";
  return 0;
}

int cmd_ingest(const RunConfig& cfg, const std::string& in,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto rows = grantscreen::ingest::read_raw_csv(in);
  auto [clean, report] = grantscreen::ingest::clean_records(rows, cfg.ingest);
  grantscreen::ingest::write_clean_csv(
      (fs::path(out_dir) / "clean.csv").string(), clean);
  grantscreen::ingest::write_report_json(
      (fs::path(out_dir) / "ingest_report.json").string(), report);
  write_stage_meta(out_dir, "ingest", cfg,
                   {{"accepted", report.accepted},
                    {"rejected", report.rejected}});
  std::cout << "ingest: " << report.accepted << " accepted, "
            << report.rejected << " rejected\n";
  return 0;
}

int cmd_build_graph(const RunConfig& cfg, const std::string& in,
                    const std::string& out_dir) {
  auto awards =
      grantscreen::ingest::read_clean_csv(in);
  const std::pair<const char*, int> cuts[] = {
      {"train", cfg.horizon.train_end},
      {"val", cfg.horizon.val_end},
      {"test", cfg.horizon.test_end}};
  nlohmann::json logs = nlohmann::json::object();
  for (const auto& [name, cutoff] : cuts) {
    grantscreen::FeatureSpec spec{cutoff, cfg.dataset_min_year};
    grantscreen::GraphBuildLog log;
    grantscreen::HeteroGraph g = grantscreen::build_graph(
        awards, spec, cfg.caps, cfg.graph_seed, &log);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir);
    grantscreen::save_graph(dir, g);
    logs[name] = {{"cutoff_year", cutoff},
                  {"companies", g.companies.size()},
                  {"topics", g.topics.size()},
                  {"agencies", g.agencies.size()},
                  {"edges", g.total_edge_count()},
                  {"qualifying_awards", log.qualifying_awards},
                  {"companies_without_edges", log.companies_without_edges},
                  {"co_topic_pairs", log.co_topic_pairs}};
    std::cout << "graph " << name << " (cutoff " << cutoff << "): "
              << g.companies.size() << " companies, " << g.total_edge_count()
              << " edges\n";
  }
  write_stage_meta(out_dir, "build-graph", cfg, {{"graphs", logs}});
  return 0;
}

int cmd_labels(const RunConfig& cfg, const std::string& in,
               const std::string& out_dir) {
  auto awards = grantscreen::ingest::read_clean_csv(in);
  auto [table, summary] = labels::label_table(awards, cfg.horizon);
  fs::create_directories(out_dir);
  labels::write_labels_csv((fs::path(out_dir) / "labels.csv").string(), table);
  labels::write_summary_json(
      (fs::path(out_dir) / "label_summary.json").string(), summary);
  write_stage_meta(out_dir, "labels", cfg,
                   {{"companies", table.size()},
                    {"train_rate", summary.train.rate()},
                    {"val_rate", summary.val.rate()},
                    {"test_rate", summary.test.rate()}});
  std::cout << "labels: " << table.size() << " companies (train rate "
            << summary.train.rate() << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& graphs_dir,
              const std::string& labels_csv, const std::string& out_dir,
              const std::string& models_flag, bool seed_set,
              std::uint64_t seed) {
  LoadedGraph train_g = load_prepared(fs::path(graphs_dir) / "train");
  LoadedGraph val_g = load_prepared(fs::path(graphs_dir) / "val");
  auto table = labels::read_labels_csv(labels_csv);
  train::SplitNodes train_nodes = train::make_split_nodes(
      train_g.graph.companies, table, labels::Split::kTrain);
  train::SplitNodes val_nodes = train::make_split_nodes(
      val_g.graph.companies, table, labels::Split::kVal);

  const std::vector<models::ModelKind> kinds = parse_model_list(models_flag, cfg);
  const std::vector<std::uint64_t> seeds =
      seed_set ? std::vector<std::uint64_t>{seed} : cfg.train.seeds;
  const std::string hash = grantscreen::config_hash(cfg);
  fs::create_directories(out_dir);

  for (models::ModelKind kind : kinds) {
    for (std::uint64_t s : seeds) {
      train::TrainResult r =
          train::train_model(train_g.tensors, train_nodes, val_g.tensors,
                             val_nodes, kind, cfg.model, cfg.train, s);
      grantscreen::save_checkpoint(fs::path(out_dir) / ckpt_name(kind, s),
                                   r.params, models::kind_name(kind), s, hash);
      const std::string report_name = std::string("train_") +
                                      models::kind_name(kind) + "_" +
                                      std::to_string(s) + ".json";
      train::write_train_report_json(
          (fs::path(out_dir) / report_name).string(), r.report, kind, s);
      std::cout << "train " << models::kind_name(kind) << " seed " << s
                << ": stopped at epoch " << r.report.stopped_epoch
                << ", best epoch " << r.report.best_epoch << ", val loss "
                << r.report.best_val_loss
                << (r.report.diverged ? " [diverged]" : "") << "\n";
    }
  }
  write_stage_meta(out_dir, "train", cfg, {{"runs", kinds.size() * seeds.size()}});
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& graphs_dir,
                 const std::string& labels_csv, const std::string& ckpt_dir,
                 const std::string& out_dir, const std::string& models_flag) {
  LoadedGraph val_g = load_prepared(fs::path(graphs_dir) / "val");
  LoadedGraph test_g = load_prepared(fs::path(graphs_dir) / "test");
  auto table = labels::read_labels_csv(labels_csv);
  train::SplitNodes val_nodes = train::make_split_nodes(
      val_g.graph.companies, table, labels::Split::kVal);
  train::SplitNodes test_nodes = train::make_split_nodes(
      test_g.graph.companies, table, labels::Split::kTest);

  const std::vector<models::ModelKind> kinds = parse_model_list(models_flag, cfg);
  fs::create_directories(out_dir);

  std::map<std::string, std::map<std::string, metrics::MetricSummary>> by_model;
  nlohmann::json stability = nlohmann::json::object();
  for (models::ModelKind kind : kinds) {
    std::vector<metrics::EvalReport> runs;
    for (std::uint64_t s : cfg.train.seeds) {
      grantscreen::Checkpoint ckpt = grantscreen::load_checkpoint(
          fs::path(ckpt_dir) / ckpt_name(kind, s));
      if (ckpt.model_kind != models::kind_name(kind)) {
        throw Error("checkpoint", "checkpoint model mismatch: " +
                                      ckpt.model_kind);
      }
      metrics::ScoredSet val_s =
          score_split(kind, cfg.model, ckpt.store, val_g, val_nodes);
      metrics::ScoredSet test_s =
          score_split(kind, cfg.model, ckpt.store, test_g, test_nodes);
      metrics::EvalReport rep = metrics::evaluate(
          models::kind_name(kind), s, val_s, test_s, cfg.ks);
      const std::string name = std::string("eval_") +
                               models::kind_name(kind) + "_" +
                               std::to_string(s) + ".json";
      metrics::write_eval_report_json(fs::path(out_dir) / name, rep);
      runs.push_back(std::move(rep));
    }
    auto summary = metrics::aggregate(runs);
    stability[models::kind_name(kind)] = {
        {"auprc_mean", summary.at("auprc").mean},
        {"auprc_std", summary.at("auprc").stddev}};
    by_model[models::kind_name(kind)] = std::move(summary);
    std::cout << "evaluate " << models::kind_name(kind) << ": test auprc "
              << by_model[models::kind_name(kind)].at("auprc").mean << " +/- "
              << by_model[models::kind_name(kind)].at("auprc").stddev << "\n";
  }
  metrics::write_summary_csv(fs::path(out_dir) / "summary.csv", by_model);
  if (stability.contains("hgt") && stability.contains("rgcn")) {
    stability["hgt_std_below_rgcn"] =
        stability["hgt"]["auprc_std"].get<double>() <
        stability["rgcn"]["auprc_std"].get<double>();
  }
  write_stage_meta(out_dir, "evaluate", cfg, {{"stability", stability}});
  return 0;
}

int cmd_rank(const RunConfig& cfg, const std::string& ckpt_file,
             const std::string& graph_dir, const std::string& out_file,
             int k) {
  grantscreen::Checkpoint ckpt = grantscreen::load_checkpoint(ckpt_file);
  models::ModelKind kind = models::kind_from_name(ckpt.model_kind);
  LoadedGraph g = load_prepared(graph_dir);
  const std::size_t n = g.graph.companies.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw Error("k_exceeds_n", "k outside [1, company count]");
  }
  grantscreen::ad::Tape tape;
  models::ForwardOut fwd =
      models::eval_forward(kind, cfg.model, ckpt.store, tape, g.tensors);
  Eigen::MatrixXd probs = grantscreen::ad::softmax_rows_value(fwd.logits.value());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs(a, 1) != probs(b, 1)) return probs(a, 1) > probs(b, 1);
    return g.graph.companies[a] < g.graph.companies[b];
  });

  grantscreen::csv::Table t;
  t.header = {"company", "score", "rank"};
  for (int i = 0; i < k; ++i) {
    const std::size_t row = order[static_cast<std::size_t>(i)];
    t.rows.push_back({g.graph.companies[row],
                      grantscreen::csv::format_double(probs(row, 1)),
                      std::to_string(i + 1)});
  }
  grantscreen::csv::write_file(out_file, t);
  std::cout << "rank: wrote top " << k << " of " << n << " to " << out_file
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grant award screening pipeline"};
  app.require_subcommand(1);

  std::string config_path, in_path, out_path, graphs_dir, labels_csv,
      ckpt_path, models_flag;
  std::uint64_t seed = 0;
  int k = 100;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", config_path, "JSON config file");
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--seed", seed, "override the generator seed");

  auto* ingest = app.add_subcommand("ingest", "clean raw award records");
  ingest->add_option("--config", config_path, "JSON config file");
  ingest->add_option("--in", in_path, "raw CSV")->required();
  ingest->add_option("--out", out_path, "output directory")->required();

  auto* graph = app.add_subcommand(
      "build-graph", "build per-split graphs from clean records");
  graph->add_option("--config", config_path, "JSON config file");
  graph->add_option("--in", in_path, "clean CSV")->required();
  graph->add_option("--out", out_path, "output directory")->required();

  auto* lab = app.add_subcommand("labels", "compute labels and splits");
  lab->add_option("--config", config_path, "JSON config file");
  lab->add_option("--in", in_path, "clean CSV")->required();
  lab->add_option("--out", out_path, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train models over seeds");
  tr->add_option("--config", config_path, "JSON config file");
  tr->add_option("--graphs", graphs_dir, "directory with train/ val/ graphs")
      ->required();
  tr->add_option("--labels", labels_csv, "labels.csv path")->required();
  tr->add_option("--out", out_path, "output directory")->required();
  tr->add_option("--models", models_flag, "comma list or 'all'");
  tr->add_option("--seed", seed, "train a single seed instead of the list");

  auto* ev = app.add_subcommand("evaluate", "score checkpoints and aggregate");
  ev->add_option("--config", config_path, "JSON config file");
  ev->add_option("--graphs", graphs_dir, "directory with val/ test/ graphs")
      ->required();
  ev->add_option("--labels", labels_csv, "labels.csv path")->required();
  ev->add_option("--ckpts", ckpt_path, "checkpoint directory")->required();
  ev->add_option("--out", out_path, "output directory")->required();
  ev->add_option("--models", models_flag, "comma list or 'all'");

  auto* rk = app.add_subcommand("rank", "rank companies by screening score");
  rk->add_option("--config", config_path, "JSON config file");
  rk->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  rk->add_option("--graph", graphs_dir, "graph directory")->required();
  rk->add_option("--out", out_path, "output CSV path")->required();
  rk->add_option("--k", k, "ranking depth");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = config_or_default(config_path);
    if (synth->parsed()) {
      return cmd_synth(cfg, out_path, synth->count("--seed") > 0, seed);
    }
    if (ingest->parsed()) return cmd_ingest(cfg, in_path, out_path);
    if (graph->parsed()) return cmd_build_graph(cfg, in_path, out_path);
    if (lab->parsed()) return cmd_labels(cfg, in_path, out_path);
    if (tr->parsed()) {
      return cmd_train(cfg, graphs_dir, labels_csv, out_path, models_flag,
                       tr->count("--seed") > 0, seed);
    }
    if (ev->parsed()) {
      return cmd_evaluate(cfg, graphs_dir, labels_csv, ckpt_path, out_path,
                          models_flag);
    }
    if (rk->parsed()) return cmd_rank(cfg, ckpt_path, graphs_dir, out_path, k);
    print_error_json("usage", "no subcommand given");
    return 1;
  } catch (const Error& e) {
    print_error_json(e.code(), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    print_error_json("unexpected", e.what());
    return 1;
  }
}
