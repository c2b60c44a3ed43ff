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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "grantscreen/errors.hpp"
#include "grantscreen/train.hpp"
#include "test_util.hpp"

namespace train = grantscreen::train;
namespace models = grantscreen::models;
namespace labels = grantscreen::labels;
using grantscreen::Error;
using labels::LabeledCompany;
using labels::Split;
using models::ModelConfig;
using models::ModelKind;

namespace {
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.hgt_layers = 2;
  cfg.rgcn_layers = 2;
  cfg.mlp_blocks = 3;
  cfg.dropout = 0.2;
  cfg.classifier_hidden = 4;
  return cfg;
}

// Shared small training setup: one fixture graph serves both cutoffs.
struct Setup {
  models::GraphTensors tensors;
  train::SplitNodes train_nodes;
  train::SplitNodes val_nodes;
};

Setup make_setup(int nc, std::uint64_t seed) {
  grantscreen::HeteroGraph g = testutil::make_fixture_graph(nc, 3, 2, seed);
  Setup s;
  s.tensors = models::prepare(g);
  std::vector<LabeledCompany> table;
  for (int i = 0; i < nc; ++i) {
    LabeledCompany row;
    row.company = g.companies[static_cast<std::size_t>(i)];
    row.first_p1_year = 2015;
    row.label = i % 2;
    row.split = i < nc / 2 ? Split::kTrain : Split::kVal;
    table.push_back(row);
  }
  s.train_nodes = train::make_split_nodes(g.companies, table, Split::kTrain);
  s.val_nodes = train::make_split_nodes(g.companies, table, Split::kVal);
  return s;
}
}  // namespace

TEST_CASE("learning-rate schedule endpoints") {
  train::TrainConfig cfg;
  CHECK(train::lr_at_epoch(1, cfg) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(train::lr_at_epoch(10, cfg) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(train::lr_at_epoch(105, cfg) == doctest::Approx(5e-4).epsilon(1e-9));
  CHECK(train::lr_at_epoch(200, cfg) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(train::lr_at_epoch(200, cfg) < 1e-18);
  // Monotone up through warmup, monotone down after.
  for (int e = 2; e <= 10; ++e)
    CHECK(train::lr_at_epoch(e, cfg) > train::lr_at_epoch(e - 1, cfg));
  for (int e = 12; e <= 200; ++e)
    CHECK(train::lr_at_epoch(e, cfg) < train::lr_at_epoch(e - 1, cfg));

  CHECK_THROWS_AS(train::lr_at_epoch(0, cfg), Error);
  CHECK_THROWS_AS(train::lr_at_epoch(201, cfg), Error);
}

TEST_CASE("gradient clipping rescales to the ceiling") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 3.0;
  b << 4.0;
  std::vector<Eigen::MatrixXd> grads = {a, b};
  double pre = train::clip_global_norm(grads, 1.0);
  CHECK(pre == doctest::Approx(5.0).epsilon(1e-15));
  double post = std::sqrt(grads[0].squaredNorm() + grads[1].squaredNorm());
  CHECK(post == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grads[0](0, 0) == doctest::Approx(0.6).epsilon(1e-12));

  std::vector<Eigen::MatrixXd> small = {0.1 * a};
  double pre2 = train::clip_global_norm(small, 1.0);
  CHECK(pre2 == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(small[0](0, 0) == doctest::Approx(0.3).epsilon(1e-15));

  std::vector<Eigen::MatrixXd> bad = {a};
  bad[0](0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(train::clip_global_norm(bad, 1.0),
                       doctest::Contains("finite"), Error);
  std::vector<Eigen::MatrixXd> ok = {a};
  CHECK_THROWS_AS(train::clip_global_norm(ok, 0.0), Error);
}

TEST_CASE("adamw first-step arithmetic") {
  train::TrainConfig cfg;  // lr 1e-3, wd 5e-4, betas 0.9/0.999, eps 1e-8
  grantscreen::Rng rng(1);
  grantscreen::ParamStore store;
  store.add("w", 1, 1, grantscreen::Init::kZeros, true, rng);
  store.at("w")(0, 0) = 1.0;
  store.add("frozen", 1, 1, grantscreen::Init::kOnes, false, rng);

  train::AdamWState state = train::make_adamw_state(store);
  REQUIRE(state.m.size() == 1);

  SUBCASE("unit gradient") {
    Eigen::MatrixXd g(1, 1);
    g << 1.0;
    train::adamw_step(store, {g}, state, cfg.lr, cfg);
    // Bias correction makes m_hat = v_hat = 1 on the first step, so the
    // update is 1/(1+eps) plus decay on the pre-step value.
    const double want =
        1.0 - cfg.lr * (1.0 / (1.0 + cfg.eps) + cfg.weight_decay * 1.0);
    CHECK(store.at("w")(0, 0) == doctest::Approx(want).epsilon(1e-15));
    CHECK(state.step == 1);
    CHECK(store.at("frozen")(0, 0) == 1.0);  // non-trainable untouched
  }

  SUBCASE("zero gradient leaves pure decay") {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(1, 1);
    train::adamw_step(store, {g}, state, cfg.lr, cfg);
    CHECK(store.at("w")(0, 0) ==
          doctest::Approx(1.0 - cfg.lr * cfg.weight_decay).epsilon(1e-15));
    CHECK(store.at("w")(0, 0) == doctest::Approx(0.9999995).epsilon(1e-12));
  }

  SUBCASE("two steps compound the moment estimates") {
    Eigen::MatrixXd g(1, 1);
    g << 1.0;
    train::adamw_step(store, {g}, state, cfg.lr, cfg);
    const double theta1 = store.at("w")(0, 0);
    train::adamw_step(store, {g}, state, cfg.lr, cfg);
    // Constant gradient keeps m_hat = v_hat = 1 exactly, so each step
    // subtracts lr * (1/(1+eps) + wd * theta_pre).
    const double want =
        theta1 - cfg.lr * (1.0 / (1.0 + cfg.eps) + cfg.weight_decay * theta1);
    CHECK(store.at("w")(0, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(state.step == 2);
  }

  SUBCASE("mismatched gradient list is rejected") {
    CHECK_THROWS_AS(train::adamw_step(store, {}, state, cfg.lr, cfg), Error);
  }
}

TEST_CASE("split node selection") {
  std::vector<std::string> companies = {"A", "B", "C"};
  std::vector<LabeledCompany> table;
  for (const char* name : {"A", "B", "C"}) {
    LabeledCompany row;
    row.company = name;
    row.split = name == std::string("C") ? Split::kVal : Split::kTrain;
    row.label = name == std::string("A") ? 1 : 0;
    table.push_back(row);
  }
  auto tr = train::make_split_nodes(companies, table, Split::kTrain);
  CHECK(tr.rows == std::vector<std::int32_t>{0, 1});
  CHECK(tr.labels == std::vector<int>{1, 0});
  CHECK(tr.companies == std::vector<std::string>{"A", "B"});
  auto va = train::make_split_nodes(companies, table, Split::kVal);
  CHECK(va.rows == std::vector<std::int32_t>{2});

  table.push_back({"GHOST", 2015, 0, Split::kTrain});
  CHECK_THROWS_WITH_AS(train::make_split_nodes(companies, table, Split::kTrain),
                       doctest::Contains("GHOST"), Error);
}

TEST_CASE("train config validation") {
  train::TrainConfig cfg;
  cfg.validate();
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = train::TrainConfig{};
  cfg.warmup_epochs = 300;  // beyond max_epochs
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = train::TrainConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("constant validation loss stops exactly at patience + 1") {
  Setup s = make_setup(10, 50);
  train::TrainConfig tcfg;
  tcfg.lr = 1e-30;  // updates vanish below double resolution
  tcfg.weight_decay = 0.0;

  auto result = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                   s.val_nodes, ModelKind::kRgcn,
                                   tiny_config(), tcfg, 42);
  const auto& rep = result.report;
  CHECK(rep.best_epoch == 1);
  CHECK(rep.stopped_epoch == 31);
  CHECK(rep.epochs.size() == 31);
  CHECK(!rep.diverged);
  for (const auto& e : rep.epochs)
    CHECK(e.val_loss == rep.epochs[0].val_loss);

  // Restored parameters are the epoch-1 snapshot. Nonzero weights cannot
  // move at this step size, and zero-initialized biases move by at most one
  // scaled step, so every coordinate sits within lr of its initialization.
  grantscreen::ParamStore init =
      models::make_params(ModelKind::kRgcn, tiny_config(), 42);
  REQUIRE(result.params.size() == init.size());
  for (std::size_t i = 0; i < init.size(); ++i) {
    CHECK((result.params.entries()[i].value - init.entries()[i].value)
              .cwiseAbs()
              .maxCoeff() <= 1e-30);
  }
}

TEST_CASE("an exploding step flags divergence instead of throwing") {
  Setup s = make_setup(10, 51);
  train::TrainConfig tcfg;
  tcfg.lr = 1e200;
  tcfg.warmup_epochs = 1;

  auto result = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                   s.val_nodes, ModelKind::kRgcn,
                                   tiny_config(), tcfg, 42);
  CHECK(result.report.diverged);
  CHECK(result.report.stopped_epoch < tcfg.max_epochs);
}

TEST_CASE("same seed reproduces the loss trajectory bitwise") {
  Setup s = make_setup(12, 52);
  train::TrainConfig tcfg;
  tcfg.max_epochs = 6;
  tcfg.warmup_epochs = 2;
  tcfg.patience = 6;

  for (ModelKind kind :
       {ModelKind::kHgt, ModelKind::kRgcn, ModelKind::kMlp}) {
    CAPTURE(models::kind_name(kind));
    auto r1 = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                 s.val_nodes, kind, tiny_config(), tcfg, 42);
    auto r2 = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                 s.val_nodes, kind, tiny_config(), tcfg, 42);
    REQUIRE(r1.report.epochs.size() == r2.report.epochs.size());
    for (std::size_t i = 0; i < r1.report.epochs.size(); ++i) {
      CHECK(r1.report.epochs[i].train_loss == r2.report.epochs[i].train_loss);
      CHECK(r1.report.epochs[i].val_loss == r2.report.epochs[i].val_loss);
      CHECK(r1.report.epochs[i].grad_norm == r2.report.epochs[i].grad_norm);
    }
    auto r3 = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                 s.val_nodes, kind, tiny_config(), tcfg, 43);
    CHECK(r3.report.epochs[0].train_loss != r1.report.epochs[0].train_loss);
  }
}

TEST_CASE("training reduces loss on a learnable fixture") {
  Setup s = make_setup(16, 53);
  train::TrainConfig tcfg;
  tcfg.max_epochs = 40;
  tcfg.patience = 40;
  tcfg.warmup_epochs = 5;

  auto result = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                   s.val_nodes, ModelKind::kRgcn,
                                   tiny_config(), tcfg, 42);
  const auto& ep = result.report.epochs;
  REQUIRE(!ep.empty());
  CHECK(result.report.best_val_loss < ep.front().val_loss);
  CHECK(result.report.param_count > 0);
  CHECK(result.report.wall_time_sec >= 0.0);
}

TEST_CASE("empty splits are rejected") {
  Setup s = make_setup(10, 54);
  train::SplitNodes empty;
  CHECK_THROWS_WITH_AS(
      train::train_model(s.tensors, empty, s.tensors, s.val_nodes,
                         ModelKind::kRgcn, tiny_config(), train::TrainConfig{},
                         42),
      doctest::Contains("empty"), Error);
}

TEST_CASE("train report serializes to parseable json") {
  Setup s = make_setup(10, 55);
  train::TrainConfig tcfg;
  tcfg.max_epochs = 3;
  tcfg.warmup_epochs = 1;
  tcfg.patience = 3;
  auto result = train::train_model(s.tensors, s.train_nodes, s.tensors,
                                   s.val_nodes, ModelKind::kMlp, tiny_config(),
                                   tcfg, 42);
  const auto path =
      (std::filesystem::temp_directory_path() / "gs_train_report.json")
          .string();
  train::write_train_report_json(path, result.report, ModelKind::kMlp, 42);
  std::ifstream in(path);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["model"] == "mlp");
  CHECK(j["seed"] == 42);
  CHECK(j["epochs"].size() == result.report.epochs.size());
  CHECK(j["best_epoch"] == result.report.best_epoch);
  std::filesystem::remove(path);
}
