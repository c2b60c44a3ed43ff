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

#include "grantscreen/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numbers>
#include <utility>

#include <nlohmann/json.hpp>

#include "grantscreen/errors.hpp"
#include "grantscreen/hash.hpp"
#include "grantscreen/tape.hpp"

namespace grantscreen::train {

void TrainConfig::validate() const {
  const bool ok = lr > 0.0 && weight_decay >= 0.0 && warmup_epochs >= 0 &&
                  max_epochs >= 1 && warmup_epochs <= max_epochs &&
                  patience >= 1 && clip_norm > 0.0 && beta1 >= 0.0 &&
                  beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0 &&
                  !seeds.empty();
  if (!ok) {
    throw Error("bad_train_config", "training configuration out of range");
  }
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.max_epochs) {
    throw Error("bad_epoch", "epoch outside [1, max_epochs]");
  }
  if (epoch <= cfg.warmup_epochs) {
    return cfg.lr * static_cast<double>(epoch) / cfg.warmup_epochs;
  }
  // Cosine decay from the end of warmup to zero at max_epochs. The branch
  // above absorbs epoch == warmup == max, so the span here is positive.
  const double span = static_cast<double>(cfg.max_epochs - cfg.warmup_epochs);
  const double t = static_cast<double>(epoch - cfg.warmup_epochs) / span;
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double max_norm) {
  if (max_norm <= 0.0) {
    throw Error("bad_clip", "clip threshold must be positive");
  }
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw Error("non_finite", "gradient norm is not finite");
  }
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

AdamWState make_adamw_state(const ParamStore& store) {
  AdamWState st;
  for (const auto& e : store.entries()) {
    if (!e.trainable) continue;
    st.m.push_back(Eigen::MatrixXd::Zero(e.value.rows(), e.value.cols()));
    st.v.push_back(Eigen::MatrixXd::Zero(e.value.rows(), e.value.cols()));
  }
  return st;
}

void adamw_step(ParamStore& store, const std::vector<Eigen::MatrixXd>& grads,
                AdamWState& state, double lr, const TrainConfig& cfg) {
  if (grads.size() != state.m.size()) {
    throw Error("bad_grads", "gradient list does not match optimizer state");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t slot = 0;
  for (auto& e : store.entries()) {
    if (!e.trainable) continue;
    const Eigen::MatrixXd& g = grads[slot];
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols()) {
      throw Error("bad_grads", "gradient shape mismatch at " + e.name);
    }
    Eigen::MatrixXd& m = state.m[slot];
    Eigen::MatrixXd& v = state.v[slot];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() +
        (1.0 - cfg.beta2) * g.array().square().matrix();
    // Decoupled decay acts on the pre-update value, outside the moments.
    const Eigen::ArrayXXd mhat = m.array() / bc1;
    const Eigen::ArrayXXd vhat = v.array() / bc2;
    Eigen::MatrixXd update = (mhat / (vhat.sqrt() + cfg.eps)).matrix();
    update += cfg.weight_decay * e.value;
    e.value -= lr * update;
    ++slot;
  }
}

SplitNodes make_split_nodes(const std::vector<std::string>& graph_companies,
                            const std::vector<labels::LabeledCompany>& table,
                            labels::Split which) {
  SplitNodes out;
  for (const auto& row : table) {
    if (row.split != which) continue;
    const auto it = std::lower_bound(graph_companies.begin(),
                                     graph_companies.end(), row.company);
    if (it == graph_companies.end() || *it != row.company) {
      throw Error("missing_company",
                  "labelled company has no node: " + row.company);
    }
    out.rows.push_back(
        static_cast<std::int32_t>(it - graph_companies.begin()));
    out.labels.push_back(row.label);
    out.companies.push_back(row.company);
  }
  return out;
}

namespace {

double split_loss_value(models::ModelKind kind,
                        const models::ModelConfig& mcfg,
                        const ParamStore& store,
                        const models::GraphTensors& graph,
                        const SplitNodes& nodes) {
  ad::Tape tape;
  models::ForwardOut fwd = models::eval_forward(kind, mcfg, store, tape, graph);
  ad::Tensor picked = ad::gather_rows(fwd.logits, nodes.rows);
  ad::Tensor loss = ad::softmax_cross_entropy(picked, nodes.labels);
  return loss.value()(0, 0);
}

}  // namespace

TrainResult train_model(const models::GraphTensors& train_graph,
                        const SplitNodes& train_nodes,
                        const models::GraphTensors& val_graph,
                        const SplitNodes& val_nodes, models::ModelKind kind,
                        const models::ModelConfig& mcfg,
                        const TrainConfig& tcfg, std::uint64_t seed) {
  tcfg.validate();
  mcfg.validate();
  if (train_nodes.rows.empty() || val_nodes.rows.empty()) {
    throw Error("empty_split", "train and val splits must be non-empty");
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  out.params = models::make_params(kind, mcfg, seed);
  out.report.param_count = out.params.num_trainable();

  AdamWState opt = make_adamw_state(out.params);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> best_values = out.params.snapshot_values();
  int best_epoch = 0;
  bool diverged = false;
  int last_epoch = 0;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    last_epoch = epoch;
    const double lr = lr_at_epoch(epoch, tcfg);
    double train_loss = 0.0;
    double grad_norm = 0.0;
    double val_loss = 0.0;
    try {
      ad::Tape tape;
      models::BoundParams bound = models::bind_params(tape, out.params, true);
      models::DropoutStream drop{
          hash_combine(seed, static_cast<std::uint64_t>(epoch))};
      models::ForwardOut fwd =
          models::forward(kind, mcfg, out.params, bound, tape, train_graph,
                          ad::Mode::kTrain, drop);
      ad::Tensor picked = ad::gather_rows(fwd.logits, train_nodes.rows);
      ad::Tensor loss = ad::softmax_cross_entropy(picked, train_nodes.labels);
      train_loss = loss.value()(0, 0);
      tape.backward(loss);

      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(opt.m.size());
      for (const auto& e : out.params.entries()) {
        if (!e.trainable) continue;
        grads.push_back(bound.at(e.name).grad());
      }
      grad_norm = clip_global_norm(grads, tcfg.clip_norm);
      adamw_step(out.params, grads, opt, lr, tcfg);
      models::apply_bn_updates(out.params, fwd.bn_stats);

      val_loss = split_loss_value(kind, mcfg, out.params, val_graph, val_nodes);
    } catch (const Error& err) {
      if (err.code() != "non_finite") throw;
      diverged = true;
      break;
    }

    out.report.epochs.push_back({epoch, train_loss, val_loss, lr, grad_norm});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      best_values = out.params.snapshot_values();
    } else if (epoch - best_epoch >= tcfg.patience) {
      break;
    }
  }

  out.params.restore_values(best_values);
  out.report.best_epoch = best_epoch;
  out.report.stopped_epoch = last_epoch;
  out.report.best_val_loss = best_val;
  out.report.diverged = diverged;
  out.report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

void write_train_report_json(const std::string& path,
                             const TrainReport& report, models::ModelKind kind,
                             std::uint64_t seed) {
  nlohmann::json j;
  j["model"] = models::kind_name(kind);
  j["seed"] = seed;
  j["param_count"] = report.param_count;
  j["best_epoch"] = report.best_epoch;
  j["stopped_epoch"] = report.stopped_epoch;
  j["diverged"] = report.diverged;
  j["wall_time_sec"] = report.wall_time_sec;
  if (std::isfinite(report.best_val_loss)) {
    j["best_val_loss"] = report.best_val_loss;
  } else {
    j["best_val_loss"] = nullptr;
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"lr", e.lr},
                      {"grad_norm", e.grad_norm}});
  }
  j["epochs"] = std::move(epochs);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace grantscreen::train
