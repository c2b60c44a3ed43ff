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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "grantscreen/labels.hpp"
#include "grantscreen/models.hpp"
#include "grantscreen/params.hpp"

namespace grantscreen::train {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  int warmup_epochs = 10;
  int max_epochs = 200;
  int patience = 30;       // epochs without strict val-loss improvement
  double clip_norm = 1.0;  // global L2 norm ceiling on the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::uint64_t> seeds = {42, 123, 456, 789, 1024};

  // Throws Error("bad_train_config") on out-of-range fields.
  void validate() const;
};

// Schedule value for a 1-based epoch: linear ramp to cfg.lr across the warmup
// epochs, then a cosine decay that reaches zero at cfg.max_epochs.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

// Scales every gradient in place by max_norm / norm when the joint L2 norm
// exceeds max_norm. Returns the pre-clip norm. Throws Error("non_finite")
// when the norm is not finite.
double clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double max_norm);

// First-moment / second-moment accumulators, one slot per trainable entry of
// the store that created the state, in registration order.
struct AdamWState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;
};

AdamWState make_adamw_state(const ParamStore& store);

// One decoupled-decay update. grads must align with the store's trainable
// entries in registration order; weight decay is applied to the pre-update
// parameter value, not folded into the moment estimates.
void adamw_step(ParamStore& store, const std::vector<Eigen::MatrixXd>& grads,
                AdamWState& state, double lr, const TrainConfig& cfg);

// Company rows (into a graph's company table) paired with their labels.
struct SplitNodes {
  std::vector<std::int32_t> rows;
  std::vector<int> labels;
  std::vector<std::string> companies;
};

// Selects the labelled companies belonging to `which` that also appear in
// graph_companies (sorted ascending). Throws Error("missing_company") when a
// selected company has no node, since that breaks the training contract.
SplitNodes make_split_nodes(const std::vector<std::string>& graph_companies,
                            const std::vector<labels::LabeledCompany>& table,
                            labels::Split which);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  double best_val_loss = 0.0;
  double wall_time_sec = 0.0;
  bool diverged = false;
  std::size_t param_count = 0;
};

struct TrainResult {
  ParamStore params;  // restored to the best-val-loss epoch
  TrainReport report;
};

// Full-batch training: one optimizer step per epoch on the train-cutoff
// graph, eval-mode validation loss on the val-cutoff graph, strict-improvement
// early stopping with best-epoch restore. A non-finite loss or activation
// aborts the run with report.diverged set instead of throwing.
TrainResult train_model(const models::GraphTensors& train_graph,
                        const SplitNodes& train_nodes,
                        const models::GraphTensors& val_graph,
                        const SplitNodes& val_nodes, models::ModelKind kind,
                        const models::ModelConfig& mcfg,
                        const TrainConfig& tcfg, std::uint64_t seed);

void write_train_report_json(const std::string& path, const TrainReport& report,
                             models::ModelKind kind, std::uint64_t seed);

}  // namespace grantscreen::train
