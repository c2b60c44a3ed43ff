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

#ifndef GRANTSCREEN_MODELS_HPP_
#define GRANTSCREEN_MODELS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "grantscreen/graph.hpp"
#include "grantscreen/hash.hpp"
#include "grantscreen/params.hpp"
#include "grantscreen/tape.hpp"

namespace grantscreen::models {

enum class ModelKind { kHgt, kRgcn, kMlp };
const char* kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);

struct ModelConfig {
  int hidden_dim = 128;
  int heads = 4;
  int hgt_layers = 3;
  int rgcn_layers = 2;
  int mlp_blocks = 3;
  double dropout = 0.2;
  int classifier_hidden = 64;

  void validate() const;  // hidden_dim % heads == 0, positive dims
};

// Graph flattened into the dense/index form the forwards consume.
struct RelationTensors {
  std::string name;
  NodeType src_type;
  NodeType dst_type;
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  ad::SegmentIndex dst_seg;  // one segment per destination node
};

struct GraphTensors {
  std::array<Eigen::MatrixXd, kNumNodeTypes> x;
  std::array<std::size_t, kNumNodeTypes> n{};
  std::vector<RelationTensors> relations;  // canonical schema order
  // Per destination type: indices into `relations` plus the segment index
  // over the concatenation of those relations' edges, in the same order.
  std::array<std::vector<std::size_t>, kNumNodeTypes> in_relations;
  std::array<ad::SegmentIndex, kNumNodeTypes> in_segments;
};

GraphTensors prepare(const HeteroGraph& g);

// Deterministic per-call dropout seeds within one forward pass.
struct DropoutStream {
  std::uint64_t base = 0;
  std::uint64_t calls = 0;
  std::uint64_t next() { return hash_combine(base, calls++); }
};

using TypedStates = std::array<ad::Tensor, kNumNodeTypes>;

struct BoundParams {
  std::unordered_map<std::string, ad::Tensor> tensors;
  const ad::Tensor& at(const std::string& name) const;
};

// Leaf tensors for every store entry; trainable entries carry gradients
// when with_grad is set.
BoundParams bind_params(ad::Tape& tape, const ParamStore& store,
                        bool with_grad);

// Fresh parameters for a model kind; registration order is fixed so a seed
// fully determines every initial value.
ParamStore make_params(ModelKind kind, const ModelConfig& cfg,
                       std::uint64_t seed);

struct BnStat {
  std::string prefix;  // parameter-name prefix of the block
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
};

struct ForwardOut {
  ad::Tensor logits;  // companies x 2
  std::vector<BnStat> bn_stats;  // train-mode batch statistics, for updates
};

TypedStates project_inputs(ad::Tape& tape, const GraphTensors& g,
                           const BoundParams& p);

TypedStates hgt_layer(ad::Tape& tape, const TypedStates& h,
                      const GraphTensors& g, const BoundParams& p, int layer,
                      const ModelConfig& cfg, ad::Mode mode,
                      DropoutStream& drop);

TypedStates rgcn_layer(ad::Tape& tape, const TypedStates& h,
                       const GraphTensors& g, const BoundParams& p, int layer,
                       const ModelConfig& cfg, ad::Mode mode,
                       DropoutStream& drop);

// Full forward with caller-supplied bound parameters (training and gradient
// checks need the tensor handles to read gradients back).
ForwardOut forward(ModelKind kind, const ModelConfig& cfg,
                   const ParamStore& store, const BoundParams& bound,
                   ad::Tape& tape, const GraphTensors& g, ad::Mode mode,
                   DropoutStream& drop);

// Convenience: no-grad eval-mode forward.
ForwardOut eval_forward(ModelKind kind, const ModelConfig& cfg,
                        const ParamStore& store, ad::Tape& tape,
                        const GraphTensors& g);

// running <- (1 - momentum) * running + momentum * batch
void apply_bn_updates(ParamStore& store, const std::vector<BnStat>& stats,
                      double momentum = 0.1);

}  // namespace grantscreen::models

#endif  // GRANTSCREEN_MODELS_HPP_
