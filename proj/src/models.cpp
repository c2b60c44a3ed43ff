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

#include "grantscreen/models.hpp"

#include <cmath>

#include "grantscreen/errors.hpp"

namespace grantscreen::models {

namespace {

using ad::Mode;
using ad::Tape;
using ad::Tensor;

const char* kTypeNames[kNumNodeTypes] = {"company", "topic", "agency"};
constexpr int kInputDims[kNumNodeTypes] = {kCompanyFeatureDim, kTopicFeatureDim,
                                           kAgencyFeatureDim};

struct RelationSpec {
  const char* name;
  NodeType src;
  NodeType dst;
};
// Must match the serialization order in the graph module.
constexpr RelationSpec kSchema[] = {
    {kOperatesIn, NodeType::kCompany, NodeType::kTopic},
    {kAwardedBy, NodeType::kCompany, NodeType::kAgency},
    {kCoTopic, NodeType::kCompany, NodeType::kCompany},
    {kRevOperatesIn, NodeType::kTopic, NodeType::kCompany},
    {kRevAwardedBy, NodeType::kAgency, NodeType::kCompany},
    {kRevCoTopic, NodeType::kCompany, NodeType::kCompany},
};

std::size_t type_index(NodeType t) { return static_cast<std::size_t>(t); }

std::string layer_prefix(const char* model, int layer) {
  return std::string(model) + ".l" + std::to_string(layer) + ".";
}

// Classifier head shared by every model: dense, relu, dropout, dense.
Tensor classifier_head(Tape& tape, const Tensor& h, const BoundParams& p,
                       const ModelConfig& cfg, Mode mode, DropoutStream& drop) {
  Tensor z1 = ad::bias_add(ad::matmul(h, p.at("clf.w1")), p.at("clf.b1"));
  Tensor a1 = ad::relu(z1);
  Tensor d1 = ad::dropout(a1, cfg.dropout, drop.next(), mode);
  return ad::bias_add(ad::matmul(d1, p.at("clf.w2")), p.at("clf.b2"));
}

ForwardOut hgt_forward(Tape& tape, const ModelConfig& cfg,
                       const BoundParams& p, const GraphTensors& g, Mode mode,
                       DropoutStream& drop) {
  TypedStates h = project_inputs(tape, g, p);
  for (int l = 0; l < cfg.hgt_layers; ++l) {
    h = hgt_layer(tape, h, g, p, l, cfg, mode, drop);
  }
  ForwardOut out;
  out.logits = classifier_head(tape, h[type_index(NodeType::kCompany)], p, cfg,
                               mode, drop);
  return out;
}

ForwardOut rgcn_forward(Tape& tape, const ModelConfig& cfg,
                        const BoundParams& p, const GraphTensors& g, Mode mode,
                        DropoutStream& drop) {
  TypedStates h = project_inputs(tape, g, p);
  for (int l = 0; l < cfg.rgcn_layers; ++l) {
    h = rgcn_layer(tape, h, g, p, l, cfg, mode, drop);
  }
  ForwardOut out;
  out.logits = classifier_head(tape, h[type_index(NodeType::kCompany)], p, cfg,
                               mode, drop);
  return out;
}

ForwardOut mlp_forward(Tape& tape, const ModelConfig& cfg,
                       const ParamStore& store, const BoundParams& p,
                       const GraphTensors& g, Mode mode, DropoutStream& drop) {
  ForwardOut out;
  Tensor h = tape.constant(g.x[type_index(NodeType::kCompany)]);
  for (int b = 0; b < cfg.mlp_blocks; ++b) {
    const std::string prefix = "mlp.b" + std::to_string(b) + ".";
    Tensor z = ad::bias_add(ad::matmul(h, p.at(prefix + "w")),
                            p.at(prefix + "b"));
    Tensor a = ad::relu(z);
    Tensor normed;
    if (mode == Mode::kTrain) {
      ad::BatchNormOut bn = ad::batch_norm_train(a, p.at(prefix + "bn_g"),
                                                 p.at(prefix + "bn_b"));
      out.bn_stats.push_back(BnStat{prefix, bn.batch_mean, bn.batch_var});
      normed = bn.y;
    } else {
      normed = ad::batch_norm_eval(a, p.at(prefix + "bn_g"),
                                   p.at(prefix + "bn_b"),
                                   store.at(prefix + "bn_rm").row(0),
                                   store.at(prefix + "bn_rv").row(0));
    }
    h = ad::dropout(normed, cfg.dropout, drop.next(), mode);
  }
  out.logits = classifier_head(tape, h, p, cfg, mode, drop);
  return out;
}

}  // namespace

const char* kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kHgt: return "hgt";
    case ModelKind::kRgcn: return "rgcn";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "hgt") return ModelKind::kHgt;
  if (name == "rgcn") return ModelKind::kRgcn;
  if (name == "mlp") return ModelKind::kMlp;
  throw Error("bad_model", "unknown model kind: " + name);
}

void ModelConfig::validate() const {
  if (hidden_dim < 1 || heads < 1 || hidden_dim % heads != 0) {
    throw Error("bad_model_config",
                "hidden_dim must be a positive multiple of heads");
  }
  if (hgt_layers < 1 || rgcn_layers < 1 || mlp_blocks < 1 ||
      classifier_hidden < 1) {
    throw Error("bad_model_config", "layer counts must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw Error("bad_model_config", "dropout must be in [0, 1)");
  }
}

GraphTensors prepare(const HeteroGraph& g) {
  if (!g.reversed) {
    throw Error("graph_not_reversed", "prepare needs the full edge schema");
  }
  GraphTensors t;
  t.x[0] = g.company_x;
  t.x[1] = g.topic_x;
  t.x[2] = g.agency_x;
  t.n[0] = g.companies.size();
  t.n[1] = g.topics.size();
  t.n[2] = g.agencies.size();

  for (const RelationSpec& rs : kSchema) {
    const EdgeList* e = g.find_edges(rs.name);
    if (e == nullptr) {
      throw Error("graph_load", std::string("missing relation: ") + rs.name);
    }
    RelationTensors rt;
    rt.name = rs.name;
    rt.src_type = rs.src;
    rt.dst_type = rs.dst;
    rt.src = e->src;
    rt.dst = e->dst;
    rt.dst_seg.ids = e->dst;
    rt.dst_seg.num_segments =
        static_cast<std::int32_t>(t.n[type_index(rs.dst)]);
    rt.dst_seg.validate();
    t.relations.push_back(std::move(rt));
  }
  for (std::size_t r = 0; r < t.relations.size(); ++r) {
    const auto dst = type_index(t.relations[r].dst_type);
    t.in_relations[dst].push_back(r);
    for (std::int32_t d : t.relations[r].dst) {
      t.in_segments[dst].ids.push_back(d);
    }
  }
  for (std::size_t k = 0; k < kNumNodeTypes; ++k) {
    t.in_segments[k].num_segments = static_cast<std::int32_t>(t.n[k]);
  }
  return t;
}

const Tensor& BoundParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw Error("missing_param", "unbound parameter: " + name);
  }
  return it->second;
}

BoundParams bind_params(ad::Tape& tape, const ParamStore& store,
                        bool with_grad) {
  BoundParams bp;
  for (const auto& e : store.entries()) {
    bp.tensors.emplace(e.name, tape.leaf(e.value, with_grad && e.trainable));
  }
  return bp;
}

ParamStore make_params(ModelKind kind, const ModelConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  ParamStore store;
  Rng rng(seed);
  const int d = cfg.hidden_dim;

  if (kind == ModelKind::kHgt || kind == ModelKind::kRgcn) {
    for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
      store.add(std::string("proj.") + kTypeNames[t] + ".w", kInputDims[t], d,
                Init::kFanInUniform, true, rng);
      store.add(std::string("proj.") + kTypeNames[t] + ".b", 1, d, Init::kZeros,
                true, rng);
    }
  }
  if (kind == ModelKind::kHgt) {
    for (int l = 0; l < cfg.hgt_layers; ++l) {
      const std::string prefix = layer_prefix("hgt", l);
      for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
        store.add(prefix + "q." + kTypeNames[t], d, d, Init::kFanInUniform,
                  true, rng);
      }
      for (const RelationSpec& rs : kSchema) {
        store.add(prefix + "k." + rs.name, d, d, Init::kFanInUniform, true,
                  rng);
      }
      for (const RelationSpec& rs : kSchema) {
        store.add(prefix + "v." + rs.name, d, d, Init::kFanInUniform, true,
                  rng);
      }
      for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
        store.add(prefix + "o." + kTypeNames[t], d, d, Init::kFanInUniform,
                  true, rng);
      }
      for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
        store.add(prefix + "ln_g." + kTypeNames[t], 1, d, Init::kOnes, true,
                  rng);
        store.add(prefix + "ln_b." + kTypeNames[t], 1, d, Init::kZeros, true,
                  rng);
      }
    }
  } else if (kind == ModelKind::kRgcn) {
    for (int l = 0; l < cfg.rgcn_layers; ++l) {
      const std::string prefix = layer_prefix("rgcn", l);
      for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
        store.add(prefix + "self." + kTypeNames[t], d, d, Init::kFanInUniform,
                  true, rng);
      }
      for (const RelationSpec& rs : kSchema) {
        store.add(prefix + "rel." + rs.name, d, d, Init::kFanInUniform, true,
                  rng);
      }
      for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
        store.add(prefix + "ln_g." + kTypeNames[t], 1, d, Init::kOnes, true,
                  rng);
        store.add(prefix + "ln_b." + kTypeNames[t], 1, d, Init::kZeros, true,
                  rng);
      }
    }
  } else {
    int in_dim = kInputDims[type_index(NodeType::kCompany)];
    for (int b = 0; b < cfg.mlp_blocks; ++b) {
      const std::string prefix = "mlp.b" + std::to_string(b) + ".";
      store.add(prefix + "w", in_dim, d, Init::kFanInUniform, true, rng);
      store.add(prefix + "b", 1, d, Init::kZeros, true, rng);
      store.add(prefix + "bn_g", 1, d, Init::kOnes, true, rng);
      store.add(prefix + "bn_b", 1, d, Init::kZeros, true, rng);
      store.add(prefix + "bn_rm", 1, d, Init::kZeros, false, rng);
      store.add(prefix + "bn_rv", 1, d, Init::kOnes, false, rng);
      in_dim = d;
    }
  }

  store.add("clf.w1", d, cfg.classifier_hidden, Init::kFanInUniform, true, rng);
  store.add("clf.b1", 1, cfg.classifier_hidden, Init::kZeros, true, rng);
  store.add("clf.w2", cfg.classifier_hidden, 2, Init::kFanInUniform, true, rng);
  store.add("clf.b2", 1, 2, Init::kZeros, true, rng);
  return store;
}

TypedStates project_inputs(ad::Tape& tape, const GraphTensors& g,
                           const BoundParams& p) {
  TypedStates h;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    const std::string prefix = std::string("proj.") + kTypeNames[t];
    Tensor x = tape.constant(g.x[t]);
    h[t] = ad::bias_add(ad::matmul(x, p.at(prefix + ".w")),
                        p.at(prefix + ".b"));
  }
  return h;
}

TypedStates hgt_layer(ad::Tape& tape, const TypedStates& h,
                      const GraphTensors& g, const BoundParams& p, int layer,
                      const ModelConfig& cfg, ad::Mode mode,
                      DropoutStream& drop) {
  const std::string prefix = layer_prefix("hgt", layer);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim / cfg.heads));

  // Node-level projections once per type/relation, then edge gathers.
  TypedStates q;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    q[t] = ad::matmul(h[t], p.at(prefix + "q." + kTypeNames[t]));
  }
  std::vector<Tensor> keys(g.relations.size()), vals(g.relations.size());
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const auto src = type_index(g.relations[r].src_type);
    keys[r] = ad::matmul(h[src], p.at(prefix + "k." + g.relations[r].name));
    vals[r] = ad::matmul(h[src], p.at(prefix + "v." + g.relations[r].name));
  }

  TypedStates out;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    // Attention logits and messages across every incoming relation, stacked
    // in the canonical relation order so one softmax spans them jointly.
    std::vector<Tensor> logit_parts, value_parts;
    for (std::size_t r : g.in_relations[t]) {
      const RelationTensors& rel = g.relations[r];
      Tensor qe = ad::gather_rows(q[t], rel.dst);
      Tensor ke = ad::gather_rows(keys[r], rel.src);
      logit_parts.push_back(ad::scaled_dot(qe, ke, cfg.heads, scale));
      value_parts.push_back(ad::gather_rows(vals[r], rel.src));
    }
    Tensor logits = ad::concat_rows(logit_parts);
    Tensor values = ad::concat_rows(value_parts);
    Tensor alpha = ad::segment_softmax(logits, g.in_segments[t]);
    Tensor weighted = ad::apply_attention(alpha, values);
    Tensor agg = ad::segment_sum(weighted, g.in_segments[t]);
    Tensor projected = ad::matmul(agg, p.at(prefix + "o." + kTypeNames[t]));
    Tensor res = ad::add(h[t], projected);
    Tensor normed = ad::layer_norm(res, p.at(prefix + "ln_g." + kTypeNames[t]),
                                   p.at(prefix + "ln_b." + kTypeNames[t]));
    out[t] = ad::dropout(normed, cfg.dropout, drop.next(), mode);
  }
  return out;
}

TypedStates rgcn_layer(ad::Tape& tape, const TypedStates& h,
                       const GraphTensors& g, const BoundParams& p, int layer,
                       const ModelConfig& cfg, ad::Mode mode,
                       DropoutStream& drop) {
  const std::string prefix = layer_prefix("rgcn", layer);
  TypedStates out;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    Tensor acc =
        ad::matmul(h[t], p.at(prefix + "self." + kTypeNames[t]));
    for (std::size_t r : g.in_relations[t]) {
      const RelationTensors& rel = g.relations[r];
      const auto src = type_index(rel.src_type);
      Tensor msgs = ad::gather_rows(h[src], rel.src);
      Tensor mean = ad::segment_mean(msgs, rel.dst_seg);
      acc = ad::add(acc, ad::matmul(mean, p.at(prefix + "rel." + rel.name)));
    }
    Tensor res = ad::add(h[t], acc);
    Tensor normed = ad::layer_norm(res, p.at(prefix + "ln_g." + kTypeNames[t]),
                                   p.at(prefix + "ln_b." + kTypeNames[t]));
    out[t] = ad::dropout(normed, cfg.dropout, drop.next(), mode);
  }
  return out;
}

ForwardOut forward(ModelKind kind, const ModelConfig& cfg,
                   const ParamStore& store, const BoundParams& bound,
                   ad::Tape& tape, const GraphTensors& g, ad::Mode mode,
                   DropoutStream& drop) {
  switch (kind) {
    case ModelKind::kHgt:
      return hgt_forward(tape, cfg, bound, g, mode, drop);
    case ModelKind::kRgcn:
      return rgcn_forward(tape, cfg, bound, g, mode, drop);
    case ModelKind::kMlp:
      return mlp_forward(tape, cfg, store, bound, g, mode, drop);
  }
  throw Error("bad_model", "unhandled model kind");
}

ForwardOut eval_forward(ModelKind kind, const ModelConfig& cfg,
                        const ParamStore& store, ad::Tape& tape,
                        const GraphTensors& g) {
  BoundParams bound = bind_params(tape, store, /*with_grad=*/false);
  DropoutStream drop;  // unused in eval mode
  return forward(kind, cfg, store, bound, tape, g, Mode::kEval, drop);
}

void apply_bn_updates(ParamStore& store, const std::vector<BnStat>& stats,
                      double momentum) {
  for (const BnStat& s : stats) {
    Eigen::MatrixXd& rm = store.at(s.prefix + "bn_rm");
    Eigen::MatrixXd& rv = store.at(s.prefix + "bn_rv");
    rm.row(0) = (1.0 - momentum) * rm.row(0) + momentum * s.mean;
    rv.row(0) = (1.0 - momentum) * rv.row(0) + momentum * s.var;
  }
}

}  // namespace grantscreen::models
