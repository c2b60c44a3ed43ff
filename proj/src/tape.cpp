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

#include "grantscreen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grantscreen/errors.hpp"
#include "grantscreen/hash.hpp"
#include "grantscreen/rng.hpp"

namespace grantscreen::ad {

namespace {

using detail::Node;
using detail::NodePtr;

void check_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.tape() != b.tape()) {
    throw Error("tape_mismatch", std::string(op) + ": tensors on different tapes");
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw Error("shape", std::string(op) + ": bad shape " +
                           std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()));
}

Tape* tape_of(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error("shape", std::string(op) + ": empty tensor");
  return t.tape();
}

}  // namespace

const Matrix& Tensor::grad() const {
  if (!node_) throw Error("shape", "grad() on empty tensor");
  if (!node_->grad_live) {
    // Never reached by backward: gradient is identically zero.
    node_->grad.setZero(node_->value.rows(), node_->value.cols());
    node_->grad_live = true;
  }
  return node_->grad;
}

void SegmentIndex::validate() const {
  for (std::int32_t id : ids) {
    if (id < 0 || id >= num_segments) {
      throw Error("bad_segment", "segment id out of range");
    }
  }
}

Tensor Tape::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node), this);
}

Tensor Tape::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return leaf(std::move(m), requires_grad);
}

Tensor Tape::emit(Matrix value, bool requires_grad, const char* op_name) {
  if (!value.allFinite()) {
    throw Error("non_finite",
                std::string(op_name) + " produced a non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node), this);
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("tape_consumed", "backward on a consumed tape");
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw Error("non_scalar_loss", "backward requires a 1x1 loss tensor");
  }
  consumed_ = true;
  node_of(loss)->acc_grad()(0, 0) = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a);
  Tape* tape = tape_of(a, "matmul");
  Matrix value = a.value() * b.value();
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "matmul");
  if (rg) {
    NodePtr an = Tape::node_of(a), bn = Tape::node_of(b),
            on = Tape::node_of(out);
    tape->record([an, bn, on] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      if (an->requires_grad) an->acc_grad().noalias() += g * bn->value.transpose();
      if (bn->requires_grad) bn->acc_grad().noalias() += an->value.transpose() * g;
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", b);
  Tape* tape = tape_of(a, "add");
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = tape->emit(a.value() + b.value(), rg, "add");
  if (rg) {
    NodePtr an = Tape::node_of(a), bn = Tape::node_of(b),
            on = Tape::node_of(out);
    tape->record([an, bn, on] {
      if (!on->grad_live) return;
      if (an->requires_grad) an->acc_grad() += on->grad;
      if (bn->requires_grad) bn->acc_grad() += on->grad;
    });
  }
  return out;
}

Tensor bias_add(const Tensor& x, const Tensor& bias) {
  check_same_tape(x, bias, "bias_add");
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_error("bias_add", bias);
  Tape* tape = tape_of(x, "bias_add");
  Matrix value = x.value().rowwise() + bias.value().row(0);
  const bool rg = x.requires_grad() || bias.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "bias_add");
  if (rg) {
    NodePtr xn = Tape::node_of(x), bn = Tape::node_of(bias),
            on = Tape::node_of(out);
    tape->record([xn, bn, on] {
      if (!on->grad_live) return;
      if (xn->requires_grad) xn->acc_grad() += on->grad;
      if (bn->requires_grad) bn->acc_grad() += on->grad.colwise().sum();
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tape* tape = tape_of(x, "relu");
  Matrix value = x.value().cwiseMax(0.0);
  Tensor out = tape->emit(std::move(value), x.requires_grad(), "relu");
  if (x.requires_grad()) {
    NodePtr xn = Tape::node_of(x), on = Tape::node_of(out);
    tape->record([xn, on] {
      if (!on->grad_live) return;
      xn->acc_grad().array() +=
          on->grad.array() * (xn->value.array() > 0.0).cast<double>();
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tape* tape = tape_of(x, "sum_all");
  Matrix value(1, 1);
  value(0, 0) = x.value().sum();
  Tensor out = tape->emit(std::move(value), x.requires_grad(), "sum_all");
  if (x.requires_grad()) {
    NodePtr xn = Tape::node_of(x), on = Tape::node_of(out);
    tape->record([xn, on] {
      if (!on->grad_live) return;
      xn->acc_grad().array() += on->grad(0, 0);
    });
  }
  return out;
}

Tensor scaled_dot(const Tensor& q, const Tensor& k, int heads, double scale) {
  check_same_tape(q, k, "scaled_dot");
  if (q.rows() != k.rows() || q.cols() != k.cols()) shape_error("scaled_dot", k);
  if (heads < 1 || q.cols() % heads != 0) {
    throw Error("shape", "scaled_dot: cols must be divisible by heads");
  }
  Tape* tape = tape_of(q, "scaled_dot");
  const Eigen::Index slice = q.cols() / heads;
  const Eigen::Index rows = q.rows();
  Matrix value(rows, heads);
  for (int h = 0; h < heads; ++h) {
    value.col(h) = scale * (q.value().middleCols(h * slice, slice).array() *
                            k.value().middleCols(h * slice, slice).array())
                               .rowwise()
                               .sum();
  }
  const bool rg = q.requires_grad() || k.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "scaled_dot");
  if (rg) {
    NodePtr qn = Tape::node_of(q), kn = Tape::node_of(k),
            on = Tape::node_of(out);
    tape->record([qn, kn, on, heads, slice, scale] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      for (int h = 0; h < heads; ++h) {
        const auto gh = (scale * g.col(h)).eval();
        if (qn->requires_grad) {
          qn->acc_grad().middleCols(h * slice, slice).array() +=
              kn->value.middleCols(h * slice, slice).array().colwise() *
              gh.array();
        }
        if (kn->requires_grad) {
          kn->acc_grad().middleCols(h * slice, slice).array() +=
              qn->value.middleCols(h * slice, slice).array().colwise() *
              gh.array();
        }
      }
    });
  }
  return out;
}

Tensor segment_softmax(const Tensor& logits, const SegmentIndex& seg) {
  Tape* tape = tape_of(logits, "segment_softmax");
  if (static_cast<std::size_t>(logits.rows()) != seg.ids.size()) {
    throw Error("bad_segment", "segment ids do not match row count");
  }
  seg.validate();
  const Eigen::Index rows = logits.rows();
  const Eigen::Index cols = logits.cols();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  Matrix value(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    Eigen::VectorXd maxs =
        Eigen::VectorXd::Constant(seg.num_segments, neg_inf);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const double l = logits.value()(e, c);
      if (l > maxs[seg.ids[e]]) maxs[seg.ids[e]] = l;
    }
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(seg.num_segments);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const double w = std::exp(logits.value()(e, c) - maxs[seg.ids[e]]);
      value(e, c) = w;
      sums[seg.ids[e]] += w;
    }
    for (Eigen::Index e = 0; e < rows; ++e) value(e, c) /= sums[seg.ids[e]];
  }
  Tensor out =
      tape->emit(std::move(value), logits.requires_grad(), "segment_softmax");
  if (logits.requires_grad()) {
    NodePtr ln = Tape::node_of(logits), on = Tape::node_of(out);
    auto ids = seg.ids;
    auto num_segments = seg.num_segments;
    tape->record([ln, on, ids, num_segments] {
      if (!on->grad_live) return;
      const Matrix& w = on->value;
      const Matrix& g = on->grad;
      Matrix& dl = ln->acc_grad();
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        Eigen::VectorXd dot = Eigen::VectorXd::Zero(num_segments);
        for (Eigen::Index e = 0; e < w.rows(); ++e) {
          dot[ids[e]] += g(e, c) * w(e, c);
        }
        for (Eigen::Index e = 0; e < w.rows(); ++e) {
          dl(e, c) += w(e, c) * (g(e, c) - dot[ids[e]]);
        }
      }
    });
  }
  return out;
}

Tensor segment_sum(const Tensor& values, const SegmentIndex& seg) {
  Tape* tape = tape_of(values, "segment_sum");
  if (static_cast<std::size_t>(values.rows()) != seg.ids.size()) {
    throw Error("bad_segment", "segment ids do not match row count");
  }
  seg.validate();
  Matrix value = Matrix::Zero(seg.num_segments, values.cols());
  for (Eigen::Index e = 0; e < values.rows(); ++e) {
    value.row(seg.ids[e]) += values.value().row(e);
  }
  Tensor out =
      tape->emit(std::move(value), values.requires_grad(), "segment_sum");
  if (values.requires_grad()) {
    NodePtr vn = Tape::node_of(values), on = Tape::node_of(out);
    auto ids = seg.ids;
    tape->record([vn, on, ids] {
      if (!on->grad_live) return;
      Matrix& dv = vn->acc_grad();
      for (Eigen::Index e = 0; e < dv.rows(); ++e) {
        dv.row(e) += on->grad.row(ids[e]);
      }
    });
  }
  return out;
}

Tensor segment_mean(const Tensor& values, const SegmentIndex& seg) {
  Tape* tape = tape_of(values, "segment_mean");
  if (static_cast<std::size_t>(values.rows()) != seg.ids.size()) {
    throw Error("bad_segment", "segment ids do not match row count");
  }
  seg.validate();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(seg.num_segments);
  for (std::int32_t id : seg.ids) counts[id] += 1.0;
  Matrix value = Matrix::Zero(seg.num_segments, values.cols());
  for (Eigen::Index e = 0; e < values.rows(); ++e) {
    value.row(seg.ids[e]) += values.value().row(e);
  }
  for (Eigen::Index s = 0; s < seg.num_segments; ++s) {
    if (counts[s] > 0.0) value.row(s) /= counts[s];
  }
  Tensor out =
      tape->emit(std::move(value), values.requires_grad(), "segment_mean");
  if (values.requires_grad()) {
    NodePtr vn = Tape::node_of(values), on = Tape::node_of(out);
    auto ids = seg.ids;
    auto cts = counts;
    tape->record([vn, on, ids, cts] {
      if (!on->grad_live) return;
      Matrix& dv = vn->acc_grad();
      for (Eigen::Index e = 0; e < dv.rows(); ++e) {
        dv.row(e) += on->grad.row(ids[e]) / cts[ids[e]];
      }
    });
  }
  return out;
}

Tensor apply_attention(const Tensor& alpha, const Tensor& values) {
  check_same_tape(alpha, values, "apply_attention");
  if (alpha.rows() != values.rows()) shape_error("apply_attention", alpha);
  const Eigen::Index heads = alpha.cols();
  if (heads < 1 || values.cols() % heads != 0) {
    throw Error("shape", "apply_attention: cols must be divisible by heads");
  }
  Tape* tape = tape_of(alpha, "apply_attention");
  const Eigen::Index slice = values.cols() / heads;
  Matrix value(values.rows(), values.cols());
  for (Eigen::Index h = 0; h < heads; ++h) {
    value.middleCols(h * slice, slice) =
        values.value().middleCols(h * slice, slice).array().colwise() *
        alpha.value().col(h).array();
  }
  const bool rg = alpha.requires_grad() || values.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "apply_attention");
  if (rg) {
    NodePtr an = Tape::node_of(alpha), vn = Tape::node_of(values),
            on = Tape::node_of(out);
    tape->record([an, vn, on, heads, slice] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto gh = g.middleCols(h * slice, slice);
        const auto vh = vn->value.middleCols(h * slice, slice);
        if (an->requires_grad) {
          an->acc_grad().col(h) += (gh.array() * vh.array()).rowwise().sum().matrix();
        }
        if (vn->requires_grad) {
          vn->acc_grad().middleCols(h * slice, slice).array() +=
              gh.array().colwise() * an->value.col(h).array();
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  check_same_tape(x, gain, "layer_norm");
  check_same_tape(x, bias, "layer_norm");
  const Eigen::Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 ||
      bias.cols() != d) {
    shape_error("layer_norm", gain);
  }
  Tape* tape = tape_of(x, "layer_norm");
  const Eigen::Index n = x.rows();

  Eigen::VectorXd mean = x.value().rowwise().mean();
  Matrix centered = x.value().colwise() - mean;
  Eigen::VectorXd var = centered.array().square().rowwise().mean();
  Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix value = (xhat.array().rowwise() * gain.value().row(0).array())
                     .rowwise() +
                 bias.value().row(0).array();
  const bool rg =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "layer_norm");
  if (rg) {
    NodePtr xn = Tape::node_of(x), gn = Tape::node_of(gain),
            bn = Tape::node_of(bias), on = Tape::node_of(out);
    auto xhat_saved = std::make_shared<Matrix>(std::move(xhat));
    auto inv_std_saved = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
    tape->record([xn, gn, bn, on, xhat_saved, inv_std_saved, n, d] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      const Matrix& xh = *xhat_saved;
      if (gn->requires_grad) {
        gn->acc_grad() += (g.array() * xh.array()).colwise().sum().matrix();
      }
      if (bn->requires_grad) bn->acc_grad() += g.colwise().sum();
      if (xn->requires_grad) {
        Matrix dxhat = g.array().rowwise() * gn->value.row(0).array();
        Eigen::VectorXd row_mean = dxhat.rowwise().mean();
        Eigen::VectorXd row_dot =
            (dxhat.array() * xh.array()).rowwise().mean();
        Matrix dx =
            ((dxhat.colwise() - row_mean).array() -
             (xh.array().colwise() * row_dot.array()))
                .colwise() *
            inv_std_saved->array();
        xn->acc_grad() += dx;
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, std::uint64_t seed, Mode mode) {
  if (p < 0.0 || p >= 1.0) {
    throw Error("bad_dropout", "dropout rate must be in [0, 1)");
  }
  if (mode == Mode::kEval || p == 0.0) return x;  // identity, nothing recorded
  Tape* tape = tape_of(x, "dropout");
  const double inv_keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  Rng rng(seed);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      (*mask)(r, c) = rng.uniform() < p ? 0.0 : inv_keep;
    }
  }
  Matrix value = x.value().array() * mask->array();
  Tensor out = tape->emit(std::move(value), x.requires_grad(), "dropout");
  if (x.requires_grad()) {
    NodePtr xn = Tape::node_of(x), on = Tape::node_of(out);
    tape->record([xn, on, mask] {
      if (!on->grad_live) return;
      xn->acc_grad().array() += on->grad.array() * mask->array();
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("shape", "concat_rows: no parts");
  Tape* tape = tape_of(parts[0], "concat_rows");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  bool rg = false;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != cols) shape_error("concat_rows", p);
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix value(rows, cols);
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  Tensor out = tape->emit(std::move(value), rg, "concat_rows");
  if (rg) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(Tape::node_of(p));
    NodePtr on = Tape::node_of(out);
    tape->record([nodes, on] {
      if (!on->grad_live) return;
      Eigen::Index at = 0;
      for (const NodePtr& n : nodes) {
        if (n->requires_grad) {
          n->acc_grad() += on->grad.middleRows(at, n->value.rows());
        }
        at += n->value.rows();
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("shape", "concat_cols: no parts");
  Tape* tape = tape_of(parts[0], "concat_cols");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  bool rg = false;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) shape_error("concat_cols", p);
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix value(rows, cols);
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  Tensor out = tape->emit(std::move(value), rg, "concat_cols");
  if (rg) {
    std::vector<NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(Tape::node_of(p));
    NodePtr on = Tape::node_of(out);
    tape->record([nodes, on] {
      if (!on->grad_live) return;
      Eigen::Index at = 0;
      for (const NodePtr& n : nodes) {
        if (n->requires_grad) {
          n->acc_grad() += on->grad.middleCols(at, n->value.cols());
        }
        at += n->value.cols();
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::int32_t>& index) {
  Tape* tape = tape_of(x, "gather_rows");
  for (std::int32_t i : index) {
    if (i < 0 || i >= x.rows()) {
      throw Error("bad_index", "gather_rows: index out of range");
    }
  }
  Matrix value(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    value.row(static_cast<Eigen::Index>(e)) = x.value().row(index[e]);
  }
  Tensor out = tape->emit(std::move(value), x.requires_grad(), "gather_rows");
  if (x.requires_grad()) {
    NodePtr xn = Tape::node_of(x), on = Tape::node_of(out);
    auto idx = index;
    tape->record([xn, on, idx] {
      if (!on->grad_live) return;
      Matrix& dx = xn->acc_grad();
      for (std::size_t e = 0; e < idx.size(); ++e) {
        dx.row(idx[e]) += on->grad.row(static_cast<Eigen::Index>(e));
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  Tape* tape = tape_of(logits, "softmax_cross_entropy");
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error("shape", "softmax_cross_entropy: labels do not match rows");
  }
  if (n == 0) throw Error("shape", "softmax_cross_entropy: empty batch");
  for (int y : labels) {
    if (y < 0 || y >= c) throw Error("bad_index", "label out of range");
  }
  Eigen::VectorXd row_max = logits.value().rowwise().maxCoeff();
  Matrix shifted = logits.value().colwise() - row_max;
  Matrix expz = shifted.array().exp();
  Eigen::VectorXd denom = expz.rowwise().sum();
  auto probs = std::make_shared<Matrix>(expz.array().colwise() / denom.array());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += std::log(denom[i]) - shifted(i, labels[i]);
  }
  Matrix value(1, 1);
  value(0, 0) = total / static_cast<double>(n);
  Tensor out = tape->emit(std::move(value), logits.requires_grad(),
                          "softmax_cross_entropy");
  if (logits.requires_grad()) {
    NodePtr ln = Tape::node_of(logits), on = Tape::node_of(out);
    auto lbl = labels;
    tape->record([ln, on, probs, lbl, n] {
      if (!on->grad_live) return;
      const double g = on->grad(0, 0) / static_cast<double>(n);
      Matrix delta = *probs;
      for (Eigen::Index i = 0; i < n; ++i) delta(i, lbl[i]) -= 1.0;
      ln->acc_grad() += g * delta;
    });
  }
  return out;
}

BatchNormOut batch_norm_train(const Tensor& x, const Tensor& gain,
                              const Tensor& bias, double eps) {
  check_same_tape(x, gain, "batch_norm");
  check_same_tape(x, bias, "batch_norm");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) {
    throw Error("degenerate_batchnorm",
                "batch norm in train mode needs at least 2 rows");
  }
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 ||
      bias.cols() != d) {
    shape_error("batch_norm", gain);
  }
  Tape* tape = tape_of(x, "batch_norm");

  Eigen::RowVectorXd mean = x.value().colwise().mean();
  Matrix centered = x.value().rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix value = (xhat.array().rowwise() * gain.value().row(0).array())
                     .rowwise() +
                 bias.value().row(0).array();
  const bool rg =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "batch_norm");
  if (rg) {
    NodePtr xn = Tape::node_of(x), gn = Tape::node_of(gain),
            bn = Tape::node_of(bias), on = Tape::node_of(out);
    auto xhat_saved = std::make_shared<Matrix>(xhat);
    auto inv_std_saved = std::make_shared<Eigen::RowVectorXd>(inv_std);
    tape->record([xn, gn, bn, on, xhat_saved, inv_std_saved, n] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      const Matrix& xh = *xhat_saved;
      if (gn->requires_grad) {
        gn->acc_grad() += (g.array() * xh.array()).colwise().sum().matrix();
      }
      if (bn->requires_grad) bn->acc_grad() += g.colwise().sum();
      if (xn->requires_grad) {
        Matrix dxhat = g.array().rowwise() * gn->value.row(0).array();
        Eigen::RowVectorXd col_mean = dxhat.colwise().mean();
        Eigen::RowVectorXd col_dot =
            (dxhat.array() * xh.array()).colwise().mean();
        Matrix dx = ((dxhat.rowwise() - col_mean).array() -
                     (xh.array().rowwise() * col_dot.array()))
                        .rowwise() *
                    inv_std_saved->array();
        xn->acc_grad() += dx;
      }
    });
  }
  return BatchNormOut{out, mean, var};
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       const Eigen::RowVectorXd& running_mean,
                       const Eigen::RowVectorXd& running_var, double eps) {
  check_same_tape(x, gain, "batch_norm_eval");
  check_same_tape(x, bias, "batch_norm_eval");
  const Eigen::Index d = x.cols();
  if (running_mean.cols() != d || running_var.cols() != d ||
      gain.cols() != d || bias.cols() != d) {
    shape_error("batch_norm_eval", gain);
  }
  Tape* tape = tape_of(x, "batch_norm_eval");
  Eigen::RowVectorXd inv_std = (running_var.array() + eps).rsqrt();
  Matrix xhat = (x.value().rowwise() - running_mean).array().rowwise() *
                inv_std.array();
  Matrix value = (xhat.array().rowwise() * gain.value().row(0).array())
                     .rowwise() +
                 bias.value().row(0).array();
  const bool rg =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = tape->emit(std::move(value), rg, "batch_norm_eval");
  if (rg) {
    NodePtr xn = Tape::node_of(x), gn = Tape::node_of(gain),
            bn = Tape::node_of(bias), on = Tape::node_of(out);
    auto xhat_saved = std::make_shared<Matrix>(std::move(xhat));
    auto scale = std::make_shared<Eigen::RowVectorXd>(
        (gain.value().row(0).array() * inv_std.array()).matrix());
    tape->record([xn, gn, bn, on, xhat_saved, scale] {
      if (!on->grad_live) return;
      const Matrix& g = on->grad;
      if (gn->requires_grad) {
        gn->acc_grad() +=
            (g.array() * xhat_saved->array()).colwise().sum().matrix();
      }
      if (bn->requires_grad) bn->acc_grad() += g.colwise().sum();
      if (xn->requires_grad) {
        xn->acc_grad() += (g.array().rowwise() * scale->array()).matrix();
      }
    });
  }
  return out;
}

Matrix softmax_rows_value(const Matrix& logits) {
  Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Matrix expz = (logits.colwise() - row_max).array().exp();
  Eigen::VectorXd denom = expz.rowwise().sum();
  return expz.array().colwise() / denom.array();
}

// ---------------------------------------------------------------------------
// gradient checking

GradCheckResult grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    const std::vector<Matrix>& inputs, double step, double tol,
    int max_coords_per_input, std::uint64_t coord_seed) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m, true));
  Tensor loss = f(tape, leaves);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error("non_scalar_loss", "grad_check: f must return a scalar");
  }
  tape.backward(loss);
  std::vector<Matrix> analytic;
  analytic.reserve(leaves.size());
  for (const Tensor& t : leaves) analytic.push_back(t.grad());

  auto eval_at = [&f](const std::vector<Matrix>& points) {
    Tape t;
    std::vector<Tensor> ls;
    ls.reserve(points.size());
    for (const Matrix& m : points) ls.push_back(t.leaf(m, false));
    return f(t, ls).value()(0, 0);
  };

  GradCheckResult result;
  std::vector<Matrix> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Eigen::Index total = inputs[i].size();
    std::vector<Eigen::Index> coords;
    if (max_coords_per_input > 0 &&
        total > static_cast<Eigen::Index>(max_coords_per_input)) {
      Rng rng(hash_combine(coord_seed, i));
      for (int k = 0; k < max_coords_per_input; ++k) {
        coords.push_back(static_cast<Eigen::Index>(
            rng.uniform_index(static_cast<std::uint64_t>(total))));
      }
    } else {
      coords.resize(total);
      for (Eigen::Index k = 0; k < total; ++k) coords[k] = k;
    }
    for (Eigen::Index flat : coords) {
      const Eigen::Index r = flat % inputs[i].rows();
      const Eigen::Index c = flat / inputs[i].rows();
      const double saved = probe[i](r, c);
      probe[i](r, c) = saved + step;
      const double fp = eval_at(probe);
      probe[i](r, c) = saved - step;
      const double fm = eval_at(probe);
      probe[i](r, c) = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i](r, c);
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = "input " + std::to_string(i) + ", coord (" +
                       std::to_string(r) + "," + std::to_string(c) + ")";
      }
    }
  }
  result.pass = result.max_rel_err < tol;
  return result;
}

}  // namespace grantscreen::ad
