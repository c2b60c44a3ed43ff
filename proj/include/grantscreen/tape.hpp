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

#ifndef GRANTSCREEN_TAPE_HPP_
#define GRANTSCREEN_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace grantscreen::ad {

using Matrix = Eigen::MatrixXd;

enum class Mode { kTrain, kEval };

class Tape;

namespace detail {
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool grad_live = false;  // grad allocated and zeroed for this backward pass

  Matrix& acc_grad() {
    if (!grad_live) {
      grad.setZero(value.rows(), value.cols());
      grad_live = true;
    }
    return grad;
  }
};
using NodePtr = std::shared_ptr<Node>;
}  // namespace detail

// Handle to a node on a tape. Values are dense 64-bit matrices; a scalar is
// 1x1. Tensors are cheap to copy; the tape must outlive its tensors.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const { return node_->value; }
  // Populated gradient after Tape::backward; zero-shaped if the node was
  // never reached.
  const Matrix& grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool defined() const { return node_ != nullptr; }

  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(detail::NodePtr node, Tape* tape)
      : node_(std::move(node)), tape_(tape) {}

  detail::NodePtr node_;
  Tape* tape_ = nullptr;
};

// Groups rows (edges) by segment (target node). ids need not be sorted.
struct SegmentIndex {
  std::vector<std::int32_t> ids;
  std::int32_t num_segments = 0;

  void validate() const;  // throws Error("bad_segment") on out-of-range ids
};

// Records forward ops and replays registered backwards in reverse order.
// Single-threaded by design: one tape per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Matrix value, bool requires_grad = false);
  Tensor constant(Matrix value) { return leaf(std::move(value), false); }
  Tensor scalar(double v, bool requires_grad = false);

  // Seeds d(loss)/d(loss)=1 and pulls every recorded op once, newest first.
  // loss must be 1x1 ("non_scalar_loss"); a tape backs only once
  // ("tape_consumed").
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  // -- used by op implementations --
  Tensor emit(Matrix value, bool requires_grad, const char* op_name);
  void record(std::function<void()> pull) {
    entries_.push_back(std::move(pull));
  }
  static detail::NodePtr node_of(const Tensor& t) { return t.node_; }

 private:
  std::vector<std::function<void()>> entries_;
  bool consumed_ = false;
};

// ---- ops ----
// Each checks shapes, records its backward when any input needs gradients,
// and rejects non-finite outputs with Error("non_finite").

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor bias_add(const Tensor& x, const Tensor& bias);  // bias is 1 x d
Tensor relu(const Tensor& x);
Tensor sum_all(const Tensor& x);  // 1x1

// Per-row multi-head dot products: q,k are E x d with d = heads*slice;
// out(e,h) = scale * <q(e, slice h), k(e, slice h)>.
Tensor scaled_dot(const Tensor& q, const Tensor& k, int heads, double scale);

// Softmax within each segment, independently per column. Weights of a
// segment sum to 1; empty segments simply contribute no rows.
Tensor segment_softmax(const Tensor& logits, const SegmentIndex& seg);

// out(s,:) = sum of value rows with segment id s (zero row when empty).
Tensor segment_sum(const Tensor& values, const SegmentIndex& seg);
// Same with mean; empty segments stay zero.
Tensor segment_mean(const Tensor& values, const SegmentIndex& seg);

// Scales each value row per head: out(e, slice h) = alpha(e,h)*values(e, slice h).
Tensor apply_attention(const Tensor& alpha, const Tensor& values);

// Row-wise normalization: mean 0 / variance 1 per row, then gain/bias (1 x d).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Inverted dropout: train keeps entries with prob 1-p scaled by 1/(1-p);
// eval returns x unchanged. The mask is a pure function of seed.
Tensor dropout(const Tensor& x, double p, std::uint64_t seed, Mode mode);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);  // last-axis concat

Tensor gather_rows(const Tensor& x, const std::vector<std::int32_t>& index);

// Mean softmax cross-entropy over rows; labels in [0, cols).
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

// Column-standardized over the batch with learned gain/bias. Train mode
// differentiates through the batch statistics and reports them so callers
// can maintain running averages; eval mode normalizes with caller-supplied
// running statistics. Train requires >= 2 rows ("degenerate_batchnorm").
struct BatchNormOut {
  Tensor y;
  Eigen::RowVectorXd batch_mean;
  Eigen::RowVectorXd batch_var;  // biased (1/n)
};
BatchNormOut batch_norm_train(const Tensor& x, const Tensor& gain,
                              const Tensor& bias, double eps = 1e-5);
Tensor batch_norm_eval(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       const Eigen::RowVectorXd& running_mean,
                       const Eigen::RowVectorXd& running_var,
                       double eps = 1e-5);

// Plain softmax of a logits matrix, by value (no tape involvement); used to
// turn eval-mode logits into scores.
Matrix softmax_rows_value(const Matrix& logits);

// ---- gradient checking ----

struct GradCheckResult {
  bool pass = false;
  double max_rel_err = 0.0;
  std::string worst;  // "input i, coord (r,c)" for the largest error
};

// Central finite differences against tape gradients. f must be
// deterministic (dropout under a fixed seed, or eval mode). When
// max_coords_per_input > 0, a seeded sample of coordinates per input is
// checked instead of every coordinate.
GradCheckResult grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    const std::vector<Matrix>& inputs, double step = 1e-5, double tol = 1e-4,
    int max_coords_per_input = -1, std::uint64_t coord_seed = 1234);

}  // namespace grantscreen::ad

#endif  // GRANTSCREEN_TAPE_HPP_
