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
#include <limits>
#include <vector>

#include <doctest.h>

#include "grantscreen/errors.hpp"
#include "grantscreen/rng.hpp"
#include "grantscreen/tape.hpp"
#include "test_util.hpp"

namespace ad = grantscreen::ad;
using grantscreen::Error;
using grantscreen::Rng;
using Matrix = ad::Matrix;

namespace {

// Values bounded away from zero so relu subgradients are unambiguous under
// finite differences.
Matrix rand_away_from_zero(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      const double mag = rng.uniform(0.1, 1.0);
      m(i, j) = rng.bernoulli(0.5) ? mag : -mag;
    }
  }
  return m;
}

// Random bilinear functional L * x * R. Distinct weights on every output
// coordinate make gradient errors visible that a plain sum would cancel.
ad::Tensor pinch(ad::Tape& tape, const ad::Tensor& x, std::uint64_t seed) {
  Rng rng(seed);
  Matrix left = testutil::rand_matrix(rng, 1, x.rows());
  Matrix right = testutil::rand_matrix(rng, x.cols(), 1);
  return ad::matmul(ad::matmul(tape.constant(left), x),
                    tape.constant(right));
}

}  // namespace

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(11);
  Matrix a = testutil::rand_matrix(rng, 3, 4);
  Matrix b = testutil::rand_matrix(rng, 4, 5);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::matmul(in[0], in[1]), 7);
      },
      {a, b});
  CHECK_MESSAGE(res.pass, res.worst, " rel err ", res.max_rel_err);
}

TEST_CASE("add and bias_add gradients") {
  Rng rng(12);
  Matrix a = testutil::rand_matrix(rng, 3, 4);
  Matrix b = testutil::rand_matrix(rng, 3, 4);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::add(in[0], in[1]), 8);
      },
      {a, b});
  CHECK(res.pass);

  Matrix bias = testutil::rand_matrix(rng, 1, 4);
  res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::bias_add(in[0], in[1]), 9);
      },
      {a, bias});
  CHECK(res.pass);
}

TEST_CASE("bias_add broadcasts the bias row") {
  ad::Tape tape;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Matrix b(1, 3);
  b << 10, 20, 30;
  ad::Tensor y = ad::bias_add(tape.leaf(x), tape.leaf(b));
  CHECK(y.value()(0, 0) == 11.0);
  CHECK(y.value()(1, 2) == 36.0);
}

TEST_CASE("relu gradients and values") {
  Rng rng(13);
  Matrix x = rand_away_from_zero(rng, 4, 5);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::relu(in[0]), 10);
      },
      {x});
  CHECK(res.pass);

  ad::Tape tape;
  Matrix v(1, 3);
  v << -2.0, 0.0, 3.0;
  ad::Tensor y = ad::relu(tape.leaf(v));
  CHECK(y.value()(0, 0) == 0.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(0, 2) == 3.0);
}

TEST_CASE("sum_all gradient is all ones") {
  Rng rng(14);
  Matrix x = testutil::rand_matrix(rng, 3, 3);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return ad::sum_all(in[0]);
      },
      {x});
  CHECK(res.pass);
}

TEST_CASE("scaled_dot per-head products and gradients") {
  Rng rng(15);
  Matrix q = testutil::rand_matrix(rng, 6, 8);
  Matrix k = testutil::rand_matrix(rng, 6, 8);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::scaled_dot(in[0], in[1], 2, 0.5), 11);
      },
      {q, k});
  CHECK(res.pass);

  ad::Tape tape;
  ad::Tensor out = ad::scaled_dot(tape.leaf(q), tape.leaf(k), 2, 0.5);
  REQUIRE(out.rows() == 6);
  REQUIRE(out.cols() == 2);
  double manual = 0.0;
  for (int c = 4; c < 8; ++c) manual += q(3, c) * k(3, c);
  CHECK(out.value()(3, 1) == doctest::Approx(0.5 * manual).epsilon(1e-12));
}

TEST_CASE("segment_softmax normalizes within unsorted segments") {
  std::vector<std::int32_t> ids = {2, 0, 1, 0, 2, 0};
  ad::SegmentIndex seg{ids, 3};
  Rng rng(16);
  Matrix logits = testutil::rand_matrix(rng, 6, 2, -3.0, 3.0);

  ad::Tape tape;
  ad::Tensor w = ad::segment_softmax(tape.leaf(logits), seg);
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < 2; ++c) {
      double total = 0.0;
      for (int r = 0; r < 6; ++r) {
        if (ids[static_cast<std::size_t>(r)] == s) total += w.value()(r, c);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  auto res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::segment_softmax(in[0], seg), 12);
      },
      {logits});
  CHECK(res.pass);
}

TEST_CASE("segment_sum and segment_mean handle empty segments") {
  std::vector<std::int32_t> ids = {0, 0, 2};
  ad::SegmentIndex seg{ids, 4};
  Matrix vals(3, 2);
  vals << 1, 2, 3, 4, 5, 6;

  ad::Tape tape;
  ad::Tensor s = ad::segment_sum(tape.leaf(vals), seg);
  ad::Tensor m = ad::segment_mean(tape.leaf(vals), seg);
  CHECK(s.value()(0, 0) == 4.0);
  CHECK(s.value()(1, 0) == 0.0);
  CHECK(s.value()(3, 1) == 0.0);
  CHECK(m.value()(0, 1) == 3.0);
  CHECK(m.value()(2, 0) == 5.0);
  CHECK(m.value()(1, 1) == 0.0);

  Rng rng(17);
  Matrix rv = testutil::rand_matrix(rng, 3, 2);
  auto res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::segment_sum(in[0], seg), 13);
      },
      {rv});
  CHECK(res.pass);
  res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::segment_mean(in[0], seg), 14);
      },
      {rv});
  CHECK(res.pass);
}

TEST_CASE("apply_attention scales per-head slices") {
  Rng rng(18);
  Matrix alpha = testutil::rand_matrix(rng, 5, 2, 0.1, 1.0);
  Matrix values = testutil::rand_matrix(rng, 5, 8);

  ad::Tape tape;
  ad::Tensor out = ad::apply_attention(tape.leaf(alpha), tape.leaf(values));
  CHECK(out.value()(2, 1) == doctest::Approx(alpha(2, 0) * values(2, 1)));
  CHECK(out.value()(2, 6) == doctest::Approx(alpha(2, 1) * values(2, 6)));

  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::apply_attention(in[0], in[1]), 15);
      },
      {alpha, values});
  CHECK(res.pass);
}

TEST_CASE("layer_norm standardizes rows and differentiates") {
  Rng rng(19);
  Matrix x = testutil::rand_matrix(rng, 4, 6, -2.0, 2.0);
  Matrix gain = testutil::rand_matrix(rng, 1, 6, 0.5, 1.5);
  Matrix bias = testutil::rand_matrix(rng, 1, 6, -0.5, 0.5);

  ad::Tape tape;
  ad::Tensor y = ad::layer_norm(tape.leaf(x), tape.constant(Matrix::Ones(1, 6)),
                                tape.constant(Matrix::Zero(1, 6)));
  for (int r = 0; r < 4; ++r) {
    CHECK(y.value().row(r).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double var = y.value().row(r).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps in denominator
  }

  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::layer_norm(in[0], in[1], in[2]), 16);
      },
      {x, gain, bias});
  CHECK(res.pass);
}

TEST_CASE("dropout eval is identity, train mask is seeded and scaled") {
  Rng rng(20);
  Matrix x = testutil::rand_matrix(rng, 8, 8);

  ad::Tape tape;
  ad::Tensor ev = ad::dropout(tape.leaf(x), 0.4, 99, ad::Mode::kEval);
  CHECK((ev.value() - x).cwiseAbs().maxCoeff() == 0.0);

  ad::Tensor tr1 = ad::dropout(tape.leaf(x), 0.4, 99, ad::Mode::kTrain);
  ad::Tensor tr2 = ad::dropout(tape.leaf(x), 0.4, 99, ad::Mode::kTrain);
  CHECK((tr1.value() - tr2.value()).cwiseAbs().maxCoeff() == 0.0);

  int dropped = 0;
  for (int c = 0; c < 8; ++c) {
    for (int r = 0; r < 8; ++r) {
      const double ratio = tr1.value()(r, c) / x(r, c);
      const bool kept = std::abs(ratio - 1.0 / 0.6) < 1e-12;
      const bool zeroed = tr1.value()(r, c) == 0.0;
      CHECK((kept || zeroed));
      dropped += zeroed ? 1 : 0;
    }
  }
  CHECK(dropped > 0);
  CHECK(dropped < 64);

  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::dropout(in[0], 0.3, 7, ad::Mode::kTrain), 17);
      },
      {x});
  CHECK(res.pass);

  ad::Tape t2;
  CHECK_THROWS_WITH_AS(ad::dropout(t2.leaf(x), 1.0, 1, ad::Mode::kTrain),
                       doctest::Contains("dropout"), Error);
}

TEST_CASE("concat and gather gradients") {
  Rng rng(21);
  Matrix a = testutil::rand_matrix(rng, 2, 4);
  Matrix b = testutil::rand_matrix(rng, 3, 4);
  Matrix c = testutil::rand_matrix(rng, 1, 4);
  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::concat_rows({in[0], in[1], in[2]}), 18);
      },
      {a, b, c});
  CHECK(res.pass);

  Matrix d = testutil::rand_matrix(rng, 3, 2);
  Matrix e = testutil::rand_matrix(rng, 3, 5);
  res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::concat_cols({in[0], in[1]}), 19);
      },
      {d, e});
  CHECK(res.pass);

  Matrix x = testutil::rand_matrix(rng, 5, 4);
  const std::vector<std::int32_t> idx = {3, 1, 1, 4, 0};
  res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::gather_rows(in[0], idx), 20);
      },
      {x});
  CHECK(res.pass);

  ad::Tape tape;
  ad::Tensor g = ad::gather_rows(tape.leaf(x), idx);
  CHECK((g.value().row(1) - x.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(ad::gather_rows(tape.leaf(x), {5}), Error);
}

TEST_CASE("softmax cross entropy value and gradient") {
  ad::Tape tape;
  Matrix uniform = Matrix::Zero(4, 3);
  ad::Tensor l =
      ad::softmax_cross_entropy(tape.leaf(uniform), {0, 1, 2, 0});
  CHECK(l.value()(0, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Rng rng(22);
  Matrix logits = testutil::rand_matrix(rng, 6, 3, -2.0, 2.0);
  const std::vector<int> labels = {0, 2, 1, 1, 0, 2};
  auto res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return ad::softmax_cross_entropy(in[0], labels);
      },
      {logits});
  CHECK(res.pass);

  CHECK_THROWS_AS(
      ad::softmax_cross_entropy(tape.leaf(logits), {0, 1, 2, 3, 0, 1}), Error);
}

TEST_CASE("batch norm train and eval modes") {
  Rng rng(23);
  Matrix x = testutil::rand_matrix(rng, 5, 4, -2.0, 2.0);
  Matrix gain = testutil::rand_matrix(rng, 1, 4, 0.5, 1.5);
  Matrix bias = testutil::rand_matrix(rng, 1, 4, -0.5, 0.5);

  ad::Tape tape;
  ad::BatchNormOut bn =
      ad::batch_norm_train(tape.leaf(x), tape.leaf(gain), tape.leaf(bias));
  for (int c = 0; c < 4; ++c) {
    CHECK(bn.batch_mean(c) == doctest::Approx(x.col(c).mean()).epsilon(1e-12));
    const double biased_var =
        (x.col(c).array() - x.col(c).mean()).square().mean();
    CHECK(bn.batch_var(c) == doctest::Approx(biased_var).epsilon(1e-12));
  }

  auto res = ad::grad_check(
      [](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::batch_norm_train(in[0], in[1], in[2]).y, 21);
      },
      {x, gain, bias});
  CHECK(res.pass);

  Eigen::RowVectorXd rm = Eigen::RowVectorXd::Constant(4, 0.2);
  Eigen::RowVectorXd rv = Eigen::RowVectorXd::Constant(4, 1.5);
  res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Tensor>& in) {
        return pinch(t, ad::batch_norm_eval(in[0], in[1], in[2], rm, rv), 22);
      },
      {x, gain, bias});
  CHECK(res.pass);

  ad::Tape t1;
  Matrix one_row = Matrix::Ones(1, 4);
  CHECK_THROWS_WITH_AS(
      ad::batch_norm_train(t1.leaf(one_row), t1.leaf(gain), t1.leaf(bias)),
      doctest::Contains("batch"), Error);
}

TEST_CASE("softmax_rows_value rows sum to one") {
  Rng rng(24);
  Matrix logits = testutil::rand_matrix(rng, 5, 2, -4.0, 4.0);
  Matrix p = ad::softmax_rows_value(logits);
  for (int r = 0; r < 5; ++r) {
    CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.row(r).minCoeff() > 0.0);
  }
}

TEST_CASE("tape contracts: consumed, scalar loss, finiteness") {
  ad::Tape tape;
  Matrix x = Matrix::Ones(2, 2);
  ad::Tensor leaf = tape.leaf(x, true);
  ad::Tensor loss = ad::sum_all(leaf);
  tape.backward(loss);
  CHECK(leaf.grad()(0, 0) == 1.0);
  CHECK_THROWS_WITH_AS(tape.backward(loss), doctest::Contains("consumed"),
                       Error);

  ad::Tape t2;
  ad::Tensor nonscalar = ad::relu(t2.leaf(x, true));
  CHECK_THROWS_WITH_AS(t2.backward(nonscalar), doctest::Contains("1x1"),
                       Error);

  ad::Tape t3;
  Matrix inf = Matrix::Ones(2, 2);
  inf(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(ad::relu(t3.leaf(inf)), doctest::Contains("finite"),
                       Error);
}

TEST_CASE("segment index validation") {
  ad::SegmentIndex bad{{0, 3}, 3};
  CHECK_THROWS_AS(bad.validate(), Error);
  ad::SegmentIndex neg{{-1}, 2};
  CHECK_THROWS_AS(neg.validate(), Error);
  ad::SegmentIndex ok{{0, 2, 1}, 3};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("gradients accumulate across reuse of a tensor") {
  ad::Tape tape;
  Matrix x(1, 1);
  x << 3.0;
  ad::Tensor a = tape.leaf(x, true);
  ad::Tensor y = ad::add(a, a);  // dy/da = 2
  tape.backward(ad::sum_all(y));
  CHECK(a.grad()(0, 0) == 2.0);
}

TEST_CASE("unreached nodes report zero gradients") {
  ad::Tape tape;
  Matrix x = Matrix::Ones(2, 2);
  ad::Tensor used = tape.leaf(x, true);
  ad::Tensor unused = tape.leaf(x, true);
  tape.backward(ad::sum_all(used));
  CHECK(unused.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(unused.grad().rows() == 2);
}
