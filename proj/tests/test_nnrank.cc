/*
 * Copyright 2026 The ultr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ultr/errors.h"
#include "ultr/nnrank.h"

using namespace ultr;

namespace {

RowMatrix random_batch(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  RowMatrix m(rows, dim);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = n(rng);
  }
  return m;
}

// sum_k a_k score_k + b_k beta_logit_k
double linear_objective(const Ranker& r, const RowMatrix& x, const std::vector<double>& a,
                        const std::vector<double>& b) {
  const auto rec = r.forward(x);
  double v = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    v += a[k] * rec.score(k) + b[k] * rec.beta_logit(k);
  }
  return v;
}

}  // namespace

TEST_CASE("zero heads give score 0 and beta 0.5") {
  Ranker r(MlpSpec{5, {8, 4}, 3});
  r.zero_heads();
  std::mt19937_64 rng(1);
  const auto x = random_batch(1, 5, rng);
  std::vector<double> f(x.data(), x.data() + 5);
  CHECK(r.score(f) == 0.0);
  CHECK(r.beta(f) == 0.5);
}

TEST_CASE("scoring is deterministic") {
  Ranker r(MlpSpec{4, {8, 4}, 7});
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.4};
  CHECK(r.score(x) == r.score(x));
  // Recorded from the first build; any change to init or forward shows here.
  CHECK(r.score(x) == 0.12109391060117133);
  CHECK(r.beta(x) == 0.52648464471315548);
  Ranker again(MlpSpec{4, {8, 4}, 7});
  CHECK(again.score(x) == r.score(x));
}

TEST_CASE("gamma is a sigmoid of the score gap") {
  Ranker r(MlpSpec{3, {6}, 2});
  const std::vector<double> a = {1.0, -0.5, 2.0};
  const std::vector<double> b = {-1.0, 0.5, 0.0};
  CHECK(r.gamma(a, a) == 0.5);
  CHECK(r.gamma(a, b) + r.gamma(b, a) == doctest::Approx(1.0));

  // Stretch the score head until the gap is at least 50.
  const double gap = r.score(a) - r.score(b);
  REQUIRE(gap != 0.0);
  auto p = r.mutable_parameters();
  const auto& head = r.score_head();
  for (std::size_t k = 0; k < head.in; ++k) p[head.weight_offset + k] *= 60.0 / gap;
  CHECK(r.score(a) - r.score(b) >= 50.0);
  CHECK(r.gamma(a, b) >= 1.0 - 1e-20);
  CHECK(r.gamma(b, a) <= 1e-20);
}

TEST_CASE("dimension mismatch is rejected") {
  Ranker r(MlpSpec{3, {4}, 0});
  const std::vector<double> x = {1, 2};
  CHECK_THROWS_AS(r.score(x), ValidationError);
  CHECK_THROWS_AS(Ranker(MlpSpec{0, {4}, 0}), ValidationError);
  CHECK_THROWS_AS(Ranker(MlpSpec{3, {}, 0}), ValidationError);
}

TEST_CASE("backprop on zero upstream gradient is zero") {
  Ranker r(MlpSpec{4, {5, 3}, 1});
  std::mt19937_64 rng(3);
  const auto x = random_batch(6, 4, rng);
  const auto rec = r.forward(x);
  const std::vector<double> zero(6, 0.0);
  for (double g : r.backprop(rec, zero, zero).values) CHECK(g == 0.0);
}

TEST_CASE("score head gradient of a squared loss") {
  Ranker r(MlpSpec{3, {4}, 5});
  const std::vector<double> x = {0.3, -1.2, 0.8};
  const double t = 0.7;
  RowMatrix row = Eigen::Map<const RowMatrix>(x.data(), 1, 3);
  const auto rec = r.forward(row);
  const double y = rec.score(0);
  const std::vector<double> ds = {2.0 * (y - t)};
  const std::vector<double> db = {0.0};
  const auto g = r.backprop(rec, ds, db);
  const auto& head = r.score_head();
  for (std::size_t k = 0; k < head.in; ++k) {
    CHECK(g.values[head.weight_offset + k] ==
          doctest::Approx(2.0 * (y - t) * rec.post.back()(0, k)).epsilon(1e-12));
  }
  CHECK(g.values[head.bias_offset] == doctest::Approx(2.0 * (y - t)));
}

TEST_CASE("backprop matches central differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const MlpSpec spec{3 + static_cast<std::size_t>(trial % 4),
                       {static_cast<std::size_t>(4 + trial % 3), 3},
                       static_cast<std::uint64_t>(trial)};
    Ranker r(spec);
    const auto x = random_batch(5, spec.input_dim, rng);
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const auto g = r.backprop(r.forward(x), a, b);
    const double h = 1e-6;
    for (std::size_t k = 0; k < r.num_parameters(); ++k) {
      Ranker plus = r, minus = r;
      plus.mutable_parameters()[k] += h;
      minus.mutable_parameters()[k] -= h;
      const double fd =
          (linear_objective(plus, x, a, b) - linear_objective(minus, x, a, b)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g.values[k]), 1e-6});
      CHECK(std::abs(fd - g.values[k]) / scale <= 1e-4);
    }
  }
}

TEST_CASE("stale forward records are refused") {
  Ranker r(MlpSpec{2, {3}, 1});
  std::mt19937_64 rng(1);
  const auto x = random_batch(2, 2, rng);
  const auto rec = r.forward(x);
  const std::vector<double> one(2, 1.0);
  const auto g = r.backprop(rec, one, one);
  r.sgd_step(g, 0.1);
  CHECK_THROWS_AS(r.backprop(rec, one, one), StateError);

  Ranker other(MlpSpec{2, {3}, 1});
  CHECK_THROWS_AS(other.backprop(r.forward(x), one, one), StateError);
  CHECK_THROWS_AS(r.backprop(ForwardRecord{}, one, one), StateError);
}

TEST_CASE("sgd step edge cases") {
  Ranker r(MlpSpec{2, {3}, 4});
  const std::vector<double> before(r.parameters().begin(), r.parameters().end());
  Gradients g{std::vector<double>(r.num_parameters(), 1.0)};
  r.sgd_step(g, 0.0);
  CHECK(std::equal(before.begin(), before.end(), r.parameters().begin()));
  r.sgd_step(g, 0.5, 0.0);
  CHECK(std::equal(before.begin(), before.end(), r.parameters().begin()));

  r.sgd_step(g, 0.5, 1.0);  // clipped to unit norm
  double moved = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    moved += std::pow(r.parameters()[k] - before[k], 2);
  }
  CHECK(std::sqrt(moved) == doctest::Approx(0.5));

  g.values[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(r.sgd_step(g, 0.1), NumericError);
  g.values.pop_back();
  CHECK_THROWS_AS(r.sgd_step(g, 0.1), ValidationError);
}
