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
#include <random>
#include <vector>

#include "ultr/em_estimator.h"
#include "ultr/errors.h"
#include "ultr/losses.h"

using namespace ultr;

namespace {

struct List {
  std::vector<double> scores, labels, ref_scores, ref_betas;
  std::vector<int> positions;
  ListView view() const { return {scores, labels, positions, ref_scores, ref_betas}; }
};

List random_list(std::mt19937_64& rng, std::size_t n, bool binary) {
  std::normal_distribution<double> nd(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  List l;
  for (std::size_t k = 0; k < n; ++k) {
    l.scores.push_back(nd(rng));
    l.labels.push_back(binary ? (u(rng) < 0.4 ? 1.0 : 0.0)
                              : (u(rng) < 0.4 ? 0.0 : std::round(4 * u(rng) * 100) / 100));
    l.ref_scores.push_back(nd(rng));
    l.ref_betas.push_back(0.05 + 0.9 * u(rng));
    l.positions.push_back(static_cast<int>(k + 1));
  }
  return l;
}

BiasParams random_params(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  BiasParams p(n);
  for (int i = 1; i <= static_cast<int>(n); ++i) {
    p.theta(i) = u(rng);
    p.theta_minus(i) = p.theta(i) * u(rng);
    for (int j = 1; j <= static_cast<int>(n); ++j) {
      p.eps_minus(i, j) = 0.5 * u(rng);
      p.eps_plus(i, j) = p.eps_minus(i, j) + (0.99 - p.eps_minus(i, j)) * u(rng);
    }
  }
  return p;
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("pairwise base loss") {
  CHECK(pairwise_base_loss(0.3, 0.3).loss == doctest::Approx(std::log(2.0)));
  CHECK(pairwise_base_loss(50, 0).loss <= 2e-22);
  CHECK(pairwise_base_loss(0, 50).loss == doctest::Approx(50.0));
  const auto b = pairwise_base_loss(0.2, 1.0);
  CHECK(b.d_i == doctest::Approx(-1.0 / (1.0 + std::exp(-0.8))));
  CHECK(b.d_j == -b.d_i);
}

TEST_CASE("variant names") {
  for (auto v : {LossVariant::kNaivePointwiseMse, LossVariant::kNaivePointwiseCe,
                 LossVariant::kNaivePairwise, LossVariant::kIpwPointwise,
                 LossVariant::kIpwPairwise, LossVariant::kBayesIpw, LossVariant::kOpt}) {
    CHECK(parse_loss_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_loss_variant("lambdamart"), ValidationError);
  CHECK(is_pairwise(LossVariant::kOpt));
  CHECK_FALSE(is_pairwise(LossVariant::kIpwPointwise));
  CHECK(needs_bias_params(LossVariant::kIpwPointwise));
  CHECK_FALSE(needs_bias_params(LossVariant::kNaivePairwise));
}

TEST_CASE("ipw pointwise") {
  List l;
  l.scores = {0.5, -0.2, 1.0};
  l.labels = {0, 1, 0};
  l.positions = {1, 2, 3};
  BiasParams ones = init_default(3);
  for (int i = 1; i <= 3; ++i) ones.theta(i) = 1.0;
  const double lse = std::log(std::exp(0.5) + std::exp(-0.2) + std::exp(1.0));
  CHECK(loss_ipw_pointwise(l.view(), ones).value == doctest::Approx(lse + 0.2));

  BiasParams half = ones;
  half.theta(2) = 0.5;
  CHECK(loss_ipw_pointwise(l.view(), half).value ==
        doctest::Approx(2.0 * loss_ipw_pointwise(l.view(), ones).value));

  l.labels = {0, 0, 0};
  const auto none = loss_ipw_pointwise(l.view(), ones);
  CHECK(none.value == 0.0);
  for (double g : none.grad) CHECK(g == 0.0);

  l.labels = {0, 0.5, 0};
  CHECK_THROWS_AS(loss_ipw_pointwise(l.view(), ones), ValidationError);
}

TEST_CASE("pair weights on worked values") {
  BiasParams p = init_default(2);
  p.theta(1) = 1.0;
  p.theta(2) = 0.5;
  CHECK(pair_weight(LossVariant::kIpwPairwise, PairBucket::kBothPositive, p, 1, 2, 0.5, 0.5,
                    1.0) == doctest::Approx(2.0));
  p.theta_minus(2) = 0.5;
  CHECK(lower_exam_posterior(p, 1, 2, 0.4, 0.6, false) == doctest::Approx(0.4));
  CHECK(pair_weight(LossVariant::kIpwPairwise, PairBucket::kLowerZero, p, 1, 2, 0.4, 0.6,
                    1.0) == doctest::Approx(0.8));

  BiasParams q = init_default(2);
  q.theta(1) = 0.9;
  q.theta(2) = 0.5;
  q.eps_plus(1, 2) = 0.8;
  q.eps_minus(1, 2) = 0.2;
  CHECK(trust_posterior(q, 1, 2, 0.5) == doctest::Approx(0.8));
  CHECK(pair_weight(LossVariant::kBayesIpw, PairBucket::kBothPositive, q, 1, 2, 0.5, 0.5,
                    1.0) == doctest::Approx(1.7778).epsilon(1e-4));
  CHECK(pair_weight(LossVariant::kBayesIpw, PairBucket::kBothPositive, q, 1, 2, 0.0, 0.5,
                    1.0) == 0.0);
  CHECK(pair_weight(LossVariant::kOpt, PairBucket::kBothPositive, q, 1, 2, 0.5, 0.5, 0.25) ==
        doctest::Approx(0.25 * 0.8 / 0.45));

  CHECK_THROWS_AS(pair_weight(LossVariant::kOpt, PairBucket::kNonPositive, q, 1, 2, 0.5, 0.5,
                              1.0),
                  ValidationError);
  CHECK_THROWS_AS(pair_weight(LossVariant::kIpwPointwise, PairBucket::kBothPositive, q, 1, 2,
                              0.5, 0.5, 1.0),
                  ValidationError);
}

TEST_CASE("delta ndcg") {
  const std::vector<double> labels = {1.0, 0.0};
  const std::vector<int> ranks = {1, 2};
  CHECK(delta_ndcg(labels, ranks, 0, 1, 2) ==
        doctest::Approx(1.0 - 1.0 / std::log2(3.0)).epsilon(1e-12));
  CHECK(delta_ndcg(labels, ranks, 0, 1, 2) == doctest::Approx(0.36907).epsilon(1e-5));
  CHECK(delta_ndcg(labels, ranks, 1, 0, 2) == delta_ndcg(labels, ranks, 0, 1, 2));

  const std::vector<double> same = {2.0, 2.0, 0.0};
  const std::vector<int> r3 = {1, 2, 3};
  CHECK(delta_ndcg(same, r3, 0, 1, 3) == 0.0);
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(delta_ndcg(zero, ranks, 0, 1, 2) == 0.0);

  // Beyond the cutoff both discounts are zero.
  const std::vector<double> deep = {1.0, 0.5, 0.2, 0.1};
  const std::vector<int> r4 = {1, 2, 3, 4};
  CHECK(delta_ndcg(deep, r4, 2, 3, 2) == 0.0);

  CHECK(ranks_by_score(std::vector<double>{0.1, 0.5, 0.5}) == std::vector<int>{3, 1, 2});
}

TEST_CASE("naive losses") {
  List l;
  l.scores = {1.0, 0.5, 0.0};
  l.labels = {1.0, 0.5, 0.0};
  l.positions = {1, 2, 3};
  CHECK(loss_naive_pointwise_mse(l.view()).value == 0.0);
  l.scores = {100.0, 50.0, 0.0};
  l.labels = {2, 1, 0};
  CHECK(loss_naive_pairwise(l.view()).value < 1e-20);
  l.labels = {2, 1, 3};
  CHECK_THROWS_AS(loss_naive_pointwise_ce(l.view()), ValidationError);
}

TEST_CASE("reduction chain on random lists") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const auto l = random_list(rng, 6, false);
    auto p = random_params(rng, 6);

    LossOptions unit{LossVariant::kOpt, 10, DeltaZOrder::kModel, true};
    LossOptions bayes{LossVariant::kBayesIpw};
    const double a = loss_pairwise_weighted(l.view(), p, unit).value;
    const double b = loss_pairwise_weighted(l.view(), p, bayes).value;
    CHECK(a == b);

    auto clean = p;
    for (int i = 1; i <= 6; ++i) {
      for (int j = 1; j <= 6; ++j) {
        clean.eps_plus(i, j) = 1.0 - 1e-9;
        clean.eps_minus(i, j) = 1e-9;
      }
    }
    const double c = loss_pairwise_weighted(l.view(), clean, bayes).value;
    const double d =
        loss_pairwise_weighted(l.view(), clean, LossOptions{LossVariant::kIpwPairwise}).value;
    CHECK(rel_diff(c, d) <= 1e-6);

    // theta = 1 and theta_minus = 1 make every lower-zero posterior 1.
    auto flat = clean;
    for (int i = 1; i <= 6; ++i) flat.theta(i) = flat.theta_minus(i) = 1.0;
    const double e =
        loss_pairwise_weighted(l.view(), flat, LossOptions{LossVariant::kIpwPairwise}).value;
    CHECK(rel_diff(e, loss_naive_pairwise(l.view()).value) <= 1e-9);
  }
}

TEST_CASE("opt loss is invariant to label scale") {
  List l;
  l.scores = {0.2, 1.1, -0.4};
  l.labels = {2.0, 0.0, 1.0};
  l.positions = {1, 2, 3};
  l.ref_scores = {0.5, 0.1, -0.2};
  l.ref_betas = {0.6, 0.3, 0.5};
  const auto p = init_default(3);
  LossOptions opts;
  const double base = loss_pairwise_weighted(l.view(), p, opts).value;
  for (double& c : l.labels) c *= 2;
  CHECK(loss_pairwise_weighted(l.view(), p, opts).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(44);
  const std::vector<LossVariant> variants = {
      LossVariant::kNaivePointwiseMse, LossVariant::kNaivePointwiseCe,
      LossVariant::kNaivePairwise,     LossVariant::kIpwPointwise,
      LossVariant::kIpwPairwise,       LossVariant::kBayesIpw,
      LossVariant::kOpt};
  for (auto v : variants) {
    const bool binary = v == LossVariant::kNaivePointwiseCe || v == LossVariant::kIpwPointwise;
    for (int t = 0; t < 20; ++t) {
      auto l = random_list(rng, 5, binary);
      const auto p = random_params(rng, 5);
      LossOptions opts;
      opts.variant = v;
      opts.ndcg_cutoff = 3 + t % 3;
      opts.delta_z_order = t % 2 ? DeltaZOrder::kLogged : DeltaZOrder::kModel;
      const auto g = list_loss(l.view(), p, opts);
      const double h = 1e-6;
      for (std::size_t k = 0; k < l.scores.size(); ++k) {
        const double keep = l.scores[k];
        l.scores[k] = keep + h;
        const double up = list_loss(l.view(), p, opts).value;
        l.scores[k] = keep - h;
        const double down = list_loss(l.view(), p, opts).value;
        l.scores[k] = keep;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(g.grad[k]), 1e-6});
        CHECK_MESSAGE(std::abs(fd - g.grad[k]) / scale <= 1e-4, to_string(v));
      }
    }
  }
}

TEST_CASE("missing reference inputs are an error") {
  List l;
  l.scores = {1, 0};
  l.labels = {1, 0};
  l.positions = {1, 2};
  CHECK_THROWS_AS(loss_pairwise_weighted(l.view(), init_default(2), LossOptions{}),
                  ValidationError);
  CHECK_NOTHROW(loss_naive_pairwise(l.view()));
}
