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

#include <cmath>
#include <random>
#include <sstream>

#include "ultr/errors.h"
#include "ultr/nnrank.h"
#include "ultr/simulate.h"

using namespace ultr;

namespace {

Query make_query(std::vector<int> grades, std::size_t dim = 3) {
  Query q;
  q.qid = "q1";
  for (std::size_t k = 0; k < grades.size(); ++k) {
    Document d;
    d.features.assign(dim, static_cast<double>(k));
    d.relevance = grades[k];
    d.doc_index = k;
    q.documents.push_back(d);
  }
  return q;
}

}  // namespace

TEST_CASE("click propensity follows the power law") {
  CHECK(click_propensity(1, 1.0) == doctest::Approx(1.0));
  CHECK(click_propensity(2, 1.0) == doctest::Approx(0.5));
  CHECK(click_propensity(4, 0.5) == doctest::Approx(0.5));
  CHECK_THROWS_AS(click_propensity(0, 1.0), ValidationError);
}

TEST_CASE("click relevance probability") {
  CHECK(click_relevance_prob(0, 0.1) == doctest::Approx(0.1));
  CHECK(click_relevance_prob(4, 0.1) == doctest::Approx(1.0));
  CHECK(click_relevance_prob(2, 0.1) == doctest::Approx(0.28));
}

TEST_CASE("dwell position mean at the top") {
  CHECK(dwell_position_mean(1) == doctest::Approx(2.0 / std::sqrt(3.0)));
  std::mt19937_64 rng(5);
  double sum = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) sum += sample_dwell_position(1, rng);
  const double se = dwell_position_sd(1) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n - 2.0 / std::sqrt(3.0)) < 4 * se);
}

TEST_CASE("irrelevant top document clicks at the noise floor") {
  const auto q = make_query({0, 3});
  SimConfig cfg;
  cfg.list_size = 2;
  const std::vector<std::size_t> ranking = {0, 1};
  std::mt19937_64 rng(11);
  const int n = 100000;
  int top = 0, second = 0;
  for (int k = 0; k < n; ++k) {
    const auto s = sample_session(q, ranking, cfg, rng);
    top += s.clicks[0];
    second += s.clicks[1];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.clicks[i] == 0) CHECK(s.dwell[i] == 0.0);
    }
  }
  const double p0 = 0.1;
  CHECK(std::abs(top / double(n) - p0) < 3 * std::sqrt(p0 * (1 - p0) / n));
  const double p1 = 0.5 * click_relevance_prob(3, 0.1);
  CHECK(std::abs(second / double(n) - p1) < 3 * std::sqrt(p1 * (1 - p1) / n));
}

TEST_CASE("combine") {
  const std::vector<int> clicks = {1, 0};
  const std::vector<double> dwell = {2.0, 0.0};
  CombineSpec sum;
  auto c = combine(clicks, dwell, sum);
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 0.0);

  const std::vector<int> none = {0, 0, 0};
  const std::vector<double> still = {0, 0, 0};
  for (double v : combine(none, still, sum)) CHECK(v == 0.0);

  CombineSpec cat{CombineKind::kWeightedSum, {1.0, 0.0}};
  const std::vector<double> busy = {2.5, 0.7};
  c = combine(clicks, busy, cat);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 0.0);

  CombineSpec prod{CombineKind::kWeightedProduct, {1.0, 0.0}};
  c = combine(clicks, busy, prod);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 0.0);
  CombineSpec prod0{CombineKind::kWeightedProduct, {0.0, 1.0}};
  c = combine(none, still, prod0);
  CHECK(c[0] == 0.0);  // 0^0 * 0^1

  CombineSpec bad{CombineKind::kWeightedSum, {1.0}};
  CHECK_THROWS_AS(combine(clicks, dwell, bad), ValidationError);
}

TEST_CASE("initial ranking policies") {
  const auto q = make_query({1, 3, 2});
  CHECK(initial_ranking(q, ByGradeDesc{}) == std::vector<std::size_t>{1, 2, 0});

  const auto a = initial_ranking(q, RandomOrder{42});
  const auto b = initial_ranking(q, RandomOrder{42});
  CHECK(a == b);

  Ranker flat(MlpSpec{3, {4}, 1});
  flat.zero_heads();
  CHECK(initial_ranking(q, ByScore{&flat}) == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(initial_ranking(q, ByScore{nullptr}), ValidationError);
}

TEST_CASE("sample_session rejects a bad ranking") {
  const auto q = make_query({1, 0, 2});
  SimConfig cfg;
  std::mt19937_64 rng(1);
  const std::vector<std::size_t> dup = {0, 0, 1};
  CHECK_THROWS_AS(sample_session(q, dup, cfg, rng), ValidationError);
  const std::vector<std::size_t> shorty = {0};
  CHECK_THROWS_AS(sample_session(q, shorty, cfg, rng), ValidationError);
}

TEST_CASE("simulation is deterministic and round-trips through text") {
  SyntheticGenerator gen(SyntheticSpec{}, 3);
  const auto data = gen.make(20, SplitTag::kTrain, 1);
  SimConfig cfg;
  cfg.sessions_per_query = 3;
  cfg.seed = 9;
  const auto s1 = simulate_sessions(data, ByGradeDesc{}, cfg);
  const auto s2 = simulate_sessions(data, ByGradeDesc{}, cfg);
  REQUIRE(s1.size() == 60);
  CHECK(s1 == s2);

  cfg.seed = 10;
  CHECK(simulate_sessions(data, ByGradeDesc{}, cfg) != s1);

  std::stringstream buf;
  write_sessions(buf, s1, "abc");
  const auto back = read_sessions(buf);
  CHECK(back == s1);
}

TEST_CASE("categorical mode labels equal clicks") {
  SyntheticGenerator gen(SyntheticSpec{}, 4);
  const auto data = gen.make(10, SplitTag::kTrain, 1);
  SimConfig cfg;
  cfg.combine.weights = {1.0, 0.0};
  for (const auto& s : simulate_sessions(data, RandomOrder{1}, cfg)) {
    const auto labels = session_labels(s, LabelChannel::kSynth);
    const auto clicks = session_labels(s, LabelChannel::kClick);
    CHECK(labels == clicks);
  }
}

TEST_CASE("empirical click rate matches the product model") {
  const auto q = make_query({4, 0, 2, 1, 3});
  SimConfig cfg;
  cfg.list_size = 5;
  cfg.eta = 0.7;
  const std::vector<std::size_t> ranking = {0, 1, 2, 3, 4};
  std::vector<int> hits(5, 0);
  const int n = 50000;
  for (int k = 0; k < n; ++k) {
    auto rng = session_stream(2, q.qid, static_cast<std::uint64_t>(k));
    const auto s = sample_session(q, ranking, cfg, rng);
    for (int p = 0; p < 5; ++p) hits[p] += s.clicks[p];
  }
  for (int p = 0; p < 5; ++p) {
    const double want = click_propensity(p + 1, 0.7) *
                        click_relevance_prob(q.documents[p].relevance, 0.1);
    CHECK(std::abs(hits[p] / double(n) - want) <= 4 * std::sqrt(want * (1 - want) / n));
  }
}

TEST_CASE("sim config validation") {
  SimConfig cfg;
  cfg.list_size = 1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = SimConfig{};
  cfg.noise_eps = 1.5;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}
