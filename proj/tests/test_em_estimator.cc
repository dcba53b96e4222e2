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
#include <sstream>

#include "ultr/em_estimator.h"
#include "ultr/errors.h"
#include "ultr/generative_oracle.h"

using namespace ultr;

namespace {

PairBucket to_bucket(oracle::Observation o) {
  switch (o) {
    case oracle::Observation::kBothPositive: return PairBucket::kBothPositive;
    case oracle::Observation::kLowerZero: return PairBucket::kLowerZero;
    default: return PairBucket::kNonPositive;
  }
}

// Params with the model's values at positions (1, 2).
BiasParams params_for(const oracle::PairModel& m) {
  BiasParams p = init_default(2);
  p.theta(1) = m.theta_i;
  p.theta(2) = m.theta_j;
  p.theta_minus(2) = m.theta_j_minus;
  p.eps_plus(1, 2) = m.eps_plus;
  p.eps_minus(1, 2) = m.eps_minus;
  return p;
}

EmSession session_with(std::vector<double> labels, std::vector<std::vector<double>>& store) {
  EmSession s;
  s.qid = "q";
  store.assign(labels.size(), std::vector<double>{0.0, 1.0});
  for (std::size_t k = 0; k < labels.size(); ++k) {
    store[k][0] = static_cast<double>(k);
    s.features.emplace_back(store[k]);
    s.doc_index.push_back(k);
  }
  s.labels = std::move(labels);
  return s;
}

}  // namespace

TEST_CASE("pair extraction buckets") {
  std::vector<std::vector<double>> store;
  auto pairs = extract_pairs(session_with({1.0, 0.0}, store));
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].pos_i == 1);
  CHECK(pairs[0].pos_j == 2);
  CHECK(pairs[0].bucket == PairBucket::kLowerZero);
  CHECK(pairs[1].bucket == PairBucket::kNonPositive);

  pairs = extract_pairs(session_with({2.0, 1.0}, store));
  CHECK(pairs[0].bucket == PairBucket::kBothPositive);

  for (const auto& p : extract_pairs(session_with({0, 0, 0, 0}, store))) {
    CHECK(p.bucket == PairBucket::kNonPositive);
  }
  CHECK(extract_pairs(session_with({0, 0, 0, 0}, store)).size() == 12);
}

TEST_CASE("join_sessions attaches features") {
  Dataset d;
  d.feature_dim = 2;
  Query q;
  q.qid = "a";
  for (int k = 0; k < 3; ++k) q.documents.push_back({{double(k), 1.0}, k, std::size_t(k)});
  d.queries.push_back(q);
  Session s;
  s.qid = "a";
  s.ranked_docs = {2, 0};
  s.clicks = {1, 0};
  s.dwell = {1.5, 0};
  s.synth = {2.5, 0};
  const std::vector<Session> sessions = {s};
  auto joined = join_sessions(sessions, d, LabelChannel::kSynth);
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].features[0][0] == 2.0);
  CHECK(joined[0].labels == std::vector<double>{2.5, 0});
  CHECK(join_sessions(sessions, d, LabelChannel::kClick)[0].labels ==
        std::vector<double>{1.0, 0.0});

  auto bad = sessions;
  bad[0].qid = "zzz";
  CHECK_THROWS_AS(join_sessions(bad, d, LabelChannel::kClick), ValidationError);
}

TEST_CASE("closed-form posteriors on the worked fixtures") {
  oracle::PairModel m;
  m.theta_i = 0.9;
  m.theta_j = 0.5;
  m.theta_j_minus = 0.3;
  m.eps_plus = 0.9;
  m.eps_minus = 0.1;
  const auto p = params_for(m);
  const auto lz = e_step(1, 2, PairBucket::kLowerZero, p, 0.6, 0.4);
  CHECK(lz.p_exam_j == doctest::Approx(0.38326).epsilon(1e-5));

  auto q = p;
  q.eps_plus(1, 2) = 0.8;
  q.eps_minus(1, 2) = 0.2;
  CHECK(e_step(1, 2, PairBucket::kBothPositive, q, 0.5, 0.4).p_ee_rpos ==
        doctest::Approx(0.8).epsilon(1e-12));

  q.eps_plus(1, 2) = 1.0 - kDefaultFloor;
  q.eps_minus(1, 2) = kDefaultFloor;
  CHECK(e_step(1, 2, PairBucket::kBothPositive, q, 0.5, 0.4).p_ee_rpos > 0.999);

  auto fix = p;
  fix.theta_minus(2) = 0.25;
  CHECK(pair_likelihood(1, 2, PairBucket::kBothPositive, fix, 0.6, 0.4) +
            pair_likelihood(1, 2, PairBucket::kLowerZero, fix, 0.6, 0.4) ==
        doctest::Approx(0.441).epsilon(1e-12));
}

TEST_CASE("closed-form E-step matches enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int t = 0; t < 2000; ++t) {
    oracle::PairModel m;
    m.theta_i = u(rng);
    m.theta_j = u(rng);
    m.theta_j_minus = t % 2 ? m.theta_j * u(rng) : u(rng);
    m.eps_minus = 0.5 * u(rng);
    m.eps_plus = m.eps_minus + (0.995 - m.eps_minus) * u(rng);
    m.gamma = u(rng);
    m.beta_i = u(rng);
    const auto p = params_for(m);
    for (int o = 0; o < oracle::kNumObservations; ++o) {
      const auto obs = static_cast<oracle::Observation>(o);
      const auto want = oracle::summarize(oracle::posterior(m, obs));
      const auto got = e_step(1, 2, to_bucket(obs), p, m.gamma, m.beta_i);
      CHECK(std::abs(got.p_ee_rpos - want.ee_pref) < 1e-10);
      CHECK(std::abs(got.p_ee_rneg - want.ee_not_pref) < 1e-10);
      CHECK(std::abs(got.p_e_only - want.e_only) < 1e-10);
      CHECK(std::abs(got.p_rest - want.rest) < 1e-10);
      CHECK(std::abs(got.p_exam_i - want.exam_i) < 1e-10);
      CHECK(std::abs(got.p_exam_j - want.exam_j) < 1e-10);
      CHECK(std::abs(got.p_rel_i - want.rel_i) < 1e-10);
      CHECK(std::abs(got.p_pref - want.pref) < 1e-10);
      if (m.theta_j_minus <= m.theta_j) {
        const auto table = oracle::joint_table(m);
        CHECK(std::abs(pair_likelihood(1, 2, to_bucket(obs), p, m.gamma, m.beta_i) -
                       table.marginal(obs)) < 1e-12);
      }
    }
  }
}

TEST_CASE("zero-mass observations name the pair") {
  BiasParams p = init_default(3);
  p.theta(2) = 0.0;
  try {
    e_step(2, 3, PairBucket::kLowerZero, p, 0.5, 0.5);
    FAIL("expected ZeroProbabilityError");
  } catch (const ZeroProbabilityError& e) {
    CHECK(e.pos_i() == 2);
    CHECK(e.pos_j() == 3);
  }
}

TEST_CASE("position M-step recovers examination rates") {
  // theta=(1, 0.5); pairs in both orders so each position fills both slots.
  const double t1 = 1.0 - 1e-9, t2 = 0.5;
  BiasParams truth = init_default(2);
  truth.theta(1) = t1;
  truth.theta(2) = t2;
  truth.theta_minus(1) = 0.5;
  truth.theta_minus(2) = 0.2;
  std::mt19937_64 rng(5);
  const int n = 100000;
  std::vector<PairObservation> pairs;
  for (int k = 0; k < n; ++k) {
    for (int dir = 0; dir < 2; ++dir) {
      const int pi = dir == 0 ? 1 : 2, pj = dir == 0 ? 2 : 1;
      oracle::PairModel m{truth.theta(pi), truth.theta(pj), truth.theta_minus(pj),
                          truth.eps_plus(pi, pj), truth.eps_minus(pi, pj), 0.6, 0.7};
      PairObservation p;
      p.pos_i = pi;
      p.pos_j = pj;
      p.bucket = to_bucket(oracle::sample(m, rng).observation);
      pairs.push_back(p);
    }
  }
  std::vector<PairPosterior> post;
  for (const auto& p : pairs) post.push_back(e_step(p.pos_i, p.pos_j, p.bucket, truth, 0.6, 0.7));
  const auto est = estimate_positions(pairs, post, truth);
  CHECK(std::abs(est.theta(1) - t1) < 1e-6);
  CHECK(std::abs(est.theta(2) - t2) < 3 * std::sqrt(t2 * (1 - t2) / n));

  // Applying the estimate with alpha 1 equals the projected estimate.
  CHECK(m_step_positions(pairs, post, truth, 1.0) == project(est));
  // alpha 0 keeps the old values.
  CHECK(max_abs_difference(blend(truth, est, 0.0), project(truth)) == 0.0);
}

TEST_CASE("empty cells keep their parameters") {
  BiasParams p = init_default(3);
  p.eps_plus(2, 3) = 0.77;
  std::vector<PairObservation> pairs(1);
  pairs[0].pos_i = 1;
  pairs[0].pos_j = 2;
  pairs[0].bucket = PairBucket::kBothPositive;
  const std::vector<PairPosterior> post = {e_step(1, 2, PairBucket::kBothPositive, p, 0.5, 0.5)};
  const auto est = estimate_positions(pairs, post, p);
  CHECK(est.eps_plus(2, 3) == 0.77);
  CHECK(est.eps_minus(3, 1) == p.eps_minus(3, 1));
}

TEST_CASE("regression step learns a certain preference") {
  const std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
  std::vector<PairObservation> pairs(1);
  pairs[0].feat_i = a;
  pairs[0].feat_j = b;
  pairs[0].bucket = PairBucket::kBothPositive;
  PairPosterior post;
  post.p_pref = 1.0;
  post.p_rel_i = 1.0;
  const std::vector<PairPosterior> posts = {post};
  Ranker r(MlpSpec{2, {4}, 3});
  std::mt19937_64 rng(1);
  const double first = m_step_regression(pairs, posts, r, 0.5, rng);
  double last = first;
  for (int s = 0; s < 50; ++s) {
    const double l = m_step_regression(pairs, posts, r, 0.5, rng);
    CHECK(l <= last + 1e-12);
    last = l;
  }
  CHECK(last < first);
  CHECK(r.score(a) > r.score(b));
  CHECK(r.beta(a) > 0.5);
}

TEST_CASE("uninformative posteriors give zero mean head gradient") {
  const std::vector<double> a = {0.5, -1.0, 2.0}, b = {-0.3, 0.8, 0.1};
  std::vector<PairObservation> pairs(1);
  pairs[0].feat_i = a;
  pairs[0].feat_j = b;
  PairPosterior post;
  post.p_pref = 0.5;
  post.p_rel_i = 0.5;
  const std::vector<PairPosterior> posts = {post};
  Ranker base(MlpSpec{3, {4}, 2});
  base.zero_heads();
  const auto& head = base.score_head();
  const int trials = 4000;
  std::vector<double> sum(head.in, 0.0), sq(head.in, 0.0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < trials; ++t) {
    Ranker r = base;
    m_step_regression(pairs, posts, r, 1.0, rng);
    for (std::size_t k = 0; k < head.in; ++k) {
      const double d = r.parameters()[head.weight_offset + k] -
                       base.parameters()[head.weight_offset + k];
      sum[k] += d;
      sq[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < head.in; ++k) {
    const double mean = sum[k] / trials;
    const double sd = std::sqrt(std::max(sq[k] / trials - mean * mean, 0.0));
    CHECK(std::abs(mean) <= 3 * sd / std::sqrt(double(trials)) + 1e-15);
  }
}

TEST_CASE("beta-only regression leaves scores alone") {
  const std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
  std::vector<PairObservation> pairs(1);
  pairs[0].feat_i = a;
  pairs[0].feat_j = b;
  PairPosterior post;
  post.p_pref = 1.0;
  post.p_rel_i = 1.0;
  const std::vector<PairPosterior> posts = {post};
  Ranker r(MlpSpec{2, {4}, 3});
  const double sa = r.score(a), ba = r.beta(a);
  std::mt19937_64 rng(1);
  for (int s = 0; s < 10; ++s) m_step_regression(pairs, posts, r, 0.5, rng, true);
  CHECK(r.score(a) == sa);
  CHECK(r.beta(a) > ba);
}

TEST_CASE("run_em with zero epochs returns its inputs") {
  std::vector<std::vector<double>> store;
  const auto s = session_with({1.0, 0.0, 2.0}, store);
  const auto pairs = extract_pairs(s);
  EmConfig cfg;
  cfg.epochs = 0;
  BiasParams init = init_default(3);
  init.theta(1) = 1.0;  // unprojected on purpose
  Ranker r(MlpSpec{2, {4}, 1});
  const auto res = run_em(pairs, cfg, init, r);
  CHECK(res.params == init);
  CHECK(std::equal(r.parameters().begin(), r.parameters().end(),
                   res.ranker.parameters().begin()));
  CHECK(res.epochs_run == 0);
}

TEST_CASE("full-batch EM increases the likelihood") {
  std::mt19937_64 rng(12);
  std::vector<std::vector<double>> feats(400, std::vector<double>{0.0, 0.0});
  std::vector<PairObservation> pairs;
  BiasParams truth = init_default(3);
  for (int s = 0; s < 400; ++s) {
    for (int i = 1; i <= 3; ++i) {
      for (int j = 1; j <= 3; ++j) {
        if (i == j) continue;
        oracle::PairModel m{std::min(truth.theta(i), 0.999), std::min(truth.theta(j), 0.999),
                            truth.theta_minus(j),
                            0.9, 0.1, 0.5, 0.5};
        PairObservation p;
        p.session = s;
        p.pos_i = i;
        p.pos_j = j;
        p.feat_i = feats[s];
        p.feat_j = feats[s];
        p.bucket = to_bucket(oracle::sample(m, rng).observation);
        pairs.push_back(p);
      }
    }
  }
  EmConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 0;
  cfg.alpha0 = 1.0;
  cfg.alpha_decay_batches = 0;
  cfg.update_heads = false;
  cfg.tolerance = 0;
  BiasParams init = init_default(3);
  for (int i = 1; i <= 3; ++i) init.theta(i) = 0.6;
  Ranker r(MlpSpec{2, {3}, 1});
  r.zero_heads();
  const auto res = run_em(pairs, cfg, init, r);
  REQUIRE(res.epoch_loglik.size() == 15);
  for (std::size_t e = 1; e < res.epoch_loglik.size(); ++e) {
    CHECK(res.epoch_loglik[e] >= res.epoch_loglik[e - 1] - 1e-9);
  }
  std::ostringstream trace;
  write_trace(trace, res.trace, "h");
  CHECK(trace.str().find("epoch_loglik") != std::string::npos);
}

TEST_CASE("config validation and alpha schedule") {
  EmConfig cfg;
  cfg.alpha0 = 0.0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = EmConfig{};
  cfg.head_steps = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = EmConfig{};
  cfg.alpha0 = 0.4;
  cfg.alpha_decay_batches = 10;
  CHECK(alpha_at(cfg, 0) == 0.4);
  CHECK(alpha_at(cfg, 10) == doctest::Approx(0.2));
  cfg.alpha_decay_batches = 0;
  CHECK(alpha_at(cfg, 1000) == 0.4);
}
