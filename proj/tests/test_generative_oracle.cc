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

#include "ultr/errors.h"
#include "ultr/generative_oracle.h"

using namespace ultr;
using namespace ultr::oracle;

namespace {

PairModel fixture() {
  PairModel m;
  m.theta_i = 0.9;
  m.theta_j = 0.5;
  m.theta_j_minus = 0.25;
  m.eps_plus = 0.9;
  m.eps_minus = 0.1;
  m.gamma = 0.6;
  m.beta_i = 0.4;
  return m;
}

double ordered_mass(const JointTable& t) {
  return t.marginal(Observation::kBothPositive) + t.marginal(Observation::kLowerZero);
}

}  // namespace

TEST_CASE("state index round trip") {
  for (int k = 0; k < kNumStates; ++k) CHECK(HiddenState::from_index(k).index() == k);
}

TEST_CASE("fixture marginal is 0.441") {
  const auto m = fixture();
  CHECK(prob_positive_pair(m) == doctest::Approx(0.441).epsilon(1e-12));
  const auto t = joint_table(m);
  CHECK(t.total() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ordered_mass(t) == doctest::Approx(0.441).epsilon(1e-12));
}

TEST_CASE("examined-and-preferred share of ordered pairs") {
  const auto t = joint_table(fixture());
  double num = 0;
  for (int k = 0; k < kNumStates; ++k) {
    const auto s = HiddenState::from_index(k);
    if (s.e_i && s.e_j && s.pref) {
      num += t.p[k][static_cast<int>(Observation::kBothPositive)] +
             t.p[k][static_cast<int>(Observation::kLowerZero)];
    }
  }
  CHECK(num / ordered_mass(t) == doctest::Approx(0.45 * 0.9 * 0.6 / 0.441).epsilon(1e-12));
  CHECK(num / ordered_mass(t) == doctest::Approx(0.55102).epsilon(1e-5));
}

TEST_CASE("trust posterior for a both-positive pair") {
  auto m = fixture();
  m.eps_plus = 0.8;
  m.eps_minus = 0.2;
  m.gamma = 0.5;
  const auto s = summarize(posterior(m, Observation::kBothPositive));
  CHECK(s.ee_pref == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(s.exam_i == doctest::Approx(1.0));
  CHECK(s.exam_j == doctest::Approx(1.0));

  m.eps_plus = 1.0 - 1e-12;
  m.eps_minus = 1e-12;
  m.gamma = 0.01;
  CHECK(summarize(posterior(m, Observation::kBothPositive)).ee_pref ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("lower item examination posterior") {
  auto m = fixture();
  m.theta_j_minus = 0.3;
  const auto s = summarize(posterior(m, Observation::kLowerZero));
  CHECK(s.exam_j == doctest::Approx(0.1566 / (0.1566 + 0.252)).epsilon(1e-12));
  CHECK(s.exam_j == doctest::Approx(0.38326).epsilon(1e-5));
}

TEST_CASE("joint table conditionals agree with posterior") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (int t = 0; t < 500; ++t) {
    PairModel m;
    m.theta_i = u(rng);
    m.theta_j = u(rng);
    m.theta_j_minus = m.theta_j * u(rng);
    m.eps_minus = u(rng) * 0.5;
    m.eps_plus = m.eps_minus + (0.99 - m.eps_minus) * u(rng);
    m.gamma = u(rng);
    m.beta_i = u(rng);
    const auto table = joint_table(m);
    CHECK(table.total() == doctest::Approx(1.0).epsilon(1e-12));
    for (int o = 0; o < kNumObservations; ++o) {
      const auto obs = static_cast<Observation>(o);
      const auto post = posterior(m, obs);
      const double z = table.marginal(obs);
      for (int k = 0; k < kNumStates; ++k) {
        CHECK(std::abs(post[k] - table.p[k][o] / z) < 1e-12);
      }
    }
    // Enumeration and the table agree on the ordered mass.
    CHECK(prob_positive_pair(m) == doctest::Approx(1.0 - table.marginal(Observation::kNonPositive))
                                       .epsilon(1e-12));
  }
}

TEST_CASE("relevance joint has exact marginals") {
  for (double g : {0.1, 0.4, 0.6, 0.9}) {
    for (double b : {0.2, 0.5, 0.8}) {
      const auto j = relevance_joint(g, b);
      CHECK(j.pref_rel + j.pref_norel == doctest::Approx(g));
      CHECK(j.pref_rel + j.nopref_rel == doctest::Approx(b));
      CHECK(j.pref_rel + j.pref_norel + j.nopref_rel + j.nopref_norel == doctest::Approx(1.0));
      CHECK(j.pref_norel >= 0);
      CHECK(j.nopref_rel >= 0);
      CHECK(j.nopref_norel >= 0);
    }
  }
}

TEST_CASE("noise-free limit is the pairwise position model") {
  auto m = fixture();
  m.eps_plus = 1.0 - 1e-12;
  m.eps_minus = 1e-12;
  m.gamma = 1.0 - 1e-12;
  m.beta_i = 1.0 - 1e-12;
  const auto t = joint_table(m);
  double ee = 0;
  for (int k = 0; k < kNumStates; ++k) {
    const auto s = HiddenState::from_index(k);
    if (s.e_i && s.e_j) {
      ee += t.p[k][static_cast<int>(Observation::kBothPositive)] +
            t.p[k][static_cast<int>(Observation::kLowerZero)];
    }
  }
  CHECK(ee == doctest::Approx(m.theta_i * m.theta_j).epsilon(1e-9));
}

TEST_CASE("invalid models are rejected") {
  auto m = fixture();
  m.eps_minus = 0.95;
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = fixture();
  m.theta_i = 1.0;
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = fixture();
  m.theta_j_minus = 0.7;  // above theta_j
  CHECK_THROWS_AS(joint_table(m), ValidationError);
  CHECK_NOTHROW(posterior(m, Observation::kLowerZero));
}

TEST_CASE("sampler frequencies follow the joint table") {
  const auto m = fixture();
  const auto t = joint_table(m);
  std::mt19937_64 rng(99);
  const int n = 200000;
  std::array<int, kNumObservations> hits{};
  int pref = 0;
  for (int k = 0; k < n; ++k) {
    const auto d = sample(m, rng);
    ++hits[static_cast<int>(d.observation)];
    pref += d.state.pref;
  }
  for (int o = 0; o < kNumObservations; ++o) {
    const double p = t.marginal(static_cast<Observation>(o));
    CHECK(std::abs(hits[o] / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
  }
  CHECK(std::abs(pref / double(n) - m.gamma) < 4 * std::sqrt(0.24 / n));
}
