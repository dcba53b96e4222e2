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

#include "ultr/generative_oracle.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ultr/errors.h"
#include "ultr/log.h"

namespace ultr::oracle {
namespace {

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

double bern(bool x, double p) { return x ? p : 1.0 - p; }

// P(c_i > c_j | state) with e_j's examination taken from the state.
double prob_order(const PairModel& m, const HiddenState& s) {
  if (!s.e_i) return 0.0;
  if (!s.e_j) return s.rel_i ? 1.0 : 0.0;
  return s.pref ? m.eps_plus : m.eps_minus;
}

double rho_j(const PairModel& m) {
  return m.theta_j_minus * (1.0 - m.theta_j) / (m.theta_j * (1.0 - m.theta_j_minus));
}

// P(state) * P(c_i > c_j | state) (or its complement) under a given prior on
// e_j.
StateDistribution world(const PairModel& m, double e_j_prior, bool ordered) {
  StateDistribution w{};
  for (int k = 0; k < kNumStates; ++k) {
    const auto s = HiddenState::from_index(k);
    const double prior = bern(s.e_i, m.theta_i) * bern(s.e_j, e_j_prior) *
                         relevance_prior(m, s);
    const double po = prob_order(m, s);
    w[k] = prior * (ordered ? po : 1.0 - po);
  }
  return w;
}

}  // namespace

HiddenState HiddenState::from_index(int k) {
  return HiddenState{(k & 8) != 0, (k & 4) != 0, (k & 2) != 0, (k & 1) != 0};
}

int HiddenState::index() const {
  return (e_i ? 8 : 0) | (e_j ? 4 : 0) | (pref ? 2 : 0) | (rel_i ? 1 : 0);
}

double JointTable::marginal(Observation obs) const {
  double s = 0.0;
  for (const auto& row : p) s += row[static_cast<int>(obs)];
  return s;
}

double JointTable::total() const {
  double s = 0.0;
  for (const auto& row : p) {
    for (double v : row) s += v;
  }
  return s;
}

void validate(const PairModel& m) {
  if (!open_unit(m.theta_i) || !open_unit(m.theta_j) ||
      !open_unit(m.theta_j_minus) || !open_unit(m.eps_plus) ||
      !open_unit(m.eps_minus) || !open_unit(m.gamma) || !open_unit(m.beta_i)) {
    throw ValidationError("pair model probabilities must lie in (0,1)");
  }
  if (!(m.eps_minus < m.eps_plus)) {
    throw ValidationError("pair model needs eps_minus < eps_plus");
  }
  if (m.gamma > m.beta_i) {
    log::debug("oracle: gamma > beta_i, some preferred states have r_i = 0");
  }
}

RelevanceJoint relevance_joint(double gamma, double beta) {
  const double both = std::min(gamma, beta);
  return RelevanceJoint{both, gamma - both, beta - both, 1.0 - std::max(gamma, beta)};
}

double relevance_prior(const PairModel& m, const HiddenState& s) {
  const auto j = relevance_joint(m.gamma, m.beta_i);
  if (s.pref) return s.rel_i ? j.pref_rel : j.pref_norel;
  return s.rel_i ? j.nopref_rel : j.nopref_norel;
}

JointTable joint_table(const PairModel& m) {
  validate(m);
  if (m.theta_j_minus > m.theta_j) {
    throw ValidationError(
        "joint table needs theta_j_minus <= theta_j (P(c_j=0 | e_j=1) > 1 otherwise)");
  }
  const double rho = rho_j(m);
  JointTable t;
  for (int k = 0; k < kNumStates; ++k) {
    const auto s = HiddenState::from_index(k);
    const double prior =
        bern(s.e_i, m.theta_i) * bern(s.e_j, m.theta_j) * relevance_prior(m, s);
    const double po = prob_order(m, s);
    auto& row = t.p[k];
    row[static_cast<int>(Observation::kNonPositive)] = prior * (1.0 - po);
    if (s.e_i && s.e_j) {
      row[static_cast<int>(Observation::kBothPositive)] = prior * po * (1.0 - rho);
      row[static_cast<int>(Observation::kLowerZero)] = prior * po * rho;
    } else {
      row[static_cast<int>(Observation::kLowerZero)] = prior * po;
    }
  }
  return t;
}

StateDistribution posterior(const PairModel& m, Observation obs) {
  validate(m);
  StateDistribution w{};
  switch (obs) {
    case Observation::kBothPositive:
      w = world(m, 1.0, true);
      break;
    case Observation::kLowerZero:
      w = world(m, m.theta_j_minus, true);
      break;
    case Observation::kNonPositive:
      w = world(m, m.theta_j, false);
      break;
  }
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(z > 0.0)) throw ZeroProbabilityError(0, 0, "oracle: zero-probability observation");
  for (double& v : w) v /= z;
  return w;
}

double prob_positive_pair(const PairModel& m) {
  validate(m);
  const auto w = world(m, m.theta_j, true);
  return std::accumulate(w.begin(), w.end(), 0.0);
}

PosteriorSummary summarize(const StateDistribution& dist) {
  PosteriorSummary out;
  for (int k = 0; k < kNumStates; ++k) {
    const auto s = HiddenState::from_index(k);
    const double p = dist[k];
    if (s.e_i && s.e_j) {
      (s.pref ? out.ee_pref : out.ee_not_pref) += p;
    } else if (s.e_i) {
      out.e_only += p;
    } else {
      out.rest += p;
    }
    if (s.e_i) out.exam_i += p;
    if (s.e_j) out.exam_j += p;
    if (s.rel_i) out.rel_i += p;
    if (s.pref) out.pref += p;
  }
  return out;
}

Draw sample(const PairModel& m, std::mt19937_64& rng) {
  const auto table = joint_table(m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng) * table.total();
  double acc = 0.0;
  Draw last{HiddenState::from_index(0), Observation::kNonPositive};
  for (int k = 0; k < kNumStates; ++k) {
    for (int o = 0; o < kNumObservations; ++o) {
      const double p = table.p[k][o];
      if (p <= 0.0) continue;
      last = Draw{HiddenState::from_index(k), static_cast<Observation>(o)};
      acc += p;
      if (target < acc) return last;
    }
  }
  return last;
}

}  // namespace ultr::oracle
