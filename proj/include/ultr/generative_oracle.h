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

#ifndef ULTR_GENERATIVE_ORACLE_H_
#define ULTR_GENERATIVE_ORACLE_H_

#include <array>
#include <cstddef>
#include <random>

// Brute-force enumeration of the pairwise trust-bias model for one ordered
// pair (i above j in the comparison, any display positions). Nothing here is
// used by training; it is the reference the closed-form E-step is tested
// against, and the sampler for well-specified synthetic pair data.
namespace ultr::oracle {

struct PairModel {
  double theta_i = 0.5;
  double theta_j = 0.5;
  double theta_j_minus = 0.25;
  double eps_plus = 0.9;
  double eps_minus = 0.1;
  double gamma = 0.5;   // P(r_i > r_j)
  double beta_i = 0.5;  // P(r_i > 0)
};

enum class Observation {
  kBothPositive,  // c_i > c_j > 0
  kLowerZero,     // c_i > c_j = 0
  kNonPositive,   // not (c_i > c_j)
};

struct HiddenState {
  bool e_i = false;
  bool e_j = false;
  bool pref = false;   // r_i > r_j
  bool rel_i = false;  // r_i > 0

  static HiddenState from_index(int k);
  int index() const;
};

inline constexpr int kNumStates = 16;
inline constexpr int kNumObservations = 3;

using StateDistribution = std::array<double, kNumStates>;

// P(hidden state, observation). Generative rules:
//   e_i ~ Bern(theta_i), e_j ~ Bern(theta_j), independent;
//   (pref, rel_i) ~ relevance_joint(gamma, beta_i), so P(pref) = gamma and
//   P(rel_i) = beta_i exactly;
//   e_i = 0                 -> not (c_i > c_j);
//   e_i = 1, e_j = 0        -> c_i > c_j = 0 iff rel_i;
//   e_i = e_j = 1           -> c_i > c_j w.p. eps+ (pref) or eps- (not pref),
//                              and then c_j = 0 w.p. rho_j, independently.
// rho_j = theta_j_minus (1 - theta_j) / (theta_j (1 - theta_j_minus)) makes
// P(e_j = 1 | c_j = 0) equal theta_j_minus; it must be <= 1, so models with
// theta_j_minus > theta_j are rejected here.
struct JointTable {
  std::array<std::array<double, kNumObservations>, kNumStates> p{};

  double marginal(Observation obs) const;
  double total() const;
};

void validate(const PairModel& model);

// Joint of (pref, rel_i) with marginals gamma and beta_i. Preference implies
// relevance whenever beta_i >= gamma; otherwise the excess gamma - beta_i is
// placed on (pref, not rel); validate() notes this at debug level.
struct RelevanceJoint {
  double pref_rel = 0;
  double pref_norel = 0;
  double nopref_rel = 0;
  double nopref_norel = 0;
};
RelevanceJoint relevance_joint(double gamma, double beta);

// Prior P(pref, rel_i) factor of a state.
double relevance_prior(const PairModel& model, const HiddenState& s);

JointTable joint_table(const PairModel& model);

// Posterior over hidden states given an observation. Both-positive conditions
// on e_j = 1 (c_j > 0 implies examination); lower-zero uses the prior
// e_j ~ Bern(theta_j_minus); non-positive uses the pair prior. These equal the
// joint table conditioned on the same event whenever the table is valid, and
// stay defined for theta_j_minus > theta_j. Throws ZeroProbabilityError if the
// observation has zero probability.
StateDistribution posterior(const PairModel& model, Observation obs);

// P(c_i > c_j) by enumeration.
double prob_positive_pair(const PairModel& model);

struct PosteriorSummary {
  double ee_pref = 0;     // P(e_i=1, e_j=1, pref | obs)
  double ee_not_pref = 0; // P(e_i=1, e_j=1, not pref | obs)
  double e_only = 0;      // P(e_i=1, e_j=0 | obs)
  double rest = 0;        // P(e_i=0 | obs)
  double exam_i = 0;
  double exam_j = 0;
  double rel_i = 0;
  double pref = 0;
};

PosteriorSummary summarize(const StateDistribution& dist);

struct Draw {
  HiddenState state;
  Observation observation;
};

// One draw from the joint table.
Draw sample(const PairModel& model, std::mt19937_64& rng);

}  // namespace ultr::oracle

#endif  // ULTR_GENERATIVE_ORACLE_H_
