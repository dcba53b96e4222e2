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

#ifndef ULTR_EM_ESTIMATOR_H_
#define ULTR_EM_ESTIMATOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ultr/bias_params.h"
#include "ultr/letor_io.h"
#include "ultr/nnrank.h"
#include "ultr/simulate.h"

namespace ultr {

enum class PairBucket { kBothPositive, kLowerZero, kNonPositive };

std::string_view to_string(PairBucket b);
PairBucket bucket_of(double c_i, double c_j);

// Feature spans point into a Dataset (or other storage) that must outlive
// the observation.
struct PairObservation {
  std::size_t session = 0;  // index into the session list the pair came from
  int pos_i = 1;
  int pos_j = 2;
  std::span<const double> feat_i;
  std::span<const double> feat_j;
  double c_i = 0;
  double c_j = 0;
  PairBucket bucket = PairBucket::kNonPositive;
};

// A displayed list joined with its features and synthesized labels.
struct EmSession {
  std::string qid;
  std::vector<std::span<const double>> features;
  std::vector<std::size_t> doc_index;
  std::vector<double> labels;
};

std::vector<EmSession> join_sessions(std::span<const Session> sessions,
                                     const Dataset& dataset, LabelChannel channel);

// All ordered position pairs (i, j), i != j.
std::vector<PairObservation> extract_pairs(const EmSession& session,
                                           std::size_t session_index = 0);
std::vector<PairObservation> extract_pairs(std::span<const EmSession> sessions);

struct PairPosterior {
  double p_ee_rpos = 0;
  double p_ee_rneg = 0;
  double p_e_only = 0;
  double p_rest = 0;
  double p_exam_i = 0;
  double p_exam_j = 0;
  double p_rel_i = 0;  // P(r_i > 0 | obs)
  double p_pref = 0;   // P(r_i > r_j | obs)
};

// Closed-form posterior for one pair given gamma = P(r_i > r_j) and
// beta = P(r_i > 0).
PairPosterior e_step(int pos_i, int pos_j, PairBucket bucket, const BiasParams& params,
                     double gamma, double beta);
PairPosterior e_step(const PairObservation& obs, const BiasParams& params,
                     const Ranker& ranker);

// P(obs) under the pairwise model; the quantity EM maximises.
double pair_likelihood(int pos_i, int pos_j, PairBucket bucket, const BiasParams& params,
                       double gamma, double beta);

struct PairHeads {
  std::vector<double> gamma;
  std::vector<double> beta;
};

// Scores each distinct item once and reads gamma/beta per pair.
PairHeads evaluate_heads(std::span<const PairObservation> pairs, const Ranker& ranker);

double observed_loglik(std::span<const PairObservation> pairs, const BiasParams& params,
                       const PairHeads& heads);

// Sufficient statistics of the position update. Empty cells keep `params`.
BiasParams estimate_positions(std::span<const PairObservation> pairs,
                              std::span<const PairPosterior> posteriors,
                              const BiasParams& params);

// Estimate followed by blend(params, estimate, alpha) and projection.
BiasParams m_step_positions(std::span<const PairObservation> pairs,
                            std::span<const PairPosterior> posteriors,
                            const BiasParams& params, double alpha,
                            double floor = kDefaultFloor);

// One SGD step on cross-entropy of gamma/beta against Bernoulli targets drawn
// from the posteriors. Returns the mean loss before the step. With
// `beta_only` the step touches nothing but the beta head layer, so scores and
// therefore gamma stay fixed.
double m_step_regression(std::span<const PairObservation> pairs,
                         std::span<const PairPosterior> posteriors, Ranker& ranker,
                         double head_lr, std::mt19937_64& rng, bool beta_only = false);

struct EmConfig {
  double alpha0 = 0.2;
  double alpha_decay_batches = 100.0;  // 0 keeps alpha constant
  std::size_t batch_size = 4096;       // pairs per mini-batch; 0 = full batch
  int epochs = 20;
  double head_lr = 0.05;
  int head_steps = 1;                  // regression SGD steps per mini-batch
  bool update_heads = true;
  bool freeze_gamma = false;           // regression step trains the beta head only
  bool interleaved = false;
  double tolerance = 1e-5;
  double floor = kDefaultFloor;
  std::uint64_t seed = 0;
};

void validate(const EmConfig& cfg);

double alpha_at(const EmConfig& cfg, std::size_t batch_counter);

struct TraceRow {
  int epoch = 0;
  std::size_t batch = 0;
  std::string param;
  int i = 0;
  int j = 0;
  double value = 0;
};

struct EmResult {
  BiasParams params;
  Ranker ranker;
  std::vector<TraceRow> trace;
  std::vector<double> epoch_loglik;  // mean observed log-likelihood per epoch
  int epochs_run = 0;
  bool converged = false;
};

// Called after every epoch when cfg.interleaved is set.
using EpochHook = std::function<void(int epoch, const BiasParams&, Ranker&)>;

EmResult run_em(std::span<const PairObservation> pairs, const EmConfig& cfg,
                const BiasParams& init, const Ranker& ranker, const EpochHook& hook = {});

void write_trace(std::ostream& out, std::span<const TraceRow> trace,
                 std::string_view config_hash = {});

}  // namespace ultr

#endif  // ULTR_EM_ESTIMATOR_H_
