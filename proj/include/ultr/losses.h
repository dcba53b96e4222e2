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

#ifndef ULTR_LOSSES_H_
#define ULTR_LOSSES_H_

#include <span>
#include <string_view>
#include <vector>

#include "ultr/bias_params.h"
#include "ultr/em_estimator.h"

namespace ultr {

enum class LossVariant {
  kNaivePointwiseMse,
  kNaivePointwiseCe,
  kNaivePairwise,
  kIpwPointwise,
  kIpwPairwise,
  kBayesIpw,
  kOpt,
};

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);
bool is_pairwise(LossVariant v);
bool needs_bias_params(LossVariant v);

struct BaseLoss {
  double loss = 0;
  double d_i = 0;
  double d_j = 0;
};

// log(1 + exp(-(s_i - s_j))) for a pair where i should rank above j.
BaseLoss pairwise_base_loss(double score_i, double score_j);

// One displayed list. ref_scores/ref_betas come from a frozen reference
// scorer: gamma_ij = sigmoid(ref_i - ref_j), beta_i = ref_betas[i]. They are
// only read by the trust-bias variants.
struct ListView {
  std::span<const double> scores;
  std::span<const double> labels;
  std::span<const int> positions;
  std::span<const double> ref_scores;
  std::span<const double> ref_betas;
};

enum class DeltaZOrder { kModel, kLogged };

struct LossOptions {
  LossVariant variant = LossVariant::kOpt;
  int ndcg_cutoff = 10;
  DeltaZOrder delta_z_order = DeltaZOrder::kModel;
  bool unit_delta_z = false;  // replaces |dZ| with 1
};

struct LossValue {
  double value = 0;
  std::vector<double> grad;  // d value / d scores
};

// Ranks (1-based) of items sorted by descending score, ties by index.
std::vector<int> ranks_by_score(std::span<const double> scores);

// |dZ_ij| with gain c and the truncated log discount, on the given ranks.
double delta_ndcg(std::span<const double> labels, std::span<const int> ranks, std::size_t i,
                  std::size_t j, int k);
double delta_ndcg(std::span<const double> scores, std::span<const double> labels,
                  std::size_t i, std::size_t j, int k);

// Eq.-17-style lower-item examination posterior, optionally without trust bias.
double lower_exam_posterior(const BiasParams& params, int pos_i, int pos_j, double gamma,
                            double beta, bool trust_bias);
double trust_posterior(const BiasParams& params, int pos_i, int pos_j, double gamma);

// Constant weight attached to L_ij for a c_i > c_j pair. Throws on non-positive
// pairs and on naive/pointwise variants.
double pair_weight(LossVariant variant, PairBucket bucket, const BiasParams& params,
                   int pos_i, int pos_j, double gamma, double beta, double abs_delta_z);

LossValue loss_naive_pointwise_mse(const ListView& list);
LossValue loss_naive_pointwise_ce(const ListView& list);
LossValue loss_naive_pairwise(const ListView& list);
LossValue loss_ipw_pointwise(const ListView& list, const BiasParams& params);
LossValue loss_pairwise_weighted(const ListView& list, const BiasParams& params,
                                 const LossOptions& opts);

LossValue list_loss(const ListView& list, const BiasParams& params, const LossOptions& opts);

}  // namespace ultr

#endif  // ULTR_LOSSES_H_
