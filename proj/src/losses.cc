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

#include "ultr/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ultr/errors.h"
#include "ultr/nnrank.h"

namespace ultr {
namespace {

void check_list(const ListView& l) {
  if (l.scores.size() != l.labels.size() || l.scores.size() != l.positions.size()) {
    throw ValidationError("loss: scores, labels and positions differ in length");
  }
}

void check_refs(const ListView& l) {
  if (l.ref_scores.size() != l.scores.size() || l.ref_betas.size() != l.scores.size()) {
    throw ValidationError("loss: reference gamma/beta inputs missing");
  }
}

double discount(int rank, int k) {
  return rank <= k ? 1.0 / std::log2(1.0 + rank) : 0.0;
}

double ideal_dcg(std::span<const double> labels, int k) {
  std::vector<double> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double dcg = 0.0;
  for (std::size_t r = 0; r < sorted.size() && static_cast<int>(r) < k; ++r) {
    dcg += sorted[r] * discount(static_cast<int>(r + 1), k);
  }
  return dcg;
}

double delta_with_ideal(std::span<const double> labels, std::span<const int> ranks,
                        std::size_t i, std::size_t j, int k, double ideal) {
  if (!(ideal > 0)) return 0.0;
  return std::abs(labels[i] - labels[j]) *
         std::abs(discount(ranks[i], k) - discount(ranks[j], k)) / ideal;
}

}  // namespace

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kNaivePointwiseMse: return "naive_pointwise_mse";
    case LossVariant::kNaivePointwiseCe: return "naive_pointwise_ce";
    case LossVariant::kNaivePairwise: return "naive_pairwise";
    case LossVariant::kIpwPointwise: return "ipw_pointwise";
    case LossVariant::kIpwPairwise: return "ipw_pairwise";
    case LossVariant::kBayesIpw: return "bayes_ipw";
    case LossVariant::kOpt: return "opt";
  }
  return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (auto v : {LossVariant::kNaivePointwiseMse, LossVariant::kNaivePointwiseCe,
                 LossVariant::kNaivePairwise, LossVariant::kIpwPointwise,
                 LossVariant::kIpwPairwise, LossVariant::kBayesIpw, LossVariant::kOpt}) {
    if (to_string(v) == name) return v;
  }
  if (name == "naive_pointwise") return LossVariant::kNaivePointwiseMse;
  throw ValidationError("unknown loss variant '" + std::string(name) + "'");
}

bool is_pairwise(LossVariant v) {
  return v == LossVariant::kNaivePairwise || v == LossVariant::kIpwPairwise ||
         v == LossVariant::kBayesIpw || v == LossVariant::kOpt;
}

bool needs_bias_params(LossVariant v) {
  return v == LossVariant::kIpwPointwise || v == LossVariant::kIpwPairwise ||
         v == LossVariant::kBayesIpw || v == LossVariant::kOpt;
}

BaseLoss pairwise_base_loss(double s_i, double s_j) {
  const double d = s_i - s_j;
  // log1p(exp(-d)) without overflow for large |d|.
  const double loss = d > 0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d));
  const double g = -sigmoid(-d);
  return {loss, g, -g};
}

std::vector<int> ranks_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r + 1);
  return ranks;
}

double delta_ndcg(std::span<const double> labels, std::span<const int> ranks, std::size_t i,
                  std::size_t j, int k) {
  if (i >= labels.size() || j >= labels.size() || ranks.size() != labels.size()) {
    throw ValidationError("delta_ndcg: index out of range");
  }
  return delta_with_ideal(labels, ranks, i, j, k, ideal_dcg(labels, k));
}

double delta_ndcg(std::span<const double> scores, std::span<const double> labels,
                  std::size_t i, std::size_t j, int k) {
  if (scores.size() != labels.size()) throw ValidationError("delta_ndcg: length mismatch");
  const auto ranks = ranks_by_score(scores);
  return delta_ndcg(labels, ranks, i, j, k);
}

double lower_exam_posterior(const BiasParams& params, int pos_i, int pos_j, double gamma,
                            double beta, bool trust_bias) {
  const double ti = params.theta(pos_i);
  const double tjm = params.theta_minus(pos_j);
  const double s = trust_bias ? params.eps_plus(pos_i, pos_j) * gamma +
                                    params.eps_minus(pos_i, pos_j) * (1.0 - gamma)
                              : gamma;
  const double num = ti * tjm * s;
  const double den = num + ti * (1.0 - tjm) * beta;
  return den > 0 ? num / den : 0.0;
}

double trust_posterior(const BiasParams& params, int pos_i, int pos_j, double gamma) {
  const double a = params.eps_plus(pos_i, pos_j) * gamma;
  const double den = a + params.eps_minus(pos_i, pos_j) * (1.0 - gamma);
  return den > 0 ? a / den : 0.0;
}

double pair_weight(LossVariant variant, PairBucket bucket, const BiasParams& params,
                   int pos_i, int pos_j, double gamma, double beta, double abs_delta_z) {
  if (bucket == PairBucket::kNonPositive) {
    throw ValidationError("pair_weight: pair does not satisfy c_i > c_j");
  }
  const double inv = 1.0 / (params.theta(pos_i) * params.theta(pos_j));
  const bool lower = bucket == PairBucket::kLowerZero;
  switch (variant) {
    case LossVariant::kNaivePairwise:
      return 1.0;
    case LossVariant::kIpwPairwise:
      return inv * (lower ? lower_exam_posterior(params, pos_i, pos_j, gamma, beta, false) : 1.0);
    case LossVariant::kBayesIpw:
    case LossVariant::kOpt: {
      double w = inv * trust_posterior(params, pos_i, pos_j, gamma);
      if (lower) w *= lower_exam_posterior(params, pos_i, pos_j, gamma, beta, true);
      if (variant == LossVariant::kOpt) w *= abs_delta_z;
      return w;
    }
    default:
      throw ValidationError("pair_weight: '" + std::string(to_string(variant)) +
                            "' is not a pairwise loss");
  }
}

LossValue loss_naive_pointwise_mse(const ListView& l) {
  check_list(l);
  LossValue out{0.0, std::vector<double>(l.scores.size(), 0.0)};
  for (std::size_t k = 0; k < l.scores.size(); ++k) {
    const double r = l.scores[k] - l.labels[k];
    out.value += r * r;
    out.grad[k] = 2.0 * r;
  }
  return out;
}

LossValue loss_naive_pointwise_ce(const ListView& l) {
  check_list(l);
  LossValue out{0.0, std::vector<double>(l.scores.size(), 0.0)};
  for (std::size_t k = 0; k < l.scores.size(); ++k) {
    const double c = l.labels[k];
    if (c < 0 || c > 1) throw ValidationError("pointwise_ce needs labels in [0,1]");
    const double s = l.scores[k];
    // -[c log sig(s) + (1-c) log sig(-s)] = softplus(s) - c s
    const double softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    out.value += softplus - c * s;
    out.grad[k] = sigmoid(s) - c;
  }
  return out;
}

LossValue loss_naive_pairwise(const ListView& l) {
  LossOptions opts;
  opts.variant = LossVariant::kNaivePairwise;
  return loss_pairwise_weighted(l, BiasParams{}, opts);
}

LossValue loss_ipw_pointwise(const ListView& l, const BiasParams& params) {
  check_list(l);
  const std::size_t n = l.scores.size();
  LossValue out{0.0, std::vector<double>(n, 0.0)};
  double weight_sum = 0.0;
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double c = l.labels[k];
    if (c != 0.0 && c != 1.0) {
      throw ValidationError("ipw_pointwise needs binary click labels");
    }
    if (c > 0) {
      w[k] = 1.0 / params.theta(l.positions[k]);
      weight_sum += w[k];
    }
  }
  if (weight_sum == 0.0) return out;
  const double mx = *std::max_element(l.scores.begin(), l.scores.end());
  double z = 0.0;
  for (double s : l.scores) z += std::exp(s - mx);
  const double log_z = mx + std::log(z);
  for (std::size_t k = 0; k < n; ++k) {
    if (w[k] > 0) out.value += w[k] * (log_z - l.scores[k]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    out.grad[k] = weight_sum * std::exp(l.scores[k] - log_z) - w[k];
  }
  return out;
}

LossValue loss_pairwise_weighted(const ListView& l, const BiasParams& params,
                                 const LossOptions& opts) {
  check_list(l);
  const std::size_t n = l.scores.size();
  const bool trust = opts.variant != LossVariant::kNaivePairwise;
  if (trust) check_refs(l);
  LossValue out{0.0, std::vector<double>(n, 0.0)};

  std::vector<int> ranks;
  double ideal = 0.0;
  const bool want_dz = opts.variant == LossVariant::kOpt && !opts.unit_delta_z;
  if (want_dz) {
    if (opts.delta_z_order == DeltaZOrder::kModel) {
      ranks = ranks_by_score(l.scores);
    } else {
      ranks.assign(l.positions.begin(), l.positions.end());
    }
    ideal = ideal_dcg(l.labels, opts.ndcg_cutoff);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(l.labels[i] > l.labels[j])) continue;
      const auto bucket = bucket_of(l.labels[i], l.labels[j]);
      double w = 1.0;
      if (trust) {
        const double gamma = sigmoid(l.ref_scores[i] - l.ref_scores[j]);
        const double dz =
            want_dz ? delta_with_ideal(l.labels, ranks, i, j, opts.ndcg_cutoff, ideal) : 1.0;
        w = pair_weight(opts.variant, bucket, params, l.positions[i], l.positions[j], gamma,
                        l.ref_betas[i], dz);
      }
      if (w == 0.0) continue;
      const auto base = pairwise_base_loss(l.scores[i], l.scores[j]);
      out.value += w * base.loss;
      out.grad[i] += w * base.d_i;
      out.grad[j] += w * base.d_j;
    }
  }
  return out;
}

LossValue list_loss(const ListView& l, const BiasParams& params, const LossOptions& opts) {
  switch (opts.variant) {
    case LossVariant::kNaivePointwiseMse: return loss_naive_pointwise_mse(l);
    case LossVariant::kNaivePointwiseCe: return loss_naive_pointwise_ce(l);
    case LossVariant::kNaivePairwise: return loss_naive_pairwise(l);
    case LossVariant::kIpwPointwise: return loss_ipw_pointwise(l, params);
    default: return loss_pairwise_weighted(l, params, opts);
  }
}

}  // namespace ultr
