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

#include "ultr/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ultr/errors.h"
#include "ultr/log.h"
#include "ultr/metrics.h"

namespace ultr {
namespace {

constexpr int kValidCutoff = 5;

void score_lists(std::span<TrainingList> lists, const Ranker& ranker) {
  std::vector<std::span<const double>> rows;
  for (const auto& l : lists) rows.insert(rows.end(), l.features.begin(), l.features.end());
  if (rows.empty()) return;
  const auto rec = ranker.forward(stack_rows(rows, ranker.spec().input_dim));
  std::size_t r = 0;
  for (auto& l : lists) {
    l.ref_scores.resize(l.features.size());
    l.ref_betas.resize(l.features.size());
    for (std::size_t k = 0; k < l.features.size(); ++k, ++r) {
      l.ref_scores[k] = rec.score(r);
      l.ref_betas[k] = sigmoid(rec.beta_logit(r));
    }
  }
}

}  // namespace

std::string_view to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "sgd";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return Optimizer::kAdam;
  if (name == "sgd") return Optimizer::kSgd;
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

AdamState::AdamState(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamState::step(Ranker& ranker, const Gradients& grads, double lr) {
  if (grads.values.size() != m_.size()) throw StateError("adam: gradient size mismatch");
  for (double g : grads.values) {
    if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto params = ranker.mutable_parameters();
  for (std::size_t k = 0; k < m_.size(); ++k) {
    const double g = grads.values[k];
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g * g;
    params[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
  }
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kRelevanceUpperBound: return "relevance_upper_bound";
    case LabelSource::kClickCategorical: return "click_categorical";
    case LabelSource::kSynthesizedContinuous: return "synthesized_continuous";
  }
  return "?";
}

LabelSource parse_label_source(std::string_view name) {
  for (auto s : {LabelSource::kRelevanceUpperBound, LabelSource::kClickCategorical,
                 LabelSource::kSynthesizedContinuous}) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown label source '" + std::string(name) + "'");
}

void check_compatible(LossVariant variant, LabelSource source) {
  if (source == LabelSource::kRelevanceUpperBound && needs_bias_params(variant)) {
    throw ValidationError("label source relevance_upper_bound is incompatible with loss '" +
                          std::string(to_string(variant)) + "' (no bias to correct)");
  }
  if (variant == LossVariant::kIpwPointwise && source != LabelSource::kClickCategorical) {
    throw ValidationError("loss ipw_pointwise requires categorical click labels");
  }
  if (variant == LossVariant::kNaivePointwiseCe && source != LabelSource::kClickCategorical) {
    throw ValidationError("loss naive_pointwise_ce requires categorical click labels");
  }
}

std::vector<TrainingList> lists_from_grades(const Dataset& dataset) {
  std::vector<TrainingList> out;
  out.reserve(dataset.queries.size());
  for (const auto& q : dataset.queries) {
    TrainingList l;
    for (std::size_t d = 0; d < q.documents.size(); ++d) {
      l.features.emplace_back(q.documents[d].features);
      l.labels.push_back(q.documents[d].relevance);
      l.positions.push_back(static_cast<int>(d + 1));
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<TrainingList> lists_from_sessions(std::span<const EmSession> sessions) {
  std::vector<TrainingList> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    TrainingList l;
    l.features = s.features;
    l.labels = s.labels;
    for (std::size_t k = 0; k < s.labels.size(); ++k) l.positions.push_back(static_cast<int>(k + 1));
    out.push_back(std::move(l));
  }
  return out;
}

void attach_reference(std::vector<TrainingList>& lists, const Ranker& reference) {
  constexpr std::size_t kChunk = 256;
  for (std::size_t lo = 0; lo < lists.size(); lo += kChunk) {
    const std::size_t hi = std::min(lists.size(), lo + kChunk);
    score_lists(std::span(lists).subspan(lo, hi - lo), reference);
  }
}

void validate(const TrainerConfig& cfg) {
  if (!(cfg.lr > 0)) throw ValidationError("train: lr must be > 0");
  if (cfg.batch_lists < 1) throw ValidationError("train: batch size must be >= 1");
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (cfg.patience < 1) throw ValidationError("train: patience must be >= 1");
  if (cfg.loss.ndcg_cutoff < 1) throw ValidationError("train: ndcg cutoff must be >= 1");
}

TrainResult train_ranker(std::vector<TrainingList> lists, const BiasParams& params,
                         const Ranker& init, const TrainerConfig& cfg, const Dataset* valid) {
  validate(cfg);
  TrainResult res{init, {}, {}, 0, 0};
  if (lists.empty()) throw EmptyDatasetError("train: no training lists");
  const bool trust = needs_bias_params(cfg.loss.variant) &&
                     cfg.loss.variant != LossVariant::kIpwPointwise;
  if (trust && !cfg.self_reference) {
    for (const auto& l : lists) {
      if (l.ref_scores.size() != l.features.size()) {
        throw StateError("train: reference gamma/beta not attached");
      }
    }
  }

  Ranker& model = res.ranker;
  Ranker best = model;
  double best_ndcg = -1.0;
  int stale = 0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(lists.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::span<const double>> rows;
  std::vector<double> d_score, zeros;
  AdamState adam(model.num_parameters());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_lists) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_lists);
      rows.clear();
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& f = lists[order[k]].features;
        rows.insert(rows.end(), f.begin(), f.end());
      }
      const auto rec = model.forward(stack_rows(rows, model.spec().input_dim));
      d_score.assign(rows.size(), 0.0);
      zeros.assign(rows.size(), 0.0);
      std::size_t offset = 0;
      const double scale = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t k = lo; k < hi; ++k) {
        auto& l = lists[order[k]];
        const std::size_t n = l.features.size();
        const std::span<const double> scores(rec.score.data() + offset, n);
        if (trust && cfg.self_reference) {
          l.ref_scores.assign(scores.begin(), scores.end());
          l.ref_betas.resize(n);
          for (std::size_t t = 0; t < n; ++t) l.ref_betas[t] = sigmoid(rec.beta_logit(offset + t));
        }
        const ListView view{scores, l.labels, l.positions, l.ref_scores, l.ref_betas};
        const auto lv = list_loss(view, params, cfg.loss);
        epoch_loss += lv.value;
        for (std::size_t t = 0; t < n; ++t) d_score[offset + t] = lv.grad[t] * scale;
        offset += n;
      }
      auto grads = model.backprop(rec, d_score, zeros);
      if (cfg.optimizer == Optimizer::kAdam) {
        adam.step(model, grads, cfg.lr);
      } else {
        model.sgd_step(grads, cfg.lr, cfg.clip);
      }
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(lists.size()));
    res.epochs_run = epoch;
    if (valid == nullptr) continue;
    const int cut[] = {kValidCutoff};
    const double v = evaluate(model, *valid, cut).ndcg_at.at(kValidCutoff);
    res.valid_ndcg.push_back(v);
    log::debug("train epoch " + std::to_string(epoch) + " valid ndcg@5 " + std::to_string(v));
    if (v > best_ndcg) {
      best_ndcg = v;
      best = model;
      res.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (valid != nullptr && res.best_epoch > 0) model = best;
  return res;
}

}  // namespace ultr
