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

#include "ultr/em_estimator.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "ultr/errors.h"
#include "ultr/text_format.h"

namespace ultr {
namespace {

constexpr double kLogFloor = 1e-300;

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void check_positions(int pos_i, int pos_j, const BiasParams& params) {
  const int n = static_cast<int>(params.size());
  if (pos_i < 1 || pos_j < 1 || pos_i > n || pos_j > n || pos_i == pos_j) {
    throw ValidationError("pair positions (" + std::to_string(pos_i) + "," +
                          std::to_string(pos_j) + ") invalid for " + std::to_string(n) +
                          " positions");
  }
}

// Mass of (pref, rel_i) under the coupling that keeps both marginals exact.
struct Relevance {
  double g, b, u;  // gamma, beta, P(pref and rel_i)
};

Relevance coupling(double gamma, double beta) { return {gamma, beta, std::min(gamma, beta)}; }

// Maps each distinct feature row to one batch row.
struct ItemIndex {
  std::vector<std::span<const double>> rows;
  std::vector<std::size_t> slot_i, slot_j;
};

ItemIndex index_items(std::span<const PairObservation> pairs) {
  ItemIndex idx;
  std::unordered_map<const double*, std::size_t> seen;
  seen.reserve(pairs.size());
  auto lookup = [&](std::span<const double> f) {
    auto [it, inserted] = seen.try_emplace(f.data(), idx.rows.size());
    if (inserted) idx.rows.push_back(f);
    return it->second;
  };
  idx.slot_i.reserve(pairs.size());
  idx.slot_j.reserve(pairs.size());
  for (const auto& p : pairs) {
    idx.slot_i.push_back(lookup(p.feat_i));
    idx.slot_j.push_back(lookup(p.feat_j));
  }
  return idx;
}

}  // namespace

std::string_view to_string(PairBucket b) {
  switch (b) {
    case PairBucket::kBothPositive: return "both_positive";
    case PairBucket::kLowerZero: return "lower_zero";
    case PairBucket::kNonPositive: return "non_positive";
  }
  return "?";
}

PairBucket bucket_of(double c_i, double c_j) {
  if (!(c_i > c_j)) return PairBucket::kNonPositive;
  return c_j > 0 ? PairBucket::kBothPositive : PairBucket::kLowerZero;
}

std::vector<EmSession> join_sessions(std::span<const Session> sessions,
                                     const Dataset& dataset, LabelChannel channel) {
  std::unordered_map<std::string_view, const Query*> by_qid;
  for (const auto& q : dataset.queries) by_qid.emplace(q.qid, &q);
  std::vector<EmSession> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    auto it = by_qid.find(s.qid);
    if (it == by_qid.end()) {
      throw ValidationError("session refers to unknown qid '" + s.qid + "'");
    }
    const Query& q = *it->second;
    EmSession e;
    e.qid = s.qid;
    e.labels = session_labels(s, channel);
    for (std::size_t d : s.ranked_docs) {
      if (d >= q.documents.size()) {
        throw ValidationError("session doc_index out of range for qid '" + s.qid + "'");
      }
      e.features.emplace_back(q.documents[d].features);
      e.doc_index.push_back(d);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<PairObservation> extract_pairs(const EmSession& session,
                                           std::size_t session_index) {
  const std::size_t n = session.labels.size();
  std::vector<PairObservation> out;
  out.reserve(n * (n > 0 ? n - 1 : 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      PairObservation p;
      p.session = session_index;
      p.pos_i = static_cast<int>(i + 1);
      p.pos_j = static_cast<int>(j + 1);
      p.feat_i = session.features[i];
      p.feat_j = session.features[j];
      p.c_i = session.labels[i];
      p.c_j = session.labels[j];
      p.bucket = bucket_of(p.c_i, p.c_j);
      out.push_back(p);
    }
  }
  return out;
}

std::vector<PairObservation> extract_pairs(std::span<const EmSession> sessions) {
  std::vector<PairObservation> out;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    auto part = extract_pairs(sessions[s], s);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

PairPosterior e_step(int pos_i, int pos_j, PairBucket bucket, const BiasParams& params,
                     double gamma, double beta) {
  check_positions(pos_i, pos_j, params);
  const double ti = params.theta(pos_i);
  const double tj = params.theta(pos_j);
  const double tjm = params.theta_minus(pos_j);
  const double ep = params.eps_plus(pos_i, pos_j);
  const double em = params.eps_minus(pos_i, pos_j);
  const auto [g, b, u] = coupling(gamma, beta);
  const double s = ep * g + em * (1.0 - g);

  PairPosterior out;
  switch (bucket) {
    case PairBucket::kBothPositive: {
      if (!(s > 0)) throw ZeroProbabilityError(pos_i, pos_j, "both_positive has zero mass");
      const double m = ep * g / s;
      out.p_ee_rpos = m;
      out.p_ee_rneg = 1.0 - m;
      out.p_exam_i = out.p_exam_j = 1.0;
      out.p_rel_i = (ep * u + em * (b - u)) / s;
      out.p_pref = m;
      break;
    }
    case PairBucket::kLowerZero: {
      const double ee = ti * tjm;
      const double eo = ti * (1.0 - tjm);
      const double d = ee * s + eo * b;
      if (!(d > 0)) throw ZeroProbabilityError(pos_i, pos_j, "lower_zero has zero mass");
      out.p_ee_rpos = ee * g * ep / d;
      out.p_ee_rneg = ee * (1.0 - g) * em / d;
      out.p_e_only = eo * b / d;
      out.p_exam_i = 1.0;
      out.p_exam_j = ee * s / d;
      out.p_rel_i = (ee * (ep * u + em * (b - u)) + eo * b) / d;
      out.p_pref = (ee * g * ep + eo * u) / d;
      break;
    }
    case PairBucket::kNonPositive: {
      const double ee = ti * tj;
      const double eo = ti * (1.0 - tj);
      const double d = 1.0 - ee * s - eo * b;
      if (!(d > 0)) throw ZeroProbabilityError(pos_i, pos_j, "non_positive has zero mass");
      out.p_ee_rpos = ee * g * (1.0 - ep) / d;
      out.p_ee_rneg = ee * (1.0 - g) * (1.0 - em) / d;
      out.p_e_only = eo * (1.0 - b) / d;
      out.p_rest = (1.0 - ti) / d;
      out.p_exam_i = out.p_ee_rpos + out.p_ee_rneg + out.p_e_only;
      out.p_exam_j = out.p_ee_rpos + out.p_ee_rneg + (1.0 - ti) * tj / d;
      out.p_rel_i =
          (ee * ((1.0 - ep) * u + (1.0 - em) * (b - u)) + (1.0 - ti) * b) / d;
      out.p_pref = (ee * g * (1.0 - ep) + eo * (g - u) + (1.0 - ti) * g) / d;
      break;
    }
  }
  return out;
}

PairPosterior e_step(const PairObservation& obs, const BiasParams& params,
                     const Ranker& ranker) {
  const double gamma = ranker.gamma(obs.feat_i, obs.feat_j);
  const double beta = ranker.beta(obs.feat_i);
  return e_step(obs.pos_i, obs.pos_j, obs.bucket, params, gamma, beta);
}

double pair_likelihood(int pos_i, int pos_j, PairBucket bucket, const BiasParams& params,
                       double gamma, double beta) {
  check_positions(pos_i, pos_j, params);
  const double ti = params.theta(pos_i);
  const double tj = params.theta(pos_j);
  const double tjm = params.theta_minus(pos_j);
  const double ep = params.eps_plus(pos_i, pos_j);
  const double em = params.eps_minus(pos_i, pos_j);
  const double g = gamma, b = beta;
  const double s = ep * g + em * (1.0 - g);
  // Share of examined, ordered pairs whose lower label is zero.
  const double rho = tjm * (1.0 - tj) / (tj * (1.0 - tjm));
  switch (bucket) {
    case PairBucket::kBothPositive: return ti * tj * s * (1.0 - rho);
    case PairBucket::kLowerZero: return ti * tj * s * rho + ti * (1.0 - tj) * b;
    case PairBucket::kNonPositive: return 1.0 - ti * tj * s - ti * (1.0 - tj) * b;
  }
  return 0.0;
}

PairHeads evaluate_heads(std::span<const PairObservation> pairs, const Ranker& ranker) {
  PairHeads heads;
  heads.gamma.resize(pairs.size());
  heads.beta.resize(pairs.size());
  if (pairs.empty()) return heads;
  const auto idx = index_items(pairs);
  const auto batch = stack_rows(idx.rows, ranker.spec().input_dim);
  const auto rec = ranker.forward(batch);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    heads.gamma[k] = sigmoid(rec.score(idx.slot_i[k]) - rec.score(idx.slot_j[k]));
    heads.beta[k] = sigmoid(rec.beta_logit(idx.slot_i[k]));
  }
  return heads;
}

double observed_loglik(std::span<const PairObservation> pairs, const BiasParams& params,
                       const PairHeads& heads) {
  double total = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const double l =
        pair_likelihood(p.pos_i, p.pos_j, p.bucket, params, heads.gamma[k], heads.beta[k]);
    total += std::log(std::max(l, kLogFloor));
  }
  return total;
}

BiasParams estimate_positions(std::span<const PairObservation> pairs,
                              std::span<const PairPosterior> posteriors,
                              const BiasParams& params) {
  if (pairs.size() != posteriors.size()) {
    throw ValidationError("m_step: pairs and posteriors differ in length");
  }
  const std::size_t n = params.size();
  std::vector<double> exam_sum(n, 0.0), exam_cnt(n, 0.0);
  std::vector<double> both_cnt(n, 0.0), h_sum(n, 0.0);
  std::vector<double> rpos_ord(n * n, 0.0), rpos_all(n * n, 0.0);
  std::vector<double> rneg_ord(n * n, 0.0), rneg_all(n * n, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const auto& post = posteriors[k];
    check_positions(p.pos_i, p.pos_j, params);
    const std::size_t i = p.pos_i - 1, j = p.pos_j - 1, cell = i * n + j;
    exam_sum[i] += post.p_exam_i;
    exam_cnt[i] += 1.0;
    exam_sum[j] += post.p_exam_j;
    exam_cnt[j] += 1.0;
    rpos_all[cell] += post.p_ee_rpos;
    rneg_all[cell] += post.p_ee_rneg;
    if (p.bucket != PairBucket::kNonPositive) {
      rpos_ord[cell] += post.p_ee_rpos;
      rneg_ord[cell] += post.p_ee_rneg;
    }
    if (p.bucket == PairBucket::kBothPositive) both_cnt[j] += 1.0;
    if (p.bucket == PairBucket::kLowerZero) h_sum[j] += post.p_exam_j;
  }

  BiasParams est = params;
  for (std::size_t i = 0; i < n; ++i) {
    const int pos = static_cast<int>(i + 1);
    if (exam_cnt[i] > 0) est.theta(pos) = exam_sum[i] / exam_cnt[i];
    // theta_minus follows from rho = P(c_j = 0 | examined ordered pair).
    const double denom = both_cnt[i] + h_sum[i];
    if (denom > 0) {
      const double rho = h_sum[i] / denom;
      const double t = est.theta(pos);
      const double z = t * rho + (1.0 - t);
      if (z > 0) est.theta_minus(pos) = t * rho / z;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::size_t cell = i * n + j;
      const int pj = static_cast<int>(j + 1);
      if (rpos_all[cell] > 0) est.eps_plus(pos, pj) = rpos_ord[cell] / rpos_all[cell];
      if (rneg_all[cell] > 0) est.eps_minus(pos, pj) = rneg_ord[cell] / rneg_all[cell];
    }
  }
  return est;
}

BiasParams m_step_positions(std::span<const PairObservation> pairs,
                            std::span<const PairPosterior> posteriors,
                            const BiasParams& params, double alpha, double floor) {
  return blend(params, estimate_positions(pairs, posteriors, params), alpha, floor);
}

double m_step_regression(std::span<const PairObservation> pairs,
                         std::span<const PairPosterior> posteriors, Ranker& ranker,
                         double head_lr, std::mt19937_64& rng, bool beta_only) {
  if (pairs.size() != posteriors.size()) {
    throw ValidationError("m_step_regression: pairs and posteriors differ in length");
  }
  if (pairs.empty()) return 0.0;
  const auto idx = index_items(pairs);
  const auto batch = stack_rows(idx.rows, ranker.spec().input_dim);
  const auto rec = ranker.forward(batch);
  std::vector<double> d_score(idx.rows.size(), 0.0), d_beta(idx.rows.size(), 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double t_pref = unif(rng) < posteriors[k].p_pref ? 1.0 : 0.0;
    const double t_rel = unif(rng) < posteriors[k].p_rel_i ? 1.0 : 0.0;
    const std::size_t a = idx.slot_i[k], b = idx.slot_j[k];
    const double diff = rec.score(a) - rec.score(b);
    const double logit = rec.beta_logit(a);
    loss -= t_pref * log_sigmoid(diff) + (1.0 - t_pref) * log_sigmoid(-diff);
    loss -= t_rel * log_sigmoid(logit) + (1.0 - t_rel) * log_sigmoid(-logit);
    const double g = (sigmoid(diff) - t_pref) * scale;
    d_score[a] += g;
    d_score[b] -= g;
    d_beta[a] += (sigmoid(logit) - t_rel) * scale;
  }
  loss *= scale;
  if (!std::isfinite(loss)) throw NumericError("m_step_regression: non-finite loss");
  auto grads = ranker.backprop(rec, d_score, d_beta);
  if (beta_only) {
    const auto& head = ranker.beta_head();
    auto& g = grads.values;
    std::fill(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(head.weight_offset), 0.0);
    std::fill(g.begin() + static_cast<std::ptrdiff_t>(head.bias_offset + 1), g.end(), 0.0);
  }
  ranker.sgd_step(grads, head_lr);
  return loss;
}

void validate(const EmConfig& cfg) {
  if (!(cfg.alpha0 > 0 && cfg.alpha0 <= 1)) throw ValidationError("em: alpha0 must lie in (0,1]");
  if (!(cfg.alpha_decay_batches >= 0)) throw ValidationError("em: alpha decay must be >= 0");
  if (cfg.epochs < 0) throw ValidationError("em: epochs must be >= 0");
  if (!(cfg.head_lr >= 0)) throw ValidationError("em: head_lr must be >= 0");
  if (cfg.head_steps < 1) throw ValidationError("em: head_steps must be >= 1");
  if (!(cfg.tolerance >= 0)) throw ValidationError("em: tolerance must be >= 0");
  if (!(cfg.floor > 0 && cfg.floor < 0.25)) throw ValidationError("em: floor must lie in (0,0.25)");
}

double alpha_at(const EmConfig& cfg, std::size_t t) {
  if (cfg.alpha_decay_batches <= 0) return cfg.alpha0;
  return cfg.alpha0 / (1.0 + static_cast<double>(t) / cfg.alpha_decay_batches);
}

namespace {

void trace_params(std::vector<TraceRow>& trace, int epoch, std::size_t batch,
                  const BiasParams& p) {
  const int n = static_cast<int>(p.size());
  for (int i = 1; i <= n; ++i) trace.push_back({epoch, batch, "theta", i, 0, p.theta(i)});
  for (int i = 1; i <= n; ++i) {
    trace.push_back({epoch, batch, "theta_minus", i, 0, p.theta_minus(i)});
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i != j) trace.push_back({epoch, batch, "eps_plus", i, j, p.eps_plus(i, j)});
    }
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      if (i != j) trace.push_back({epoch, batch, "eps_minus", i, j, p.eps_minus(i, j)});
    }
  }
}

}  // namespace

EmResult run_em(std::span<const PairObservation> pairs, const EmConfig& cfg,
                const BiasParams& init, const Ranker& ranker, const EpochHook& hook) {
  validate(cfg);
  EmResult res{init, ranker, {}, {}, 0, false};
  if (cfg.epochs == 0) return res;
  if (pairs.empty()) throw EmptyDatasetError("run_em: no pairs");
  res.params = project(init, cfg.floor);

  std::mt19937_64 rng(cfg.seed);
  // Pairs of one session stay adjacent so a batch scores few distinct items;
  // shuffling happens at session granularity.
  std::vector<std::vector<std::size_t>> groups;
  {
    std::unordered_map<std::size_t, std::size_t> slot;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      auto [it, inserted] = slot.try_emplace(pairs[k].session, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(k);
    }
  }
  std::vector<std::size_t> order;
  order.reserve(pairs.size());
  auto flatten = [&] {
    order.clear();
    for (const auto& g : groups) order.insert(order.end(), g.begin(), g.end());
  };
  flatten();
  const bool full = cfg.batch_size == 0 || cfg.batch_size >= pairs.size();
  const std::size_t bs = full ? pairs.size() : cfg.batch_size;
  trace_params(res.trace, 0, 0, res.params);

  std::size_t counter = 0;
  std::vector<PairObservation> batch;
  std::vector<PairPosterior> post;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const BiasParams start = res.params;
    if (!full) {
      std::shuffle(groups.begin(), groups.end(), rng);
      flatten();
    }
    double ll_total = 0.0;
    std::size_t b = 0;
    for (std::size_t lo = 0; lo < pairs.size(); lo += bs, ++b) {
      const std::size_t hi = std::min(pairs.size(), lo + bs);
      batch.clear();
      for (std::size_t k = lo; k < hi; ++k) batch.push_back(pairs[order[k]]);
      const auto heads = evaluate_heads(batch, res.ranker);
      post.resize(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& p = batch[k];
        post[k] = e_step(p.pos_i, p.pos_j, p.bucket, res.params, heads.gamma[k],
                         heads.beta[k]);
      }
      const double ll = observed_loglik(batch, res.params, heads);
      ll_total += ll;
      res.trace.push_back({epoch, b, "loglik", 0, 0, ll / static_cast<double>(batch.size())});

      res.params = m_step_positions(batch, post, res.params, alpha_at(cfg, counter), cfg.floor);
      if (cfg.update_heads) {
        for (int s = 0; s < cfg.head_steps; ++s) {
          m_step_regression(batch, post, res.ranker, cfg.head_lr, rng, cfg.freeze_gamma);
        }
      }
      ++counter;
    }
    const double mean_ll = ll_total / static_cast<double>(pairs.size());
    res.epoch_loglik.push_back(mean_ll);
    res.trace.push_back({epoch, b, "epoch_loglik", 0, 0, mean_ll});
    trace_params(res.trace, epoch, b, res.params);
    res.epochs_run = epoch;
    if (cfg.interleaved && hook) hook(epoch, res.params, res.ranker);
    if (cfg.tolerance > 0 && max_abs_difference(start, res.params) < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void write_trace(std::ostream& out, std::span<const TraceRow> trace,
                 std::string_view config_hash) {
  if (!config_hash.empty()) out << "# config_hash " << config_hash << '\n';
  out << "# epoch\tbatch\tparam\ti\tj\tvalue\n";
  for (const auto& r : trace) {
    out << r.epoch << '\t' << r.batch << '\t' << r.param << '\t' << r.i << '\t' << r.j
        << '\t' << format_double(r.value) << '\n';
  }
}

}  // namespace ultr
