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

#include "ultr/simulate.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "ultr/errors.h"
#include "ultr/hashing.h"
#include "ultr/text_format.h"

namespace ultr {

void validate(const SimConfig& cfg) {
  if (!(cfg.eta >= 0)) throw ValidationError("sim: eta must be >= 0");
  if (!(cfg.noise_eps >= 0 && cfg.noise_eps < 1)) {
    throw ValidationError("sim: noise must lie in [0,1)");
  }
  if (cfg.list_size < 2) throw ValidationError("sim: list_size must be >= 2");
  if (cfg.sessions_per_query < 1) {
    throw ValidationError("sim: sessions_per_query must be >= 1");
  }
  if (cfg.combine.weights.size() != kNumActionChannels) {
    throw ValidationError("sim: combine needs one weight per action channel");
  }
}

double click_propensity(int position, double eta) {
  if (position < 1) throw ValidationError("click_propensity: position must be >= 1");
  return std::pow(1.0 / position, eta);
}

double click_relevance_prob(int grade, double noise_eps) {
  if (grade < 0 || grade > kMaxGrade) {
    throw ValidationError("click_relevance_prob: grade outside [0,4]");
  }
  const double max_gain = std::exp2(kMaxGrade) - 1.0;
  return noise_eps + (1.0 - noise_eps) * (std::exp2(grade) - 1.0) / max_gain;
}

double dwell_position_mean(int position) { return 2.0 / std::sqrt(position + 2.0); }
double dwell_position_sd(int position) { return 0.4 / std::sqrt(position + 2.0); }
double dwell_relevance_mean(int grade, double noise_eps) {
  return noise_eps + (1.0 - noise_eps) * grade;
}
double dwell_relevance_sd(int grade, double noise_eps) {
  return (std::sqrt(static_cast<double>(grade)) + noise_eps) / (kMaxGrade + 2.0);
}

double sample_dwell_position(int position, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(dwell_position_mean(position),
                                        dwell_position_sd(position));
  return dist(rng);
}

double sample_dwell_relevance(int grade, double noise_eps, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(dwell_relevance_mean(grade, noise_eps),
                                        dwell_relevance_sd(grade, noise_eps));
  return dist(rng);
}

std::vector<double> combine(std::span<const int> clicks, std::span<const double> dwell,
                            const CombineSpec& spec) {
  if (spec.weights.size() != kNumActionChannels) {
    throw ValidationError("combine: expected one weight per action channel");
  }
  if (clicks.size() != dwell.size()) {
    throw ValidationError("combine: action vectors differ in length");
  }
  const double w1 = spec.weights[0];
  const double w2 = spec.weights[1];
  // std::pow(0, 0) == 1, which is the convention wanted for the product.
  std::vector<double> out(clicks.size());
  for (std::size_t k = 0; k < clicks.size(); ++k) {
    const double click = clicks[k];
    if (spec.kind == CombineKind::kWeightedSum) {
      out[k] = w1 * click + w2 * dwell[k];
    } else {
      out[k] = std::pow(click, w1) * std::pow(dwell[k], w2);
    }
  }
  return out;
}

std::vector<std::size_t> initial_ranking(const Query& query, const RankingPolicy& policy) {
  const std::size_t n = query.documents.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (std::holds_alternative<ByGradeDesc>(policy)) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return query.documents[a].relevance > query.documents[b].relevance;
    });
  } else if (const auto* by_score = std::get_if<ByScore>(&policy)) {
    if (by_score->ranker == nullptr) throw ValidationError("by_score policy needs a ranker");
    std::vector<std::span<const double>> rows;
    for (const auto& d : query.documents) rows.emplace_back(d.features);
    const auto batch = stack_rows(rows, by_score->ranker->spec().input_dim);
    const Eigen::VectorXd s = by_score->ranker->score_batch(batch);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s(a) > s(b); });
  } else {
    const auto& random = std::get<RandomOrder>(policy);
    std::mt19937_64 rng(derive_seed(random.seed, query.qid, 0));
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

Session sample_session(const Query& query, std::span<const std::size_t> ranking,
                       const SimConfig& cfg, std::mt19937_64& rng) {
  const std::size_t n =
      std::min(static_cast<std::size_t>(cfg.list_size), query.documents.size());
  if (ranking.size() < n) throw ValidationError("sample_session: ranking too short");
  Session s;
  s.qid = query.qid;
  s.ranked_docs.assign(ranking.begin(), ranking.begin() + n);
  std::vector<bool> seen(query.documents.size(), false);
  for (std::size_t d : s.ranked_docs) {
    if (d >= query.documents.size() || seen[d]) {
      throw ValidationError("sample_session: ranking is not a permutation");
    }
    seen[d] = true;
  }
  s.clicks.assign(n, 0);
  s.dwell.assign(n, 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const int position = static_cast<int>(k + 1);
    const int grade = query.documents[s.ranked_docs[k]].relevance;
    const double p = click_propensity(position, cfg.eta) *
                     click_relevance_prob(grade, cfg.noise_eps);
    if (unif(rng) < p) {
      s.clicks[k] = 1;
      const double delta = sample_dwell_position(position, rng);
      const double omega = sample_dwell_relevance(grade, cfg.noise_eps, rng);
      s.dwell[k] = std::max(0.0, delta * omega);
    }
  }
  s.synth = combine(s.clicks, s.dwell, cfg.combine);
  return s;
}

std::mt19937_64 session_stream(std::uint64_t seed, std::string_view qid,
                               std::uint64_t counter) {
  return std::mt19937_64(derive_seed(seed, qid, counter));
}

std::vector<Session> simulate_sessions(const Dataset& dataset,
                                       const RankingPolicy& policy,
                                       const SimConfig& cfg) {
  validate(cfg);
  std::vector<Session> out;
  out.reserve(dataset.queries.size() * cfg.sessions_per_query);
  for (const auto& query : dataset.queries) {
    const auto ranking = initial_ranking(query, policy);
    for (int c = 0; c < cfg.sessions_per_query; ++c) {
      auto rng = session_stream(cfg.seed, query.qid, static_cast<std::uint64_t>(c));
      out.push_back(sample_session(query, ranking, cfg, rng));
    }
  }
  return out;
}

std::vector<double> session_labels(const Session& session, LabelChannel channel) {
  if (channel == LabelChannel::kSynth) return session.synth;
  return std::vector<double>(session.clicks.begin(), session.clicks.end());
}

void write_sessions(std::ostream& out, std::span<const Session> sessions,
                    std::string_view config_hash) {
  if (!config_hash.empty()) out << "# config_hash " << config_hash << '\n';
  out << "# qid\tposition\tdoc_index\tclick\tdwell\tsynth\n";
  for (const auto& s : sessions) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      out << s.qid << '\t' << (k + 1) << '\t' << s.ranked_docs[k] << '\t'
          << s.clicks[k] << '\t' << format_double(s.dwell[k]) << '\t'
          << format_double(s.synth[k]) << '\n';
    }
  }
}

std::vector<Session> read_sessions(std::istream& in) {
  std::vector<Session> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 6) throw ParseError(line_no, "session row needs 6 tab-separated fields");
    const auto pos = parse_int(f[1]);
    const auto doc = parse_int(f[2]);
    const auto click = parse_int(f[3]);
    const auto dwell = parse_double(f[4]);
    const auto synth = parse_double(f[5]);
    if (!pos || !doc || !click || !dwell || !synth || *pos < 1 || *doc < 0 ||
        (*click != 0 && *click != 1) || *dwell < 0) {
      throw ParseError(line_no, "malformed session row");
    }
    if (*pos == 1) {
      out.push_back(Session{std::string(f[0]), {}, {}, {}, {}});
    } else if (out.empty() || out.back().qid != f[0] ||
               static_cast<std::int64_t>(out.back().size()) + 1 != *pos) {
      throw ParseError(line_no, "session positions must run 1, 2, ... per session");
    }
    auto& s = out.back();
    s.ranked_docs.push_back(static_cast<std::size_t>(*doc));
    s.clicks.push_back(static_cast<int>(*click));
    s.dwell.push_back(*dwell);
    s.synth.push_back(*synth);
  }
  return out;
}

SyntheticGenerator::SyntheticGenerator(SyntheticSpec spec, std::uint64_t seed)
    : spec_(spec), seed_(seed) {
  if (spec_.feature_dim < 3) throw ValidationError("synthetic data needs >= 3 features");
  if (spec_.docs_per_query < 2) throw ValidationError("synthetic data needs >= 2 docs per query");
  std::mt19937_64 rng(mix_seed(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  weights_.resize(spec_.feature_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec_.feature_dim));
  for (auto& w : weights_) w = normal(rng) * scale;
}

double SyntheticGenerator::latent_relevance(std::span<const double> x) const {
  double u = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) u += weights_[k] * x[k];
  u += 0.5 * std::tanh(x[0] * x[1]) - 0.25 * x[2] * x[2];
  return u;
}

Dataset SyntheticGenerator::make(std::size_t num_queries, SplitTag tag,
                                 std::uint64_t stream) const {
  Dataset ds;
  ds.feature_dim = spec_.feature_dim;
  ds.split_tag = tag;
  std::mt19937_64 rng(mix_seed(seed_ ^ mix_seed(stream + 1)));
  std::normal_distribution<double> normal(0.0, 1.0);
  // Thresholds on the latent score; roughly 45/28/16/8/3 % across grades 0..4.
  constexpr double kCuts[kMaxGrade] = {0.0, 0.75, 1.35, 1.95};
  for (std::size_t q = 0; q < num_queries; ++q) {
    Query query;
    query.qid = std::string(to_string(tag)) + "-" + std::to_string(q + 1);
    // A per-query shift makes raw feature values only comparable within a query.
    std::vector<double> offset(spec_.feature_dim);
    for (auto& o : offset) o = 0.5 * normal(rng);
    for (std::size_t d = 0; d < spec_.docs_per_query; ++d) {
      Document doc;
      doc.doc_index = d;
      doc.features.resize(spec_.feature_dim);
      for (std::size_t k = 0; k < spec_.feature_dim; ++k) {
        doc.features[k] = offset[k] + normal(rng);
      }
      const double u = latent_relevance(doc.features) + spec_.label_noise * normal(rng);
      int grade = 0;
      while (grade < kMaxGrade && u > kCuts[grade]) ++grade;
      doc.relevance = grade;
      query.documents.push_back(std::move(doc));
    }
    ds.queries.push_back(std::move(query));
  }
  return ds;
}

}  // namespace ultr
